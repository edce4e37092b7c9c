/// Element symbols indexed by atomic number minus one.
const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K",
    "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",
    "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr",
    "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf",
    "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

/// Number of distinct element ids: the wildcard `*` (0) plus every element.
pub const ELEMENT_VOCAB: usize = SYMBOLS.len() + 1;

/// Element id used as an atom feature: atomic number, or 0 for `*`.
pub fn element_id(symbol: &str) -> Option<u32> {
    if symbol == "*" {
        return Some(0);
    }
    SYMBOLS.iter().position(|&s| s == symbol).map(|p| p as u32 + 1)
}

pub fn element_symbol(id: u32) -> Option<&'static str> {
    match id {
        0 => Some("*"),
        n => SYMBOLS.get(n as usize - 1).copied(),
    }
}

/// Lowercase symbols that may appear as aromatic atoms.
pub(crate) fn aromatic_symbol(lower: &str) -> Option<&'static str> {
    Some(match lower {
        "b" => "B",
        "c" => "C",
        "n" => "N",
        "o" => "O",
        "p" => "P",
        "s" => "S",
        "se" => "Se",
        "as" => "As",
        "te" => "Te",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_numbers() {
        assert_eq!(element_id("H"), Some(1));
        assert_eq!(element_id("C"), Some(6));
        assert_eq!(element_id("Cl"), Some(17));
        assert_eq!(element_id("Og"), Some(118));
        assert_eq!(element_id("Xx"), None);
        assert_eq!(element_symbol(8), Some("O"));
    }
}
