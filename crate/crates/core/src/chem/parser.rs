use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::elements::{aromatic_symbol, element_id};
use super::graph::{Atom, Bond, BondOrder, MolGraph};
use super::lexer::{SmilesToken, TokenKind};
use super::{SmilesError, SmilesErrorKind};

struct OpenRing {
    atom: usize,
    bond: Option<BondOrder>,
    offset: usize,
}

struct BracketContents {
    symbol: String,
    aromatic: bool,
    charge: i32,
}

/// Builds a molecular graph from a token stream.
///
/// Ring labels pair first-open-first-close and may be reused once closed.
/// Stereo markers and bracket hydrogen counts are accepted and dropped; no
/// hydrogen nodes are created.
pub fn parse_smiles(tokens: &[SmilesToken<'_>]) -> Result<MolGraph, SmilesError> {
    if tokens.is_empty() {
        return Err(SmilesError::new(0, SmilesErrorKind::Empty));
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();

    for tok in tokens {
        let at = tok.position;
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    organic_atom(tok.text, atoms.len())
                } else {
                    let c = parse_bracket(tok.text, at)?;
                    Atom::new(atoms.len(), c.symbol, c.charge, c.aromatic)
                };
                let idx = atom.index;
                atoms.push(atom);
                if let Some(p) = prev {
                    let order = pending.take().map(|(o, _)| o);
                    add_bond(&mut bonds, &atoms, p, idx, order, at)?;
                }
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::new(at, SmilesErrorKind::MissingBondOperand));
                }
                let order = match tok.text {
                    "=" => BondOrder::Double,
                    "#" => BondOrder::Triple,
                    ":" => BondOrder::Aromatic,
                    _ => BondOrder::Single,
                };
                pending = Some((order, at));
            }
            TokenKind::BranchOpen => {
                let Some(p) = prev else {
                    return Err(SmilesError::new(at, SmilesErrorKind::MissingBondOperand));
                };
                if let Some((_, off)) = pending {
                    return Err(SmilesError::new(off, SmilesErrorKind::MissingBondOperand));
                }
                branches.push((p, at));
            }
            TokenKind::BranchClose => {
                if let Some((_, off)) = pending {
                    return Err(SmilesError::new(off, SmilesErrorKind::MissingBondOperand));
                }
                let (p, _) = branches.pop().ok_or(SmilesError::new(at, SmilesErrorKind::UnmatchedBranchClose))?;
                prev = Some(p);
            }
            TokenKind::RingDigit | TokenKind::RingTwoDigit => {
                let Some(p) = prev else {
                    return Err(SmilesError::new(at, SmilesErrorKind::MissingBondOperand));
                };
                let label: u32 = tok.text.trim_start_matches('%').parse().expect("lexer guarantees digits");
                let here = pending.take().map(|(o, _)| o);
                match rings.remove(&label) {
                    Some(open) => {
                        let order = here.or(open.bond);
                        add_bond(&mut bonds, &atoms, open.atom, p, order, at)?;
                    }
                    None => {
                        rings.insert(label, OpenRing { atom: p, bond: here, offset: at });
                    }
                }
            }
            TokenKind::Dot => {
                if let Some((_, off)) = pending {
                    return Err(SmilesError::new(off, SmilesErrorKind::MissingBondOperand));
                }
                if prev.is_none() {
                    return Err(SmilesError::new(at, SmilesErrorKind::MissingBondOperand));
                }
                prev = None;
            }
        }
    }
    if let Some((_, off)) = pending {
        return Err(SmilesError::new(off, SmilesErrorKind::MissingBondOperand));
    }
    if let Some(&(_, off)) = branches.last() {
        return Err(SmilesError::new(off, SmilesErrorKind::UnclosedBranch));
    }
    if let Some((&label, open)) = rings.iter().next() {
        return Err(SmilesError::new(open.offset, SmilesErrorKind::UnclosedRing(label)));
    }
    if prev.is_none() {
        // trailing dot
        let last = tokens.last().map_or(0, |t| t.position);
        return Err(SmilesError::new(last, SmilesErrorKind::MissingBondOperand));
    }
    Ok(MolGraph::new(atoms, bonds))
}

fn organic_atom(text: &str, index: usize) -> Atom {
    match aromatic_symbol(text) {
        Some(sym) => Atom::new(index, sym.to_string(), 0, true),
        None => Atom::new(index, text.to_string(), 0, false),
    }
}

fn add_bond(
    bonds: &mut Vec<Bond>,
    atoms: &[Atom],
    a: usize,
    b: usize,
    order: Option<BondOrder>,
    at: usize,
) -> Result<(), SmilesError> {
    if a == b {
        return Err(SmilesError::new(at, SmilesErrorKind::SelfBond));
    }
    if bonds.iter().any(|bd| bd.connects(a, b)) {
        return Err(SmilesError::new(at, SmilesErrorKind::DuplicateBond));
    }
    let order = order.unwrap_or(if atoms[a].is_aromatic && atoms[b].is_aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    });
    bonds.push(Bond { endpoints: (a, b), order });
    Ok(())
}

/// `[` isotope? symbol chirality? hcount? charge? class? `]`
fn parse_bracket(text: &str, at: usize) -> Result<BracketContents, SmilesError> {
    let invalid = || SmilesError::new(at, SmilesErrorKind::InvalidBracketAtom(text.to_string()));
    let inner = &text[1..text.len() - 1];
    let b = inner.as_bytes();
    let mut i = 0;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let (symbol, aromatic) = if b.get(i) == Some(&b'*') {
        i += 1;
        ("*".to_string(), false)
    } else if b.get(i).is_some_and(u8::is_ascii_uppercase) {
        let two = inner.get(i..i + 2).filter(|s| s.as_bytes()[1].is_ascii_lowercase());
        match two.filter(|s| element_id(s).is_some()) {
            Some(s) => {
                i += 2;
                (s.to_string(), false)
            }
            None => {
                let one = &inner[i..i + 1];
                if element_id(one).is_none() {
                    let shown = two.unwrap_or(one);
                    return Err(SmilesError::new(at, SmilesErrorKind::UnsupportedElement(shown.to_string())));
                }
                i += 1;
                (one.to_string(), false)
            }
        }
    } else if b.get(i).is_some_and(u8::is_ascii_lowercase) {
        let two = inner.get(i..i + 2).and_then(aromatic_symbol);
        match two {
            Some(s) => {
                i += 2;
                (s.to_string(), true)
            }
            None => {
                let one = &inner[i..i + 1];
                let s = aromatic_symbol(one)
                    .ok_or_else(|| SmilesError::new(at, SmilesErrorKind::UnsupportedElement(one.to_string())))?;
                i += 1;
                (s.to_string(), true)
            }
        }
    } else {
        return Err(invalid());
    };

    if b.get(i) == Some(&b'@') {
        i += 1;
        if b.get(i) == Some(&b'@') {
            i += 1;
        } else if let Some(class) = inner.get(i..i + 2) {
            if ["TH", "AL", "SP", "TB", "OH"].contains(&class) {
                i += 2;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
    }
    if b.get(i) == Some(&b'H') {
        i += 1;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
    }
    let mut charge = 0i32;
    if let Some(&sign) = b.get(i).filter(|&&c| c == b'+' || c == b'-') {
        let unit = if sign == b'+' { 1 } else { -1 };
        i += 1;
        let digits_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i > digits_start {
            let n: i32 = inner[digits_start..i].parse().map_err(|_| invalid())?;
            charge = unit * n;
        } else {
            charge = unit;
            while b.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    if b.get(i) == Some(&b':') {
        i += 1;
        let start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return Err(invalid());
        }
    }
    if i != b.len() {
        return Err(invalid());
    }
    Ok(BracketContents { symbol, aromatic, charge })
}

#[cfg(test)]
mod tests {
    use super::super::{smiles_to_graph, tokenize_smiles};
    use super::*;

    fn orders(g: &MolGraph) -> Vec<(usize, usize, BondOrder)> {
        g.bonds.iter().map(|b| (b.endpoints.0, b.endpoints.1, b.order)).collect()
    }

    #[test]
    fn single_atom() {
        let g = smiles_to_graph("C").unwrap();
        assert_eq!((g.atoms.len(), g.bonds.len()), (1, 0));
    }

    #[test]
    fn cyclopropane_ring_closure() {
        let g = smiles_to_graph("C1CC1").unwrap();
        assert_eq!(orders(&g), [
            (0, 1, BondOrder::Single),
            (1, 2, BondOrder::Single),
            (0, 2, BondOrder::Single)
        ]);
    }

    #[test]
    fn branch_with_double_bond() {
        let g = smiles_to_graph("C(=O)O").unwrap();
        assert_eq!(orders(&g), [(0, 1, BondOrder::Double), (0, 2, BondOrder::Single)]);
    }

    #[test]
    fn bracket_contents() {
        let c = parse_bracket("[NH4+]", 0).unwrap();
        assert_eq!((c.symbol.as_str(), c.charge, c.aromatic), ("N", 1, false));
        let c = parse_bracket("[13C@@H]", 0).unwrap();
        assert_eq!((c.symbol.as_str(), c.charge), ("C", 0));
        let c = parse_bracket("[Fe+++]", 0).unwrap();
        assert_eq!(c.charge, 3);
        let c = parse_bracket("[O-2]", 0).unwrap();
        assert_eq!(c.charge, -2);
        let c = parse_bracket("[nH]", 0).unwrap();
        assert_eq!((c.symbol.as_str(), c.aromatic), ("N", true));
        let c = parse_bracket("[se]", 0).unwrap();
        assert_eq!((c.symbol.as_str(), c.aromatic), ("Se", true));
        let c = parse_bracket("[Cl-]", 0).unwrap();
        assert_eq!((c.symbol.as_str(), c.charge), ("Cl", -1));
        let c = parse_bracket("[C@TH2H]", 0).unwrap();
        assert_eq!(c.symbol, "C");
        let c = parse_bracket("[CH3:7]", 0).unwrap();
        assert_eq!(c.symbol, "C");
    }

    #[test]
    fn unsupported_element_named() {
        let err = smiles_to_graph("C[Xx]").unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::UnsupportedElement("Xx".into()));
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn parse_errors() {
        let cases = [
            ("C1CC", SmilesErrorKind::UnclosedRing(1)),
            ("C(C", SmilesErrorKind::UnclosedBranch),
            ("CC)C", SmilesErrorKind::UnmatchedBranchClose),
            ("=CC", SmilesErrorKind::MissingBondOperand),
            ("CC=", SmilesErrorKind::MissingBondOperand),
            ("C==C", SmilesErrorKind::MissingBondOperand),
            ("C11", SmilesErrorKind::SelfBond),
            ("C12CC12", SmilesErrorKind::DuplicateBond),
            ("C.", SmilesErrorKind::MissingBondOperand),
        ];
        for (s, kind) in cases {
            let err = smiles_to_graph(s).unwrap_err();
            assert_eq!(err.kind, kind, "{s}");
        }
        assert_eq!(smiles_to_graph("CC(C").unwrap_err().offset, 2);
    }

    #[test]
    fn ring_label_reuse_and_bond_on_open() {
        let g = smiles_to_graph("C1CC1C1CC1").unwrap();
        assert_eq!((g.atoms.len(), g.bonds.len()), (6, 7));
        let g = smiles_to_graph("C=1CC1").unwrap();
        assert_eq!(g.bonds[2].order, BondOrder::Double);
    }

    #[test]
    fn aromatic_defaults_and_dot() {
        let g = smiles_to_graph("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(g.bonds.iter().filter(|b| b.order == BondOrder::Single).count(), 1);
        let g = smiles_to_graph("[Na+].[Cl-]").unwrap();
        assert_eq!((g.atoms.len(), g.bonds.len()), (2, 0));
        assert_eq!(g.atoms[0].formal_charge, 1);
        let toks = tokenize_smiles("F/C=C/F").unwrap();
        assert_eq!(parse_smiles(&toks).unwrap().bonds.len(), 3);
    }
}
