use alloc::fmt::Write;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::elements::element_id;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const COUNT: usize = 4;

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            BondOrder::Single => "single",
            BondOrder::Double => "double",
            BondOrder::Triple => "triple",
            BondOrder::Aromatic => "aromatic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub index: usize,
    /// Capitalized element symbol, or `*`.
    pub element: String,
    pub formal_charge: i32,
    pub is_aromatic: bool,
    pub degree: usize,
}

impl Atom {
    pub(crate) fn new(index: usize, element: String, formal_charge: i32, is_aromatic: bool) -> Self {
        Self { index, element, formal_charge, is_aromatic, degree: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn connects(&self, a: usize, b: usize) -> bool {
        self.endpoints == (a, b) || self.endpoints == (b, a)
    }
}

/// Number of integer fields per atom feature row.
pub const ATOM_FEATURES: usize = 4;
/// Number of integer fields per bond feature row.
pub const BOND_FEATURES: usize = 1;
/// Cardinality of each atom feature field, in column order.
pub const ATOM_FEATURE_SIZES: [usize; ATOM_FEATURES] =
    [super::elements::ELEMENT_VOCAB, MAX_DEGREE as usize + 1, 2 * MAX_CHARGE as usize + 1, 2];
pub const BOND_FEATURE_SIZES: [usize; BOND_FEATURES] = [BondOrder::COUNT];

const MAX_DEGREE: u32 = 10;
const MAX_CHARGE: i32 = 3;

/// Parsed molecule: atoms, undirected bonds and their integer features.
///
/// Atom feature columns: element id (atomic number, 0 for `*`), degree
/// clamped to 10, formal charge clamped to ±3 and shifted to 0..=6,
/// aromatic flag. Bond feature column: bond order id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub atom_features: Vec<[u32; ATOM_FEATURES]>,
    pub bond_features: Vec<[u32; BOND_FEATURES]>,
}

impl MolGraph {
    pub(crate) fn new(mut atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        for a in atoms.iter_mut() {
            a.degree = 0;
        }
        for b in &bonds {
            atoms[b.endpoints.0].degree += 1;
            atoms[b.endpoints.1].degree += 1;
        }
        let atom_features = atoms
            .iter()
            .map(|a| {
                [
                    element_id(&a.element).expect("parser only admits known elements"),
                    (a.degree as u32).min(MAX_DEGREE),
                    (a.formal_charge.clamp(-MAX_CHARGE, MAX_CHARGE) + MAX_CHARGE) as u32,
                    a.is_aromatic as u32,
                ]
            })
            .collect();
        let bond_features = bonds.iter().map(|b| [b.order.id()]).collect();
        Self { atoms, bonds, atom_features, bond_features }
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        self.bonds
            .iter()
            .filter_map(|b| match b.endpoints {
                (a, c) if a == i => Some(c),
                (a, c) if c == i => Some(a),
                _ => None,
            })
            .collect()
    }

    /// Adjacency lists for every atom.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.endpoints.0].push(b.endpoints.1);
            adj[b.endpoints.1].push(b.endpoints.0);
        }
        adj
    }

    /// Each bond in both directions as `(source, target, bond index)`.
    pub fn directed_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(2 * self.bonds.len());
        for (k, b) in self.bonds.iter().enumerate() {
            out.push((b.endpoints.0, b.endpoints.1, k));
            out.push((b.endpoints.1, b.endpoints.0, k));
        }
        out
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = self.atoms.clone();
        for (old, a) in self.atoms.iter().enumerate() {
            let mut moved = a.clone();
            moved.index = perm[old];
            atoms[perm[old]] = moved;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond { endpoints: (perm[b.endpoints.0], perm[b.endpoints.1]), order: b.order })
            .collect();
        Self::new(atoms, bonds)
    }

    /// Plain-text dump: `atom idx element charge aromatic` lines followed by
    /// `bond i j order` lines.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for a in &self.atoms {
            let _ = writeln!(s, "atom {} {} {} {}", a.index, a.element, a.formal_charge, a.is_aromatic as u8);
        }
        for b in &self.bonds {
            let _ = writeln!(s, "bond {} {} {}", b.endpoints.0, b.endpoints.1, b.order.name());
        }
        s
    }
}
