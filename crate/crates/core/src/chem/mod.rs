//! SMILES lexing and parsing into molecular graphs.
//!
//! Supported: the organic subset, bracket atoms, ring closures including
//! `%NN`, branches, explicit bond orders, aromatic lowercase atoms and `.`
//! component separators. Stereo markers, isotopes, hydrogen counts and atom
//! classes are parsed and dropped. No valence checks are made.

mod elements;
mod graph;
mod lexer;
mod parser;

use alloc::string::String;

pub use elements::{element_id, element_symbol, ELEMENT_VOCAB};
pub use graph::{
    Atom, Bond, BondOrder, MolGraph, ATOM_FEATURES, ATOM_FEATURE_SIZES, BOND_FEATURES, BOND_FEATURE_SIZES,
};
pub use lexer::{tokenize_smiles, SmilesToken, TokenKind};
pub use parser::parse_smiles;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesErrorKind {
    #[error("empty SMILES string")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnknownCharacter(char),
    #[error("unterminated bracket atom")]
    UnterminatedBracket,
    #[error("malformed bracket atom {0}")]
    InvalidBracketAtom(String),
    #[error("`%` must be followed by two digits")]
    InvalidRingLabel,
    #[error("`)` without a matching `(`")]
    UnmatchedBranchClose,
    #[error("`(` is never closed")]
    UnclosedBranch,
    #[error("ring label {0} is never closed")]
    UnclosedRing(u32),
    #[error("bond or branch is missing an atom on one side")]
    MissingBondOperand,
    #[error("atom bonded to itself")]
    SelfBond,
    #[error("two bonds join the same pair of atoms")]
    DuplicateBond,
    #[error("unsupported element `{0}`")]
    UnsupportedElement(String),
}

impl SmilesErrorKind {
    /// Whether the error was raised while lexing rather than parsing.
    pub fn is_lex_error(&self) -> bool {
        matches!(
            self,
            Self::Empty | Self::UnknownCharacter(_) | Self::UnterminatedBracket | Self::InvalidRingLabel
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("SMILES error at offset {offset}: {kind}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    pub const fn new(offset: usize, kind: SmilesErrorKind) -> Self {
        Self { offset, kind }
    }
}

/// Tokenizes and parses `s`, producing atom and bond features.
pub fn smiles_to_graph(s: &str) -> Result<MolGraph, SmilesError> {
    let tokens = tokenize_smiles(s)?;
    parse_smiles(&tokens)
}
