use alloc::vec::Vec;

use super::{SmilesError, SmilesErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Organic-subset atom (`C`, `Cl`, `c`, ...) or the `*` wildcard.
    Atom,
    BracketAtom,
    Bond,
    BranchOpen,
    BranchClose,
    RingDigit,
    /// `%NN` ring-closure label.
    RingTwoDigit,
    /// `.` separating disconnected components.
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmilesToken<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the token in the source string.
    pub position: usize,
}

/// Splits a SMILES string into tokens by maximal munch.
///
/// Concatenating the token texts reproduces the input exactly.
pub fn tokenize_smiles(s: &str) -> Result<Vec<SmilesToken<'_>>, SmilesError> {
    if s.is_empty() {
        return Err(SmilesError::new(0, SmilesErrorKind::Empty));
    }
    let bytes = s.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let kind = match bytes[i] {
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                TokenKind::Atom
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                TokenKind::Atom
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n' | b'o' | b'p'
            | b's' | b'*' => {
                i += 1;
                TokenKind::Atom
            }
            b'[' => {
                let close = bytes[i..]
                    .iter()
                    .position(|&b| b == b']')
                    .ok_or(SmilesError::new(start, SmilesErrorKind::UnterminatedBracket))?;
                if bytes[i + 1..i + close].contains(&b'[') {
                    return Err(SmilesError::new(start, SmilesErrorKind::UnterminatedBracket));
                }
                i += close + 1;
                TokenKind::BracketAtom
            }
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                i += 1;
                TokenKind::Bond
            }
            b'(' => {
                i += 1;
                TokenKind::BranchOpen
            }
            b')' => {
                i += 1;
                TokenKind::BranchClose
            }
            b'0'..=b'9' => {
                i += 1;
                TokenKind::RingDigit
            }
            b'%' => {
                let two = bytes.get(i + 1..i + 3);
                if !two.is_some_and(|d| d.iter().all(u8::is_ascii_digit)) {
                    return Err(SmilesError::new(start, SmilesErrorKind::InvalidRingLabel));
                }
                i += 3;
                TokenKind::RingTwoDigit
            }
            b'.' => {
                i += 1;
                TokenKind::Dot
            }
            _ => {
                let c = s[i..].chars().next().unwrap_or('\u{FFFD}');
                return Err(SmilesError::new(start, SmilesErrorKind::UnknownCharacter(c)));
            }
        };
        tokens.push(SmilesToken { kind, text: &s[start..i], position: start });
    }
    Ok(tokens)
}
