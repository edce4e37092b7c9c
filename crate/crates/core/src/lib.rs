//! Molecule captioning from fused molecular-graph and SMILES representations.
//!
//! The crate is `no_std` (with `alloc`) and covers the full algorithmic
//! stack: a reverse-mode autodiff tape, a SMILES parser, a GIN graph
//! encoder, a byte-pair tokenizer with a small encoder–decoder transformer,
//! cross-token attention fusion, caption metrics and the training,
//! evaluation and ablation loops. File formats and the CLI live in the
//! `molcap` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod chem;
pub mod error;
pub mod fusion;
pub mod graph_encoder;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod text;

pub use error::{Error, Result};
