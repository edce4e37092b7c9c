//! Records, prompts, run configuration, the assembled captioning model and
//! the training, evaluation and ablation loops.

mod buckets;
mod model;
mod run;
mod synthetic;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::text::{Strategy, Vocabulary};

pub use buckets::{split_by_length, tertile_boundaries, word_count, LengthBuckets, BUCKET_BOUNDARIES};
pub use model::{CallCounters, CaptionModel, PreparedRecord};
pub use run::{ablate, evaluate, train, AblationRow, BucketScores, EvalReport, TrainReport, Trainer, ABLATION_FOOTER};
pub use synthetic::synthetic_corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Caption,
    Iupac,
}

impl Task {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "caption" => Ok(Task::Caption),
            "iupac" => Ok(Task::Iupac),
            other => Err(Error::Config(format!("unknown task {other:?}; expected caption or iupac"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Caption => "caption",
            Task::Iupac => "iupac",
        }
    }

    pub fn prompt(self) -> &'static str {
        match self {
            Task::Caption => "Caption the following molecule:",
            Task::Iupac => "Predict IUPAC name of the following molecule:",
        }
    }
}

/// Trains a subword vocabulary on both task prompts plus every SMILES string
/// and description in `records`.
pub fn build_vocabulary(records: &[CaptionRecord], size: usize) -> Result<Vocabulary> {
    let mut corpus: Vec<&str> = alloc::vec![Task::Caption.prompt(), Task::Iupac.prompt()];
    for r in records {
        corpus.push(&r.smiles);
        corpus.push(&r.description);
    }
    Vocabulary::build(&corpus, size)
}

/// Prompt text for a task name.
pub fn build_prompt(task: &str) -> Result<&'static str> {
    Task::parse(task).map(Task::prompt)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub id: String,
    pub smiles: String,
    pub description: String,
    pub task: Task,
}

/// Which inputs reach the decoder and whether cross-token attention runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AblationConfig {
    pub use_graph: bool,
    pub use_smiles: bool,
    pub use_cross_token_attention: bool,
}

impl AblationConfig {
    pub const FULL: Self = Self { use_graph: true, use_smiles: true, use_cross_token_attention: true };

    /// The five input/fusion combinations of the ablation table, in order.
    pub const TABLE: [Self; 5] = [
        Self { use_graph: false, use_smiles: true, use_cross_token_attention: false },
        Self { use_graph: true, use_smiles: false, use_cross_token_attention: false },
        Self { use_graph: true, use_smiles: false, use_cross_token_attention: true },
        Self { use_graph: true, use_smiles: true, use_cross_token_attention: false },
        Self::FULL,
    ];

    pub fn validate(&self) -> Result<()> {
        if !self.use_graph && !self.use_smiles {
            return Err(Error::Config("at least one of graph or SMILES input is required".into()));
        }
        if self.use_cross_token_attention && !self.use_graph {
            return Err(Error::Config("cross-token attention requires the graph input".into()));
        }
        Ok(())
    }

    /// Whether the SMILES encoder runs at all: for the decoder input or as
    /// attention keys.
    pub fn encodes_smiles(&self) -> bool {
        self.use_smiles || self.use_cross_token_attention
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub heads: usize,
    pub seed: u64,
    /// SMILES token budget `|n|`.
    pub smiles_len: usize,
    /// Target token budget `|m|`, end-of-sequence included.
    pub target_len: usize,
    /// Prompt token budget `|P|`.
    pub prompt_len: usize,
    /// Graph node budget `l`.
    pub max_nodes: usize,
    /// Shared model width `d`.
    pub d_model: usize,
    /// GIN hidden width `d_g`.
    pub graph_hidden: usize,
    pub ff_hidden: usize,
    pub vocab_size: usize,
    /// Heads of the cross-token attention block.
    pub cta_heads: usize,
    pub cta_post_self_attention: bool,
    pub strategy: Strategy,
    /// Generation cap in tokens; defaults to `target_len - 1`.
    pub max_generate: usize,
    pub task: Task,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RunConfig {
    /// Single-CPU defaults.
    pub fn desk() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-4,
            weight_decay: 0.01,
            batch_size: 14,
            dropout: 0.1,
            encoder_layers: 2,
            decoder_layers: 2,
            heads: 4,
            seed: 0,
            smiles_len: 128,
            target_len: 128,
            prompt_len: 16,
            max_nodes: 64,
            d_model: 256,
            graph_hidden: 128,
            ff_hidden: 1024,
            vocab_size: 2048,
            cta_heads: 1,
            cta_post_self_attention: false,
            strategy: Strategy::Greedy,
            max_generate: 127,
            task: Task::Caption,
        }
    }

    /// 120 epochs, lr 1e-4, batch 14, dropout 0.1, 12 layers and 12 heads.
    pub fn full_scale() -> Self {
        Self {
            epochs: 120,
            encoder_layers: 12,
            decoder_layers: 12,
            heads: 12,
            d_model: 768,
            graph_hidden: 300,
            ff_hidden: 3072,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("heads", self.heads),
            ("smiles_len", self.smiles_len),
            ("target_len", self.target_len),
            ("prompt_len", self.prompt_len),
            ("max_nodes", self.max_nodes),
            ("d_model", self.d_model),
            ("graph_hidden", self.graph_hidden),
            ("ff_hidden", self.ff_hidden),
            ("vocab_size", self.vocab_size),
            ("cta_heads", self.cta_heads),
            ("max_generate", self.max_generate),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate {} must be finite and non-negative", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must be in [0, 1)", self.dropout)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay {} must be finite and non-negative", self.weight_decay)));
        }
        if self.d_model % self.heads != 0 || self.d_model % self.cta_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be divisible by heads {} and cta_heads {}",
                self.d_model, self.heads, self.cta_heads
            )));
        }
        if let Strategy::Beam(0) = self.strategy {
            return Err(Error::Config("beam width must be positive".into()));
        }
        Ok(())
    }

    /// Largest context the decoder can receive.
    pub fn context_len(&self) -> usize {
        self.prompt_len + 1 + self.max_nodes + self.smiles_len
    }
}
