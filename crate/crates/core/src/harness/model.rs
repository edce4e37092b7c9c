use alloc::string::String;
use alloc::vec::Vec;
use core::cell::Cell;

use super::{AblationConfig, CaptionRecord, RunConfig};
use crate::chem::{smiles_to_graph, MolGraph};
use crate::error::{dim_err, Error, Result};
use crate::fusion::{
    assemble_decoder_input, mean_pool, CrossTokenAttention, CrossTokenAttentionConfig, FusedDecoderInput, MaskedRows,
};
use crate::graph_encoder::{GraphEncoder, GraphEncoderConfig};
use crate::numerics::{Dropout, Initializer, ParamStore, Tape, Var};
use crate::text::{generate, ModelScorer, Strategy, TextModel, TokenSequence, TransformerConfig, Vocabulary};

/// Forward-call counters for the optional pipeline stages.
#[derive(Debug, Default, Clone)]
pub struct CallCounters {
    pub chem: Cell<usize>,
    pub graph_encoder: Cell<usize>,
    pub smiles_encoder: Cell<usize>,
    pub cross_token_attention: Cell<usize>,
}

impl CallCounters {
    pub const NAMES: [&'static str; 4] = ["chem", "graph_encoder", "smiles_encoder", "cross_token_attention"];

    pub fn snapshot(&self) -> [usize; 4] {
        [self.chem.get(), self.graph_encoder.get(), self.smiles_encoder.get(), self.cross_token_attention.get()]
    }

    fn bump(c: &Cell<usize>) {
        c.set(c.get() + 1);
    }
}

/// A record tokenized (and parsed, when the graph is used) for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub id: String,
    pub smiles: TokenSequence,
    pub target: TokenSequence,
    pub graph: Option<MolGraph>,
    pub reference: String,
}

/// Graph encoder, SMILES/text transformer and cross-token attention wired
/// according to an [`AblationConfig`].
#[derive(Debug, Clone)]
pub struct CaptionModel {
    pub config: RunConfig,
    pub ablation: AblationConfig,
    pub graph_encoder: Option<GraphEncoder>,
    pub text: TextModel,
    pub cross_token_attention: Option<CrossTokenAttention>,
    pub prompt: TokenSequence,
    pub counters: CallCounters,
}

impl CaptionModel {
    /// Registers every parameter on `store`, initialized from `config.seed`.
    pub fn new(store: &mut ParamStore, vocab: &Vocabulary, config: RunConfig, ablation: AblationConfig) -> Result<Self> {
        config.validate()?;
        ablation.validate()?;
        let mut init = Initializer::new(config.seed);
        let d = config.d_model;
        let graph_encoder = if ablation.use_graph {
            let gc = GraphEncoderConfig { hidden: config.graph_hidden, max_nodes: config.max_nodes, output_dim: d };
            Some(GraphEncoder::new(store, &mut init, gc)?)
        } else {
            None
        };
        let text = TextModel::new(store, &mut init, TransformerConfig {
            vocab_size: vocab.len(),
            d_model: d,
            heads: config.heads,
            encoder_layers: config.encoder_layers,
            decoder_layers: config.decoder_layers,
            ff_hidden: config.ff_hidden,
            encoder_len: config.smiles_len.max(config.prompt_len),
            decoder_len: config.target_len,
            context_len: config.context_len(),
        })?;
        let cross_token_attention = if ablation.use_cross_token_attention {
            let cc = CrossTokenAttentionConfig {
                heads: config.cta_heads,
                post_self_attention: config.cta_post_self_attention,
                ..CrossTokenAttentionConfig::new(d)
            };
            Some(CrossTokenAttention::new(store, &mut init, cc)?)
        } else {
            None
        };
        let prompt = vocab.encode_text(config.task.prompt(), config.prompt_len, false)?;
        if prompt.valid_len() == 0 {
            return Err(Error::Config("the prompt encodes to no tokens".into()));
        }
        Ok(Self {
            config,
            ablation,
            graph_encoder,
            text,
            cross_token_attention,
            prompt,
            counters: CallCounters::default(),
        })
    }

    pub fn prepare(&self, vocab: &Vocabulary, record: &CaptionRecord) -> Result<PreparedRecord> {
        let graph = if self.ablation.use_graph {
            CallCounters::bump(&self.counters.chem);
            Some(smiles_to_graph(&record.smiles)?)
        } else {
            None
        };
        Ok(PreparedRecord {
            id: record.id.clone(),
            smiles: vocab.encode_text(&record.smiles, self.config.smiles_len, false)?,
            target: vocab.encode_text(&record.description, self.config.target_len, true)?,
            graph,
            reference: record.description.clone(),
        })
    }

    pub fn prepare_all(&self, vocab: &Vocabulary, records: &[CaptionRecord]) -> Result<Vec<PreparedRecord>> {
        records.iter().map(|r| self.prepare(vocab, r)).collect()
    }

    /// Encodes the task prompt with the text encoder.
    pub fn encode_prompt(&self, tape: &mut Tape, store: &ParamStore, dropout: &mut Dropout<'_>) -> Result<MaskedRows> {
        let out = self.text.encode(tape, store, &self.prompt, dropout)?;
        Ok(MaskedRows { values: out.hidden, mask: self.prompt.mask.clone() })
    }

    /// Builds the decoder context for one record.
    pub fn context(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        prompt: &MaskedRows,
        record: &PreparedRecord,
        dropout: &mut Dropout<'_>,
    ) -> Result<FusedDecoderInput> {
        let smiles = if self.ablation.encodes_smiles() {
            CallCounters::bump(&self.counters.smiles_encoder);
            let out = self.text.encode(tape, store, &record.smiles, dropout)?;
            Some(MaskedRows { values: out.hidden, mask: record.smiles.mask.clone() })
        } else {
            None
        };
        let mut pooled = None;
        let mut graph_rows = None;
        if let Some(encoder) = &self.graph_encoder {
            let graph = record
                .graph
                .as_ref()
                .ok_or_else(|| dim_err!("record {} was prepared without a graph", record.id))?;
            CallCounters::bump(&self.counters.graph_encoder);
            let emb = encoder.encode(tape, store, graph)?;
            let o_g = match (&self.cross_token_attention, &smiles) {
                (Some(cta), Some(s)) => {
                    CallCounters::bump(&self.counters.cross_token_attention);
                    cta.forward(tape, store, &emb, s.values, &s.mask)?.output
                }
                _ => emb.values,
            };
            pooled = Some(mean_pool(tape, o_g, &emb.mask)?);
            graph_rows = Some(MaskedRows { values: o_g, mask: emb.mask });
        }
        let smiles_rows = if self.ablation.use_smiles { smiles.as_ref() } else { None };
        assemble_decoder_input(tape, prompt, pooled, graph_rows.as_ref(), smiles_rows)
    }

    /// Teacher-forced loss of one record.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        prompt: &MaskedRows,
        record: &PreparedRecord,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let ctx = self.context(tape, store, prompt, record, dropout)?;
        self.text.loss(tape, store, &ctx, &record.target, dropout)
    }

    pub fn generate(
        &self,
        store: &ParamStore,
        vocab: &Vocabulary,
        record: &PreparedRecord,
        strategy: Strategy,
        max_len: usize,
    ) -> Result<String> {
        if vocab.len() != self.text.config.vocab_size {
            return Err(Error::Version(alloc::format!(
                "vocabulary has {} tokens, model expects {}",
                vocab.len(),
                self.text.config.vocab_size
            )));
        }
        let mut tape = Tape::no_grad();
        let mut off = Dropout::off();
        let prompt = self.encode_prompt(&mut tape, store, &mut off)?;
        let ctx = self.context(&mut tape, store, &prompt, record, &mut off)?;
        let mut scorer = ModelScorer::new(&self.text, store, &mut tape, &ctx)?;
        let max_len = max_len.min(self.text.config.decoder_len - 1).max(1);
        generate(&mut scorer, vocab, strategy, max_len)
    }
}
