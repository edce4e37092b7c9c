//! Subword tokenizer, encoder–decoder transformer and caption decoding.

mod generate;
mod transformer;
mod vocab;

pub use generate::{generate, generate_ids, log_softmax, ModelScorer, NextTokenScorer, Strategy};
pub use transformer::{
    shift_right, DecoderLayer, DecoderOutput, EncoderLayer, EncoderOutput, MultiHeadAttention, TextModel,
    TransformerConfig,
};
pub(crate) use transformer::attend_heads;
pub use vocab::{TokenSequence, Vocabulary, EOS_ID, PAD_ID, RESERVED, UNK_ID};
