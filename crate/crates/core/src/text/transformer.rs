//! Pre-LayerNorm encoder–decoder transformer with learned absolute
//! positions and one embedding table shared by the encoder input, the
//! decoder input and the output projection.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use super::vocab::{TokenSequence, PAD_ID};
use crate::error::{contract_err, dim_err, Error, Result};
use crate::fusion::FusedDecoderInput;
use crate::numerics::{AttentionMask, Dropout, Initializer, LayerNorm, Linear, Mlp, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Feed-forward hidden width.
    pub ff_hidden: usize,
    /// Position budget of the encoder (SMILES and prompt).
    pub encoder_len: usize,
    /// Position budget of the decoder (`|m|`).
    pub decoder_len: usize,
    /// Position budget of the fused decoder context.
    pub context_len: usize,
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("transformer: {m}")));
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return fail(&format!("d_model {} must be a positive multiple of heads {}", self.d_model, self.heads));
        }
        if self.vocab_size < 3 {
            return fail("vocabulary needs the three reserved tokens");
        }
        if self.ff_hidden == 0 || self.encoder_len == 0 || self.decoder_len == 0 || self.context_len == 0 {
            return fail("widths and position budgets must be positive");
        }
        Ok(())
    }
}

/// Multi-head scaled dot-product attention without biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub heads: usize,
    pub w_q: Linear,
    pub w_k: Linear,
    pub w_v: Linear,
    pub w_o: Linear,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, name: &str, d: usize, heads: usize) -> Result<Self> {
        if heads == 0 || d % heads != 0 {
            return Err(Error::Config(format!("{name}: width {d} is not divisible into {heads} heads")));
        }
        let mut lin = |suffix: &str| Linear::new(store, init, &format!("{name}.{suffix}"), d, d, false);
        Ok(Self { heads, w_q: lin("w_q")?, w_k: lin("w_k")?, w_v: lin("w_v")?, w_o: lin("w_o")? })
    }

    /// Returns the output and one probability matrix per head.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        queries: Var,
        keys: Var,
        mask: AttentionMask<'_>,
    ) -> Result<(Var, Vec<Var>)> {
        let q = self.w_q.forward(tape, store, queries)?;
        let k = self.w_k.forward(tape, store, keys)?;
        let v = self.w_v.forward(tape, store, keys)?;
        let (out, probs) = attend_heads(tape, q, k, v, self.heads, mask)?;
        Ok((self.w_o.forward(tape, store, out)?, probs))
    }
}

/// Splits `q`, `k`, `v` column-wise into `heads` blocks, attends within each
/// block with `1/sqrt(width)` scaling and concatenates the results.
pub(crate) fn attend_heads(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    mask: AttentionMask<'_>,
) -> Result<(Var, Vec<Var>)> {
    let dk = tape.value(q).cols();
    let dv = tape.value(v).cols();
    if tape.value(k).cols() != dk {
        return Err(dim_err!("attention: query width {} and key width {} differ", dk, tape.value(k).cols()));
    }
    if heads == 0 || dk % heads != 0 || dv % heads != 0 {
        return Err(dim_err!("attention: widths {}/{} do not split into {} heads", dk, dv, heads));
    }
    let (hk, hv) = (dk / heads, dv / heads);
    let mut outs = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (tape.slice_cols(q, h * hk, hk)?, tape.slice_cols(k, h * hk, hk)?, tape.slice_cols(v, h * hv, hv)?)
        };
        let scores = tape.matmul_nt(qh, kh)?;
        let scores = tape.scale(scores, 1.0 / sqrt(hk as f64))?;
        let p = tape.softmax_masked(scores, mask)?;
        outs.push(tape.matmul(p, vh)?);
        probs.push(p);
    }
    let out = if heads == 1 { outs[0] } else { tape.concat_cols(&outs)? };
    Ok((out, probs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub ln_attn: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_ff: LayerNorm,
    pub ff: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub ln_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub ln_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub ln_ff: LayerNorm,
    pub ff: Mlp,
}

/// Encoder hidden states plus every self-attention probability matrix,
/// layer-major then head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    pub hidden: Var,
    pub attention: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    /// `len × V` next-token logits.
    pub logits: Var,
    pub self_attention: Vec<Var>,
    pub cross_attention: Vec<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextModel {
    pub config: TransformerConfig,
    pub embedding: ParamId,
    pub encoder_positions: ParamId,
    pub decoder_positions: ParamId,
    pub context_positions: ParamId,
    pub encoder: Vec<EncoderLayer>,
    pub encoder_ln: LayerNorm,
    pub decoder: Vec<DecoderLayer>,
    pub decoder_ln: LayerNorm,
}

impl TextModel {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, config: TransformerConfig) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let embedding = store.add("text.embedding", init.embedding(config.vocab_size, d))?;
        let encoder_positions = store.add("text.encoder.position", init.embedding(config.encoder_len, d))?;
        let decoder_positions = store.add("text.decoder.position", init.embedding(config.decoder_len, d))?;
        let context_positions = store.add("text.context.position", init.embedding(config.context_len, d))?;
        let mut encoder = Vec::with_capacity(config.encoder_layers);
        for i in 0..config.encoder_layers {
            let p = format!("text.encoder.layer{i}");
            encoder.push(EncoderLayer {
                ln_attn: LayerNorm::new(store, &format!("{p}.ln_attn"), d)?,
                self_attn: MultiHeadAttention::new(store, init, &format!("{p}.self_attn"), d, config.heads)?,
                ln_ff: LayerNorm::new(store, &format!("{p}.ln_ff"), d)?,
                ff: Mlp::new(store, init, &format!("{p}.ff"), d, config.ff_hidden, d)?,
            });
        }
        let encoder_ln = LayerNorm::new(store, "text.encoder.ln_final", d)?;
        let mut decoder = Vec::with_capacity(config.decoder_layers);
        for i in 0..config.decoder_layers {
            let p = format!("text.decoder.layer{i}");
            decoder.push(DecoderLayer {
                ln_self: LayerNorm::new(store, &format!("{p}.ln_self"), d)?,
                self_attn: MultiHeadAttention::new(store, init, &format!("{p}.self_attn"), d, config.heads)?,
                ln_cross: LayerNorm::new(store, &format!("{p}.ln_cross"), d)?,
                cross_attn: MultiHeadAttention::new(store, init, &format!("{p}.cross_attn"), d, config.heads)?,
                ln_ff: LayerNorm::new(store, &format!("{p}.ln_ff"), d)?,
                ff: Mlp::new(store, init, &format!("{p}.ff"), d, config.ff_hidden, d)?,
            });
        }
        let decoder_ln = LayerNorm::new(store, "text.decoder.ln_final", d)?;
        Ok(Self {
            config,
            embedding,
            encoder_positions,
            decoder_positions,
            context_positions,
            encoder,
            encoder_ln,
            decoder,
            decoder_ln,
        })
    }

    fn embed_ids(&self, tape: &mut Tape, store: &ParamStore, ids: &[u32], positions: ParamId) -> Result<Var> {
        let v = self.config.vocab_size;
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= v) {
            return Err(dim_err!("token id {} outside vocabulary of {}", bad, v));
        }
        let idx: Vec<usize> = ids.iter().map(|&t| t as usize).collect();
        let table = tape.param(store, self.embedding);
        let tokens = tape.gather_rows(table, &idx)?;
        let pos = tape.param(store, positions);
        let pos = tape.slice_rows(pos, 0, ids.len())?;
        tape.add(tokens, pos)
    }

    /// Token plus position embeddings for an encoder input.
    pub fn embed(&self, tape: &mut Tape, store: &ParamStore, tokens: &TokenSequence) -> Result<Var> {
        if tokens.is_empty() || tokens.len() > self.config.encoder_len {
            return Err(dim_err!(
                "encoder input of length {} does not fit the position budget {}",
                tokens.len(),
                self.config.encoder_len
            ));
        }
        if tokens.mask.len() != tokens.ids.len() {
            return Err(dim_err!("token mask has {} entries for {} ids", tokens.mask.len(), tokens.ids.len()));
        }
        self.embed_ids(tape, store, &tokens.ids, self.encoder_positions)
    }

    /// Runs the encoder stack over already-embedded rows.
    ///
    /// Only unmasked rows are processed: they attend to each other alone,
    /// and the output rows at masked positions are zero. Attention matrices
    /// are therefore `k×k` for `k` unmasked positions.
    pub fn encode_embedded(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        mask: &[bool],
        dropout: &mut Dropout<'_>,
    ) -> Result<EncoderOutput> {
        if tape.value(x).rows() != mask.len() || tape.value(x).cols() != self.config.d_model {
            return Err(dim_err!(
                "encoder input shape {:?} does not match mask length {} and width {}",
                tape.shape(x),
                mask.len(),
                self.config.d_model
            ));
        }
        if !mask.iter().any(|&m| m) {
            return Err(contract_err!("encoder input has no unmasked position"));
        }
        let valid = valid_rows(mask);
        let compact = valid.len() < mask.len();
        let x = if compact { tape.gather_rows(x, &valid)? } else { x };
        let mut h = dropout.apply(tape, x)?;
        let mut attention = Vec::new();
        for layer in &self.encoder {
            let n = layer.ln_attn.forward(tape, store, h)?;
            let (a, probs) = layer.self_attn.forward(tape, store, n, n, AttentionMask::default())?;
            attention.extend(probs);
            let a = dropout.apply(tape, a)?;
            h = tape.add(h, a)?;
            let n = layer.ln_ff.forward(tape, store, h)?;
            let f = layer.ff.forward(tape, store, n)?;
            let f = dropout.apply(tape, f)?;
            h = tape.add(h, f)?;
        }
        let hidden = self.encoder_ln.forward(tape, store, h)?;
        let hidden = if compact { tape.index_add_rows(hidden, &valid, mask.len())? } else { hidden };
        Ok(EncoderOutput { hidden, attention })
    }

    /// `f(S) = S*`: embeds and encodes a padded token sequence.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        tokens: &TokenSequence,
        dropout: &mut Dropout<'_>,
    ) -> Result<EncoderOutput> {
        let x = self.embed(tape, store, tokens)?;
        self.encode_embedded(tape, store, x, &tokens.mask, dropout)
    }

    /// Adds the context position embeddings to a fused context and keeps
    /// only its unmasked rows, which is what every decoder layer attends
    /// over.
    pub fn prepare_context(&self, tape: &mut Tape, store: &ParamStore, context: &FusedDecoderInput) -> Result<Var> {
        let shape = tape.shape(context.values).to_vec();
        if shape.len() != 2 || shape[1] != self.config.d_model {
            return Err(dim_err!("context width: got shape {:?}, expected width {}", shape, self.config.d_model));
        }
        if shape[0] != context.mask.len() {
            return Err(dim_err!("context has {} rows but a mask of {}", shape[0], context.mask.len()));
        }
        if shape[0] > self.config.context_len {
            return Err(dim_err!("context length {} exceeds the budget {}", shape[0], self.config.context_len));
        }
        if !context.mask.iter().any(|&m| m) {
            return Err(contract_err!("decoder context has no unmasked position"));
        }
        let pos = tape.param(store, self.context_positions);
        let pos = tape.slice_rows(pos, 0, shape[0])?;
        let ctx = tape.add(context.values, pos)?;
        if context.mask.iter().all(|&m| m) {
            return Ok(ctx);
        }
        tape.gather_rows(ctx, &valid_rows(&context.mask))
    }

    /// Decoder over explicit input ids (already shifted right, starting
    /// with the pad id). `context` comes from [`TextModel::prepare_context`].
    pub fn decode_inputs(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        context: Var,
        inputs: &[u32],
        dropout: &mut Dropout<'_>,
    ) -> Result<DecoderOutput> {
        if inputs.is_empty() || inputs.len() > self.config.decoder_len {
            return Err(dim_err!(
                "decoder input of length {} does not fit the budget {}",
                inputs.len(),
                self.config.decoder_len
            ));
        }
        if tape.value(context).cols() != self.config.d_model {
            return Err(dim_err!("context shape {:?} does not have width {}", tape.shape(context), self.config.d_model));
        }
        let x = self.embed_ids(tape, store, inputs, self.decoder_positions)?;
        let causal = AttentionMask { keys: None, causal: true };
        let mut h = dropout.apply(tape, x)?;
        let mut self_attention = Vec::new();
        let mut cross_attention = Vec::new();
        for layer in &self.decoder {
            let n = layer.ln_self.forward(tape, store, h)?;
            let (a, probs) = layer.self_attn.forward(tape, store, n, n, causal)?;
            self_attention.extend(probs);
            let a = dropout.apply(tape, a)?;
            h = tape.add(h, a)?;
            let n = layer.ln_cross.forward(tape, store, h)?;
            let (c, probs) = layer.cross_attn.forward(tape, store, n, context, AttentionMask::default())?;
            cross_attention.extend(probs);
            let c = dropout.apply(tape, c)?;
            h = tape.add(h, c)?;
            let n = layer.ln_ff.forward(tape, store, h)?;
            let f = layer.ff.forward(tape, store, n)?;
            let f = dropout.apply(tape, f)?;
            h = tape.add(h, f)?;
        }
        let h = self.decoder_ln.forward(tape, store, h)?;
        let h = tape.scale(h, 1.0 / sqrt(self.config.d_model as f64))?;
        let table = tape.param(store, self.embedding);
        let logits = tape.matmul_nt(h, table)?;
        Ok(DecoderOutput { logits, self_attention, cross_attention })
    }

    /// Teacher-forced decoder pass: the input is `targets` shifted right by
    /// one with the pad id as start token; row `t` predicts `targets[t]`.
    ///
    /// Rows after the last unmasked target position only ever predict
    /// padding; they are not computed and their logits are zero.
    pub fn decoder_forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        context: &FusedDecoderInput,
        targets: &TokenSequence,
        dropout: &mut Dropout<'_>,
    ) -> Result<DecoderOutput> {
        let m = targets.len();
        if targets.mask.len() != m {
            return Err(dim_err!("target mask has {} entries for {} ids", targets.mask.len(), m));
        }
        let ctx = self.prepare_context(tape, store, context)?;
        let len = targets.mask.iter().rposition(|&b| b).map_or(1, |i| i + 1);
        let inputs = shift_right(&targets.ids);
        let mut out = self.decode_inputs(tape, store, ctx, &inputs[..len], dropout)?;
        if len < m {
            let zeros = tape.constant(Tensor::zeros(&[m - len, self.config.vocab_size]))?;
            out.logits = tape.concat_rows(&[out.logits, zeros])?;
        }
        Ok(out)
    }

    /// Mean cross-entropy of `targets` under teacher forcing, padding ignored.
    pub fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        context: &FusedDecoderInput,
        targets: &TokenSequence,
        dropout: &mut Dropout<'_>,
    ) -> Result<Var> {
        let out = self.decoder_forward(tape, store, context, targets, dropout)?;
        tape.cross_entropy(out.logits, &targets.ids, PAD_ID)
    }

    /// Every parameter owned by the text model.
    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.embedding, self.encoder_positions, self.decoder_positions, self.context_positions];
        let ln = |l: &LayerNorm| [l.gamma, l.beta];
        let mlp = |m: &Mlp| {
            [m.hidden.weight, m.output.weight].into_iter().chain(m.hidden.bias).chain(m.output.bias)
        };
        let att = |a: &MultiHeadAttention| [a.w_q.weight, a.w_k.weight, a.w_v.weight, a.w_o.weight];
        for l in &self.encoder {
            ids.extend(ln(&l.ln_attn));
            ids.extend(att(&l.self_attn));
            ids.extend(ln(&l.ln_ff));
            ids.extend(mlp(&l.ff));
        }
        ids.extend(ln(&self.encoder_ln));
        for l in &self.decoder {
            ids.extend(ln(&l.ln_self));
            ids.extend(att(&l.self_attn));
            ids.extend(ln(&l.ln_cross));
            ids.extend(att(&l.cross_attn));
            ids.extend(ln(&l.ln_ff));
            ids.extend(mlp(&l.ff));
        }
        ids.extend(ln(&self.decoder_ln));
        ids
    }
}

fn valid_rows(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// `[pad, ids[0], …, ids[len-2]]`.
pub fn shift_right(ids: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    if !ids.is_empty() {
        out.push(PAD_ID);
        out.extend_from_slice(&ids[..ids.len() - 1]);
    }
    out
}
