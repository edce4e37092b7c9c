//! Cross-token attention from graph nodes onto SMILES tokens, mean pooling
//! and assembly of the decoder context.
//!
//! ```text
//! Q = Z·W_Q   K = S*·W_K   V = S*·W_V
//! H  = softmax(Q·Kᵀ / sqrt(d_k)) · V
//! H' = LayerNorm(H + Z)
//! O_G = MLP(H')
//! I  = [P, mean(O_G), O_G, S*]
//! ```

use alloc::format;
use alloc::vec::Vec;

use crate::error::{contract_err, dim_err, Error, Result};
use crate::graph_encoder::GraphEmbedding;
use crate::numerics::{AttentionMask, Initializer, LayerNorm, Mlp, ParamId, ParamStore, Tape, Var};
use crate::text::{attend_heads, MultiHeadAttention};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossTokenAttentionConfig {
    /// Width `d` of both the graph and the SMILES embeddings.
    pub d_model: usize,
    /// Query/key width `d_k`.
    pub d_k: usize,
    /// Attention heads; `d_k` and `d_model` must divide evenly.
    pub heads: usize,
    /// Adds a residual self-attention layer over the graph rows after the MLP.
    pub post_self_attention: bool,
}

impl CrossTokenAttentionConfig {
    /// Single head with `d_k = d_v = d`.
    pub fn new(d_model: usize) -> Self {
        Self { d_model, d_k: d_model, heads: 1, post_self_attention: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostSelfAttention {
    pub ln: LayerNorm,
    pub attn: MultiHeadAttention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossTokenAttention {
    pub config: CrossTokenAttentionConfig,
    /// `d × d_k`
    pub w_q: ParamId,
    /// `d × d_k`
    pub w_k: ParamId,
    /// `d × d`
    pub w_v: ParamId,
    pub ln: LayerNorm,
    /// `d -> 2d -> d`
    pub mlp: Mlp,
    pub post: Option<PostSelfAttention>,
}

/// Block output with the attention matrices of the cross-token step.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTokenOutput {
    /// `O_G`, `l×d`, graph pad rows exactly zero.
    pub output: Var,
    /// `H` before the residual, `l×d`.
    pub attended: Var,
    /// One `l×|n|` probability matrix per head.
    pub attention: Vec<Var>,
}

impl CrossTokenAttention {
    pub fn new(store: &mut ParamStore, init: &mut Initializer, config: CrossTokenAttentionConfig) -> Result<Self> {
        let (d, dk, h) = (config.d_model, config.d_k, config.heads);
        if d == 0 || dk == 0 || h == 0 || dk % h != 0 || d % h != 0 {
            return Err(Error::Config(format!("cross-token attention: d={d}, d_k={dk} do not split into {h} heads")));
        }
        let w_q = store.add("fusion.w_q", init.linear_weight(d, dk))?;
        let w_k = store.add("fusion.w_k", init.linear_weight(d, dk))?;
        let w_v = store.add("fusion.w_v", init.linear_weight(d, d))?;
        let ln = LayerNorm::new(store, "fusion.ln", d)?;
        let mlp = Mlp::new(store, init, "fusion.mlp", d, 2 * d, d)?;
        let post = if config.post_self_attention {
            Some(PostSelfAttention {
                ln: LayerNorm::new(store, "fusion.post.ln", d)?,
                attn: MultiHeadAttention::new(store, init, "fusion.post.attn", d, h)?,
            })
        } else {
            None
        };
        Ok(Self { config, w_q, w_k, w_v, ln, mlp, post })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphEmbedding,
        smiles: Var,
        smiles_mask: &[bool],
    ) -> Result<CrossTokenOutput> {
        let d = self.config.d_model;
        let z = graph.values;
        if tape.value(z).cols() != d || tape.value(smiles).cols() != d {
            return Err(dim_err!(
                "cross-token attention width {}: graph {:?}, SMILES {:?}",
                d,
                tape.shape(z),
                tape.shape(smiles)
            ));
        }
        if tape.value(z).rows() != graph.mask.len() {
            return Err(dim_err!("graph has {} rows but a mask of {}", tape.value(z).rows(), graph.mask.len()));
        }
        if tape.value(smiles).rows() != smiles_mask.len() {
            return Err(dim_err!(
                "SMILES has {} rows but a mask of {}",
                tape.value(smiles).rows(),
                smiles_mask.len()
            ));
        }
        if !smiles_mask.iter().any(|&m| m) {
            return Err(contract_err!("cross-token attention with every SMILES key masked"));
        }
        let wq = tape.param(store, self.w_q);
        let wk = tape.param(store, self.w_k);
        let wv = tape.param(store, self.w_v);
        let q = tape.matmul(z, wq)?;
        let k = tape.matmul(smiles, wk)?;
        let v = tape.matmul(smiles, wv)?;
        let mask = AttentionMask { keys: Some(smiles_mask), causal: false };
        let (attended, attention) = attend_heads(tape, q, k, v, self.config.heads, mask)?;
        let skip = tape.add(attended, z)?;
        let normed = self.ln.forward(tape, store, skip)?;
        let mut out = self.mlp.forward(tape, store, normed)?;
        if let Some(post) = &self.post {
            let n = post.ln.forward(tape, store, out)?;
            let keys = AttentionMask { keys: Some(&graph.mask), causal: false };
            let (a, _) = post.attn.forward(tape, store, n, n, keys)?;
            out = tape.add(out, a)?;
        }
        let output = zero_masked_rows(tape, out, &graph.mask)?;
        Ok(CrossTokenOutput { output, attended, attention })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = alloc::vec![self.w_q, self.w_k, self.w_v, self.ln.gamma, self.ln.beta];
        for lin in [self.mlp.hidden, self.mlp.output] {
            ids.push(lin.weight);
            ids.extend(lin.bias);
        }
        if let Some(p) = &self.post {
            ids.extend([p.ln.gamma, p.ln.beta]);
            ids.extend([p.attn.w_q.weight, p.attn.w_k.weight, p.attn.w_v.weight, p.attn.w_o.weight]);
        }
        ids
    }
}

/// Multiplies masked-out rows by zero.
pub fn zero_masked_rows(tape: &mut Tape, x: Var, mask: &[bool]) -> Result<Var> {
    if mask.iter().all(|&m| m) {
        return Ok(x);
    }
    let factors: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    tape.scale_rows(x, &factors)
}

/// Mean of the rows whose mask bit is set, as `1×d`.
pub fn mean_pool(tape: &mut Tape, x: Var, mask: &[bool]) -> Result<Var> {
    if tape.value(x).rows() != mask.len() {
        return Err(dim_err!("mean_pool: {} rows but a mask of {}", tape.value(x).rows(), mask.len()));
    }
    let rows: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if rows.is_empty() {
        return Err(contract_err!("mean_pool over an empty mask"));
    }
    tape.mean_rows(x, &rows)
}

/// A block of rows and its validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedRows {
    pub values: Var,
    pub mask: Vec<bool>,
}

/// Offset and length of one segment of the decoder context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

/// Where each part of `[P, O_Gpool, O_G, S*]` sits; absent parts are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextLayout {
    pub prompt: Segment,
    pub pooled: Option<Segment>,
    pub graph: Option<Segment>,
    pub smiles: Option<Segment>,
    pub total: usize,
}

/// Decoder context: concatenated rows, their mask and the segment layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDecoderInput {
    pub values: Var,
    pub mask: Vec<bool>,
    pub layout: ContextLayout,
}

/// Concatenates `[P, O_Gpool, O_G, S*]` in that order, skipping absent
/// segments. The pooled vector always has a true mask bit.
pub fn assemble_decoder_input(
    tape: &mut Tape,
    prompt: &MaskedRows,
    pooled: Option<Var>,
    graph: Option<&MaskedRows>,
    smiles: Option<&MaskedRows>,
) -> Result<FusedDecoderInput> {
    let d = tape.value(prompt.values).cols();
    let mut parts = Vec::new();
    let mut mask = Vec::new();
    let mut offset = 0;
    let mut push = |tape: &Tape, name: &str, values: Var, m: &[bool]| -> Result<Segment> {
        let shape = tape.shape(values);
        if shape.len() != 2 || shape[1] != d {
            return Err(dim_err!("decoder context: {} has shape {:?}, expected width {}", name, shape, d));
        }
        if shape[0] != m.len() {
            return Err(dim_err!("decoder context: {} has {} rows but a mask of {}", name, shape[0], m.len()));
        }
        let seg = Segment { offset, len: m.len() };
        offset += m.len();
        parts.push(values);
        mask.extend_from_slice(m);
        Ok(seg)
    };
    let prompt_seg = push(tape, "prompt", prompt.values, &prompt.mask)?;
    let pooled = pooled.map(|p| push(tape, "pooled graph", p, &[true])).transpose()?;
    let graph = graph.map(|g| push(tape, "graph", g.values, &g.mask)).transpose()?;
    let smiles = smiles.map(|s| push(tape, "SMILES", s.values, &s.mask)).transpose()?;
    let total = offset;
    let values = if parts.len() == 1 { parts[0] } else { tape.concat_rows(&parts)? };
    Ok(FusedDecoderInput {
        values,
        mask,
        layout: ContextLayout { prompt: prompt_seg, pooled, graph, smiles, total },
    })
}
