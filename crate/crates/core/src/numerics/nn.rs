use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Initializer, ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `x · W + b` with `W: in×out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
    ) -> Result<Self> {
        let weight = store.add(&format!("{name}.weight"), init.linear_weight(fan_in, fan_out))?;
        let bias = if bias {
            Some(store.add(&format!("{name}.bias"), Tensor::zeros(&[fan_out]))?)
        } else {
            None
        };
        Ok(Self { weight, bias, fan_in, fan_out })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let y = tape.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Two linear layers with a ReLU between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        input: usize,
        hidden: usize,
        output: usize,
    ) -> Result<Self> {
        Ok(Self {
            hidden: Linear::new(store, init, &format!("{name}.fc1"), input, hidden, true)?,
            output: Linear::new(store, init, &format!("{name}.fc2"), hidden, output, true)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, store, x)?;
        let h = tape.relu(h)?;
        self.output.forward(tape, store, h)
    }

    /// Sets the weights so the block computes `relu(x) - relu(-x) = x`.
    /// Needs `hidden == 2 * input` and `input == output`.
    pub fn set_identity(&self, store: &mut ParamStore) -> Result<()> {
        let d = self.hidden.fan_in;
        if self.hidden.fan_out != 2 * d || self.output.fan_out != d {
            return Err(crate::error::contract_err!(
                "identity MLP needs widths d -> 2d -> d, got {} -> {} -> {}",
                d,
                self.hidden.fan_out,
                self.output.fan_out
            ));
        }
        let mut w1 = Tensor::zeros(&[d, 2 * d]);
        let mut w2 = Tensor::zeros(&[2 * d, d]);
        for i in 0..d {
            w1.row_mut(i)[i] = 1.0;
            w1.row_mut(i)[d + i] = -1.0;
            w2.row_mut(i)[i] = 1.0;
            w2.row_mut(d + i)[i] = -1.0;
        }
        store.set_value(self.hidden.weight, w1)?;
        store.set_value(self.output.weight, w2)?;
        for b in [self.hidden.bias, self.output.bias].into_iter().flatten() {
            let shape = store.value(b).shape().to_vec();
            store.set_value(b, Tensor::zeros(&shape))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.add(&format!("{name}.gamma"), Tensor::full(&[dim], 1.0))?,
            beta: store.add(&format!("{name}.beta"), Tensor::zeros(&[dim]))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gamma);
        let b = tape.param(store, self.beta);
        tape.layer_norm(x, g, b, LAYER_NORM_EPS)
    }
}

/// Inverted dropout. A `None` rng or zero rate makes it the identity.
#[derive(Debug)]
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl Dropout<'_> {
    pub fn off() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let rate = self.rate;
        match self.rng.as_deref_mut() {
            Some(rng) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                let n = tape.value(x).numel();
                let mask: Vec<f64> =
                    (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
                tape.mul_const(x, mask)
            }
            _ => Ok(x),
        }
    }
}
