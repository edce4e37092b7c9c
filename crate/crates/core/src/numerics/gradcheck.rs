use alloc::string::String;
use alloc::vec::Vec;

use super::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so gradients that are
    /// zero up to rounding compare on an absolute scale.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-4, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }
}

fn evaluate<F>(f: &mut F, store: &ParamStore) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::no_grad();
    let out = f(&mut tape, store).map_err(|e| match e {
        Error::NonFinite(what) => Error::Evaluation(alloc::format!("non-finite value in {what} at a probe point")),
        other => other,
    })?;
    let v = tape.value(out).item()?;
    if !v.is_finite() {
        return Err(Error::Evaluation(String::from("objective is not finite at a probe point")));
    }
    Ok(v)
}

/// Compares the tape's gradient of `f` against central finite differences
/// for every element of every listed parameter.
///
/// `f` must build a scalar on the tape it is given and be a deterministic
/// function of the parameter values.
pub fn grad_check<F>(
    store: &mut ParamStore,
    params: &[ParamId],
    options: GradCheckOptions,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, store)?;
    tape.backward(loss)?;
    let analytic: Vec<_> = tape.param_grads();
    drop(tape);

    let h = options.step;
    let mut checks = Vec::with_capacity(params.len());
    for &id in params {
        let n = store.value(id).numel();
        let grad = analytic.iter().find(|(pid, _)| *pid == id).map(|(_, g)| g.data().to_vec());
        let grad = grad.unwrap_or_else(|| alloc::vec![0.0; n]);
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let original = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = original + h;
            let plus = evaluate(&mut f, store);
            store.value_mut(id).data_mut()[i] = original - h;
            let minus = evaluate(&mut f, store);
            store.value_mut(id).data_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * h);
            let abs = (numeric - grad[i]).abs();
            let rel = abs / numeric.abs().max(grad[i].abs()).max(options.floor);
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(rel);
        }
        checks.push(ParamCheck {
            name: store.get(id).name.clone(),
            elements: n,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            passed: max_rel <= options.tolerance,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradCheckReport { params: checks, passed })
}
