//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::params::ParameterStore;
use super::tape::{Tape, Var};
use crate::error::{Result, SculptError};

#[derive(Debug, Clone)]
pub struct FdOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            step: 1e-6,
            tolerance: 1e-4,
            max_entries_per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorReport {
    pub name: String,
    pub checked: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub worst_entry: usize,
    pub checked: usize,
    pub tolerance: f64,
    /// Largest `|g_ad - g_fd|` over the checked entries.
    pub max_abs_error: f64,
    /// Largest `|g_ad|` over the checked entries.
    pub max_abs_gradient: f64,
    pub per_tensor: Vec<TensorReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }

    /// `max |g_ad - g_fd| / max |g_ad|`, insensitive to entries whose
    /// gradient is comparable to the difference-quotient roundoff.
    pub fn normwise_error(&self) -> f64 {
        self.max_abs_error / self.max_abs_gradient.max(f64::MIN_POSITIVE)
    }
}

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of `loss` against central differences
/// for every (or a sampled subset of every) parameter entry.
///
/// `loss` must be deterministic: it is evaluated twice at the unperturbed
/// point and the check aborts if the two values differ.
pub fn finite_diff_check<F>(store: &ParameterStore, loss: F, options: &FdOptions) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore, &mut Tape) -> Result<Var>,
{
    let eval = |s: &ParameterStore| -> Result<f64> {
        let mut tape = Tape::new();
        let l = loss(s, &mut tape)?;
        Ok(tape.scalar(l))
    };

    let mut tape = Tape::new();
    let l = loss(store, &mut tape)?;
    let base = tape.scalar(l);
    let grads = store.dense_grads(&tape.backward(l)?);
    let again = eval(store)?;
    if base.to_bits() != again.to_bits() {
        return Err(SculptError::GradCheck(format!(
            "loss is not deterministic ({base} vs {again}); freeze every random source"
        )));
    }
    if !base.is_finite() {
        return Err(SculptError::numeric("loss is not finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut work = store.clone();
    let mut per_tensor = Vec::with_capacity(store.len());
    let mut worst = (0.0, String::new(), 0usize);
    let mut checked = 0;
    let (mut max_abs_error, mut max_abs_gradient) = (0.0f64, 0.0f64);
    for index in 0..store.len() {
        let n = store.value_at(index).len();
        let entries: Vec<usize> = match options.max_entries_per_tensor {
            Some(k) if k < n => {
                let mut e = sample(&mut rng, n, k).into_vec();
                e.sort_unstable();
                e
            }
            _ => (0..n).collect(),
        };
        let mut tensor_max = 0.0f64;
        for &i in &entries {
            let original = store.value_at(index).data()[i];
            work.value_at_mut(index).data_mut()[i] = original + options.step;
            let plus = eval(&work)?;
            work.value_at_mut(index).data_mut()[i] = original - options.step;
            let minus = eval(&work)?;
            work.value_at_mut(index).data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * options.step);
            let analytic = grads[index].data()[i];
            let err = relative_error(analytic, numeric);
            max_abs_error = max_abs_error.max((analytic - numeric).abs());
            max_abs_gradient = max_abs_gradient.max(analytic.abs());
            if err > tensor_max || err.is_nan() {
                tensor_max = err;
            }
            if err > worst.0 || err.is_nan() {
                worst = (err, store.name_at(index).to_string(), i);
            }
        }
        checked += entries.len();
        per_tensor.push(TensorReport {
            name: store.name_at(index).to_string(),
            checked: entries.len(),
            max_relative_error: tensor_max,
        });
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        worst_entry: worst.2,
        checked,
        tolerance: options.tolerance,
        max_abs_error,
        max_abs_gradient,
        per_tensor,
    })
}
