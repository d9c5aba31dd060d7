use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::schedule::{schedule_discrete, NoiseSchedule};
use crate::error::{Result, SculptError};
use crate::io::Vec3;
use crate::numerics::{log_sum_exp, Tensor};

/// `mu = gamma x + sqrt(gamma (1 - gamma)) eps` with `gamma = gamma(t)`.
pub fn flow_sample_continuous(
    x: &[Vec3],
    t: f64,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Vec<Vec3>> {
    let gamma = schedule.gamma(t)?;
    gaussian_around(x, gamma, rng)
}

/// Draws `N(gamma m, gamma (1 - gamma) I)` per point.
pub(crate) fn gaussian_around(m: &[Vec3], gamma: f64, rng: &mut impl Rng) -> Result<Vec<Vec3>> {
    let var = gamma * (1.0 - gamma);
    if !(var >= 0.0) {
        return Err(SculptError::numeric(format!(
            "accuracy gamma = {gamma} gives a negative flow variance"
        )));
    }
    let sd = var.sqrt();
    Ok(m.iter()
        .map(|p| {
            std::array::from_fn(|k| {
                let e: f64 = StandardNormal.sample(rng);
                gamma * p[k] + sd * e
            })
        })
        .collect())
}

/// A draw from `N(alpha (K e_a - 1), alpha K I)` for each class index `a`.
pub fn sender_sample(types: &[usize], alpha: f64, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let sd = (alpha * k as f64).sqrt();
    types
        .iter()
        .map(|&a| {
            (0..k)
                .map(|j| {
                    let e: f64 = StandardNormal.sample(rng);
                    let onehot = if j == a { 1.0 } else { 0.0 };
                    alpha * (k as f64 * onehot - 1.0) + sd * e
                })
                .collect()
        })
        .collect()
}

/// Row-wise softmax of `y`.
pub fn softmax_rows(y: &[Vec<f64>]) -> Tensor {
    let rows: Vec<Vec<f64>> = y
        .iter()
        .map(|row| {
            let lse = log_sum_exp(row);
            row.iter().map(|v| (v - lse).exp()).collect()
        })
        .collect();
    Tensor::from_rows(&rows)
}

/// `theta = softmax(y)` with `y ~ N(beta_v(t) (K e_a - 1), beta_v(t) K I)`.
pub fn flow_sample_discrete(types: &[usize], t: f64, beta1: f64, k: usize, rng: &mut impl Rng) -> Result<Tensor> {
    if let Some(&a) = types.iter().find(|&&a| a >= k) {
        return Err(SculptError::validation(format!("atom type {a} outside 0..{k}")));
    }
    let beta = schedule_discrete(t, beta1)?;
    Ok(softmax_rows(&sender_sample(types, beta, k, rng)))
}

/// `log N(y; alpha (K e_c - 1), alpha K I)` summed over the `K` components.
pub fn class_log_density(y: &[f64], class: usize, alpha: f64) -> f64 {
    let k = y.len() as f64;
    let var = alpha * k;
    let norm = -0.5 * k * (2.0 * std::f64::consts::PI * var).ln();
    let quad: f64 = y
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let m = alpha * (if j == class { k } else { 0.0 } - 1.0);
            (v - m) * (v - m)
        })
        .sum();
    norm - quad / (2.0 * var)
}

/// `log N(y; alpha(Ke_a - 1), alpha K I) - log sum_c p_c N(y; alpha(Ke_c - 1), alpha K I)`.
///
/// The class densities differ from one another only through `y_c`: the
/// normalizer and `|y + alpha|^2` are shared and cancel, so the difference
/// is evaluated as `y_a - logsumexp_c(log p_c + y_c)`, free of the large
/// cancelling constants.
pub fn type_loss_sample(y: &[f64], class: usize, probs: &[f64], alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    let terms: Vec<f64> = probs.iter().zip(y).map(|(&p, &v)| p.ln() + v).collect();
    y[class] - log_sum_exp(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_time_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mu = flow_sample_continuous(&[[1.0, -2.0, 3.0]], 0.0, &NoiseSchedule::default(), &mut rng).unwrap();
        assert_eq!(mu, vec![[0.0; 3]]);
        let th = flow_sample_discrete(&[2], 0.0, 1.5, 4, &mut rng).unwrap();
        assert!(th.data().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn reduced_form_matches_full_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let probs = [0.2f64, 0.5, 0.3];
        for alpha in [0.01, 0.7, 4.0] {
            let y = &sender_sample(&[2], alpha, 3, &mut rng)[0];
            let terms: Vec<f64> = (0..3).map(|c| probs[c].ln() + class_log_density(y, c, alpha)).collect();
            let full = class_log_density(y, 2, alpha) - log_sum_exp(&terms);
            assert!((type_loss_sample(y, 2, &probs, alpha) - full).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_receiver_gives_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = &sender_sample(&[1], 0.3, 3, &mut rng)[0];
        assert_eq!(type_loss_sample(y, 1, &[0.0, 1.0, 0.0], 0.3), 0.0);
    }
}
