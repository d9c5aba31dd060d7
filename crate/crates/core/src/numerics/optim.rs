use serde::{Deserialize, Serialize};

use super::params::ParameterStore;
use crate::error::{Result, SculptError};

/// Adam and EMA settings together with the batch size used by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub ema_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Rescale the gradient to at most this global L2 norm before the
    /// update; `None` leaves it untouched.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.005,
            beta1: 0.95,
            beta2: 0.999,
            epsilon: 1e-8,
            ema_decay: 0.999,
            batch_size: 32,
            epochs: 26,
            clip_norm: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(SculptError::config("learning_rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(SculptError::config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(SculptError::config("epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(SculptError::config("ema_decay must lie in [0, 1)"));
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return Err(SculptError::config("clip_norm must be positive"));
        }
        if self.batch_size == 0 {
            return Err(SculptError::config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// One bias-corrected Adam update using the accumulated grad slots, which
/// are zeroed afterwards. `step` counts from 1.
///
/// Nothing is modified if any gradient is non-finite.
pub fn adam_step(store: &mut ParameterStore, config: &OptimizerConfig, step: u64) -> Result<()> {
    if step == 0 {
        return Err(SculptError::config("Adam step counter starts at 1"));
    }
    if let Some((name, _)) = store.iter().find(|(_, e)| !e.grad.is_finite()) {
        return Err(SculptError::numeric(format!(
            "non-finite gradient in {name}; step refused"
        )));
    }
    if let Some(limit) = config.clip_norm {
        let norm = store
            .iter()
            .map(|(_, e)| e.grad.data().iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if norm > limit {
            let s = limit / norm;
            for (_, e) in store.iter_mut() {
                e.grad.data_mut().iter_mut().for_each(|g| *g *= s);
            }
        }
    }
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(step as i32);
    let c2 = 1.0 - b2.powi(step as i32);
    for (_, e) in store.iter_mut() {
        let g = e.grad.data();
        let m = e.m.data_mut();
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
        }
        let v = e.v.data_mut();
        for (vi, gi) in v.iter_mut().zip(g) {
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
        }
        let (m, v) = (e.m.data(), e.v.data());
        for (i, p) in e.value.data_mut().iter_mut().enumerate() {
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        e.grad.fill(0.0);
    }
    Ok(())
}

/// `shadow <- decay * shadow + (1 - decay) * value` for every tensor.
pub fn ema_update(store: &mut ParameterStore, decay: f64) {
    for (_, e) in store.iter_mut() {
        for (s, p) in e.ema.data_mut().iter_mut().zip(e.value.data()) {
            *s = decay * *s + (1.0 - decay) * p;
        }
    }
}

/// Softmax of a finite logit vector, stable for large magnitudes.
pub fn softmax_stable(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(SculptError::validation("softmax of an empty vector"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(SculptError::numeric("softmax input contains NaN or infinity"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn scalar_store(value: f64, grad: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("p", Tensor::new(vec![1], vec![value]).unwrap()).unwrap();
        s.get_mut("p").unwrap().grad.data_mut()[0] = grad;
        s
    }

    fn value(s: &ParameterStore) -> f64 {
        s.get("p").unwrap().value.data()[0]
    }

    #[test]
    fn clipping_rescales_the_global_norm() {
        let mut s = ParameterStore::new();
        s.insert("a", Tensor::new(vec![1], vec![0.0]).unwrap()).unwrap();
        s.insert("b", Tensor::new(vec![1], vec![0.0]).unwrap()).unwrap();
        s.get_mut("a").unwrap().grad.data_mut()[0] = 3.0;
        s.get_mut("b").unwrap().grad.data_mut()[0] = 4.0;
        let config = OptimizerConfig {
            clip_norm: Some(1.0),
            ..OptimizerConfig::default()
        };
        adam_step(&mut s, &config, 1).unwrap();
        // First moments hold the clipped gradient (0.6, 0.8) scaled by 1 - beta1.
        assert!((s.get("a").unwrap().m.data()[0] - 0.05 * 0.6).abs() < 1e-15);
        assert!((s.get("b").unwrap().m.data()[0] - 0.05 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = scalar_store(0.0, 1.0);
        adam_step(&mut s, &OptimizerConfig::default(), 1).unwrap();
        assert!((value(&s) + 0.005).abs() < 1e-6);
        assert_eq!(s.get("p").unwrap().grad.data()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let mut s = scalar_store(0.25, 0.0);
        adam_step(&mut s, &OptimizerConfig::default(), 1).unwrap();
        assert_eq!(value(&s), 0.25);
    }

    #[test]
    fn two_steps_follow_recurrence() {
        let cfg = OptimizerConfig::default();
        let g = 0.3;
        let mut s = scalar_store(1.0, g);
        adam_step(&mut s, &cfg, 1).unwrap();
        s.get_mut("p").unwrap().grad.data_mut()[0] = g;
        adam_step(&mut s, &cfg, 2).unwrap();

        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
        let mut p = 1.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((value(&s) - p).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_refused() {
        let mut s = scalar_store(1.0, f64::NAN);
        let err = adam_step(&mut s, &OptimizerConfig::default(), 1).unwrap_err();
        assert!(err.to_string().contains('p'));
        assert_eq!(value(&s), 1.0);
    }

    #[test]
    fn ema_substitution_and_geometric_series() {
        let mut s = scalar_store(1.0, 0.0);
        s.get_mut("p").unwrap().ema.data_mut()[0] = 0.0;
        ema_update(&mut s, 0.999);
        assert!((s.get("p").unwrap().ema.data()[0] - 0.001).abs() < 1e-15);

        let mut s = scalar_store(2.0, 0.0);
        s.get_mut("p").unwrap().ema.data_mut()[0] = 0.0;
        for _ in 0..100 {
            ema_update(&mut s, 0.999);
        }
        let expected = 2.0 * (1.0 - 0.999f64.powi(100));
        assert!((s.get("p").unwrap().ema.data()[0] - expected).abs() < 1e-12);

        let mut s = scalar_store(0.7, 0.0);
        ema_update(&mut s, 0.999);
        assert_eq!(s.get("p").unwrap().ema.data()[0], 0.7);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax_stable(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax_stable(&[1000.0, 0.0]).unwrap();
        assert!(p[0] > 1.0 - 1e-12 && p[1] >= 0.0 && p[1] < 1e-300);
        let p = softmax_stable(&[1.0, 2.0, 3.0]).unwrap();
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for (i, v) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((p[i] - v.exp() / z).abs() < 1e-15);
        }
        assert!(softmax_stable(&[f64::NAN]).is_err());
        assert!(softmax_stable(&[f64::INFINITY, 0.0]).is_err());
    }
}
