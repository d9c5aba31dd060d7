use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};

/// How the continuous accuracy schedule is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleForm {
    /// `gamma = 1 - sigma1^(2t)`, `beta = sigma1^(-2t) - 1`; matches the
    /// coordinate loss weight.
    #[default]
    Consistent,
    /// `beta = sigma1^(-2) * t - 1`, `gamma = beta / (1 - beta)`, kept only for
    /// comparison. It leaves `[0, 1]` and breaks the flow distribution.
    Verbatim,
}

/// Accuracy schedules for coordinates (continuous) and atom types (discrete).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub sigma1: f64,
    pub beta1: f64,
    /// Number of discrete time steps used by the loss.
    pub steps: usize,
    pub form: ScheduleForm,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule {
            sigma1: 0.03,
            beta1: 1.5,
            steps: 1000,
            form: ScheduleForm::Consistent,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(SculptError::validation(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// `(beta_x(t), gamma(t))` with `gamma = 1 - sigma1^(2t)` and
/// `beta_x = sigma1^(-2t) - 1`.
pub fn schedule_continuous(t: f64, sigma1: f64) -> Result<(f64, f64)> {
    check_time(t)?;
    let s = sigma1.powf(2.0 * t);
    Ok((1.0 / s - 1.0, 1.0 - s))
}

/// `beta_v(t) = t^2 beta1`.
pub fn schedule_discrete(t: f64, beta1: f64) -> Result<f64> {
    check_time(t)?;
    Ok(t * t * beta1)
}

/// Per-step type accuracy `alpha_i = beta1 (2i - 1) / n^2`, `1 <= i <= n`.
pub fn discrete_alpha(i: usize, n: usize, beta1: f64) -> Result<f64> {
    if i == 0 || i > n {
        return Err(SculptError::validation(format!("step {i} outside 1..={n}")));
    }
    let n = n as f64;
    Ok(beta1 * (2.0 * i as f64 - 1.0) / (n * n))
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma1 < 1.0) {
            return Err(SculptError::config("sigma1 must lie in (0, 1)"));
        }
        if !(self.beta1 > 0.0 && self.beta1.is_finite()) {
            return Err(SculptError::config("beta1 must be positive"));
        }
        if self.steps == 0 {
            return Err(SculptError::config("the schedule needs at least one step"));
        }
        Ok(())
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        match self.form {
            ScheduleForm::Consistent => Ok(schedule_continuous(t, self.sigma1)?.1),
            ScheduleForm::Verbatim => {
                check_time(t)?;
                let beta = t / (self.sigma1 * self.sigma1) - 1.0;
                Ok(beta / (1.0 - beta))
            }
        }
    }

    pub fn beta_v(&self, t: f64) -> Result<f64> {
        schedule_discrete(t, self.beta1)
    }

    pub fn alpha(&self, i: usize, n: usize) -> Result<f64> {
        discrete_alpha(i, n, self.beta1)
    }

    /// `n (1 - sigma1^(2/n))^2 / (2 sigma1^(2i/n))`.
    pub fn coordinate_weight(&self, i: usize, n: usize) -> Result<f64> {
        if i == 0 || i > n {
            return Err(SculptError::validation(format!("step {i} outside 1..={n}")));
        }
        let nf = n as f64;
        let a = 1.0 - self.sigma1.powf(2.0 / nf);
        Ok(nf * a * a / (2.0 * self.sigma1.powf(2.0 * i as f64 / nf)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_endpoints() {
        assert_eq!(schedule_continuous(0.0, 0.03).unwrap(), (0.0, 0.0));
        let (_, g) = schedule_continuous(1.0, 0.03).unwrap();
        assert!((g - 0.9991).abs() < 1e-12);
        let (b, g) = schedule_continuous(0.5, 0.03).unwrap();
        assert!((g - 0.97).abs() < 1e-12);
        assert!((b / (1.0 + b) - g).abs() < 1e-12);
        assert!(schedule_continuous(1.1, 0.03).is_err());
    }

    #[test]
    fn discrete_values() {
        assert_eq!(schedule_discrete(1.0, 1.5).unwrap(), 1.5);
        assert!((discrete_alpha(1, 1000, 1.5).unwrap() - 1.5e-6).abs() < 1e-21);
        assert!(discrete_alpha(0, 10, 1.5).is_err());
        assert!(discrete_alpha(11, 10, 1.5).is_err());
    }

    #[test]
    fn alphas_telescope() {
        for n in [1usize, 10, 1000] {
            let mut acc = 0.0;
            for m in 1..=n {
                acc += discrete_alpha(m, n, 1.5).unwrap();
                let expected = schedule_discrete(m as f64 / n as f64, 1.5).unwrap();
                assert!((acc - expected).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn loss_weight_single_step() {
        let s = NoiseSchedule::default();
        let w = s.coordinate_weight(1, 1).unwrap();
        let expected = (1.0f64 - 0.0009).powi(2) / (2.0 * 0.0009);
        assert!(((w - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn verbatim_form_leaves_unit_interval() {
        let s = NoiseSchedule {
            form: ScheduleForm::Verbatim,
            ..NoiseSchedule::default()
        };
        let g = s.gamma(0.0).unwrap();
        assert!(g * (1.0 - g) < 0.0);
    }
}
