use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};
use crate::numerics::RbfBasis;

/// Gaussian radial basis over distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub centers: Vec<f64>,
    pub width: f64,
}

impl Default for RbfConfig {
    /// 16 centers evenly spaced on [0, 10] Å with width 0.3125 Å.
    fn default() -> Self {
        RbfConfig::evenly_spaced(0.0, 10.0, 16, 0.3125).expect("default basis")
    }
}

impl RbfConfig {
    pub fn new(centers: Vec<f64>, width: f64) -> Result<Self> {
        let cfg = RbfConfig { centers, width };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `count` centers from `lo` to `hi` inclusive.
    pub fn evenly_spaced(lo: f64, hi: f64, count: usize, width: f64) -> Result<Self> {
        let centers = match count {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..count)
                .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
                .collect(),
        };
        RbfConfig::new(centers, width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(SculptError::config("RBF needs at least one center"));
        }
        if !self.centers.iter().all(|c| c.is_finite())
            || self.centers.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SculptError::config("RBF centers must be finite and strictly increasing"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(SculptError::config("RBF width must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn basis(&self) -> RbfBasis {
        RbfBasis {
            centers: self.centers.clone(),
            width: self.width,
        }
    }
}

/// Component `k` is `exp(-(d - c_k)^2 / (2 w^2))`.
pub fn rbf_expand(distance: f64, config: &RbfConfig) -> Result<Vec<f64>> {
    if !(distance >= 0.0) {
        return Err(SculptError::validation(format!(
            "RBF distance must be non-negative, got {distance}"
        )));
    }
    let inv = 1.0 / (2.0 * config.width * config.width);
    Ok(config
        .centers
        .iter()
        .map(|&c| {
            let z = distance - c;
            (-z * z * inv).exp()
        })
        .collect())
}
