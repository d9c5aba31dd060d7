use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};
use crate::geometry::{LocalThresholds, RbfConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub heads: usize,
    pub bab_layers: usize,
    pub global_layers: usize,
    pub local_layers: usize,
    /// Edges whose head-averaged attention does not exceed `tau` are pruned
    /// between global layers.
    pub tau: f64,
    /// Virtual atoms per pocket: `ceil(N_p / cluster_divisor)`.
    pub cluster_divisor: usize,
    pub cluster_seed: u64,
    pub cluster_iters: usize,
    /// Neighbours per node in the surface/ligand graph.
    pub knn_k: usize,
    pub time_dim: usize,
    pub rbf: RbfConfig,
    pub local_thresholds: LocalThresholds,
    /// Zero-initialize every coordinate head so the untrained network leaves
    /// positions untouched.
    pub identity_init: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            hidden: 128,
            heads: 16,
            bab_layers: 2,
            global_layers: 2,
            local_layers: 9,
            tau: 0.05,
            cluster_divisor: 8,
            cluster_seed: 0,
            cluster_iters: 50,
            knn_k: 8,
            time_dim: 16,
            rbf: RbfConfig::default(),
            local_thresholds: LocalThresholds::default(),
            identity_init: true,
        }
    }
}

impl EncoderConfig {
    /// A narrow, shallow network for tests and quick experiments.
    pub fn toy() -> Self {
        EncoderConfig {
            hidden: 8,
            heads: 2,
            bab_layers: 1,
            global_layers: 2,
            local_layers: 2,
            rbf: RbfConfig::evenly_spaced(0.0, 10.0, 6, 1.0).expect("toy basis"),
            time_dim: 4,
            ..EncoderConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(SculptError::config(format!(
                "hidden width {} must be a positive multiple of the head count {}",
                self.hidden, self.heads
            )));
        }
        if self.bab_layers == 0 || self.global_layers == 0 || self.local_layers == 0 {
            return Err(SculptError::config("every layer count must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SculptError::config("tau must lie in (0, 1)"));
        }
        if self.cluster_divisor == 0 {
            return Err(SculptError::config("cluster_divisor must be at least 1"));
        }
        if self.knn_k == 0 {
            return Err(SculptError::config("knn_k must be at least 1"));
        }
        if self.time_dim < 4 || self.time_dim % 2 != 0 {
            return Err(SculptError::config("time_dim must be an even number >= 4"));
        }
        self.rbf.validate()?;
        self.local_thresholds.validate()
    }

    pub fn clusters_for(&self, pocket_atoms: usize) -> usize {
        pocket_atoms.div_ceil(self.cluster_divisor).max(1)
    }
}
