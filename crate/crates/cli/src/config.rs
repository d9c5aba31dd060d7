use std::path::{Path, PathBuf};

use sculpt::bfn::{LossOptions, NoiseSchedule, SamplerOptions};
use sculpt::encoder::EncoderConfig;
use sculpt::geometry::{RadiiTable, SesConfig, POCKET_CUTOFF};
use sculpt::io::AtomVocabulary;
use sculpt::numerics::OptimizerConfig;
use sculpt::{Result, SculptError};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides every other seed source.
pub const SEED_ENV: &str = "SCULPT_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingOptions {
    /// Stop after this many optimizer steps instead of `epochs` full passes.
    pub max_steps: Option<u64>,
    pub checkpoint_every: u64,
    /// Independent loss draws averaged per batch item.
    pub draws_per_item: usize,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions {
            max_steps: None,
            checkpoint_every: 100,
            draws_per_item: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckOptions {
    pub encoder: EncoderConfig,
    pub ligand_atoms: usize,
    pub pocket_atoms: usize,
    pub step: f64,
    pub tolerance: f64,
    pub max_entries_per_tensor: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            encoder: EncoderConfig {
                identity_init: false,
                ..EncoderConfig::toy()
            },
            ligand_atoms: 3,
            pocket_atoms: 5,
            step: 1e-6,
            tolerance: 1e-4,
            max_entries_per_tensor: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a run depends on. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub schedule: NoiseSchedule,
    pub optimizer: OptimizerConfig,
    pub encoder: EncoderConfig,
    /// Element symbols; the catch-all class is appended automatically.
    pub vocabulary: Vec<String>,
    pub loss: LossOptions,
    pub sampler: SamplerOptions,
    pub training: TrainingOptions,
    pub surface: SesConfig,
    pub pocket_cutoff: f64,
    pub radii: RadiiTable,
    pub gradcheck: GradCheckOptions,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            schedule: NoiseSchedule::default(),
            optimizer: OptimizerConfig::default(),
            encoder: EncoderConfig::default(),
            vocabulary: ["C", "N", "O", "F", "P", "S", "Cl", "Br"].map(String::from).to_vec(),
            loss: LossOptions::default(),
            sampler: SamplerOptions::default(),
            training: TrainingOptions::default(),
            surface: SesConfig::default(),
            pocket_cutoff: POCKET_CUTOFF,
            radii: RadiiTable::default(),
            gradcheck: GradCheckOptions::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| SculptError::Parse {
            file: origin.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SculptError::io(path, e))?;
        RunConfig::from_json(&text, path)
    }

    /// `path` when given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.optimizer.validate()?;
        self.encoder.validate()?;
        self.gradcheck.encoder.validate()?;
        self.vocab()?;
        if self.sampler.steps == 0 {
            return Err(SculptError::config("sampler.steps must be at least 1"));
        }
        if self.training.draws_per_item == 0 {
            return Err(SculptError::config("training.draws_per_item must be at least 1"));
        }
        if self.training.checkpoint_every == 0 {
            return Err(SculptError::config("training.checkpoint_every must be at least 1"));
        }
        if !(self.pocket_cutoff > 0.0) {
            return Err(SculptError::config("pocket_cutoff must be positive"));
        }
        let g = &self.gradcheck;
        if g.ligand_atoms == 0 || g.pocket_atoms == 0 || !(g.step > 0.0) || !(g.tolerance > 0.0) {
            return Err(SculptError::config("gradcheck needs atoms, a positive step and a positive tolerance"));
        }
        Ok(())
    }

    pub fn vocab(&self) -> Result<AtomVocabulary> {
        AtomVocabulary::new(self.vocabulary.iter().cloned())
    }

    /// Seed precedence: `SCULPT_SEED`, then the command line, then the file.
    pub fn resolve_seed(&mut self, cli: Option<u64>) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| SculptError::config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        } else if let Some(s) = cli {
            self.seed = s;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let back = RunConfig::from_json(&c.to_json(), Path::new("c.json")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_files_take_defaults() {
        let c = RunConfig::from_json(r#"{"seed": 4, "schedule": {"steps": 100}}"#, Path::new("c.json")).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.schedule.steps, 100);
        assert_eq!(c.schedule.sigma1, 0.03);
        assert_eq!(c.optimizer.batch_size, 32);
        assert_eq!(c.encoder.local_layers, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{"sede": 4}"#, Path::new("c.json")).unwrap_err();
        assert!(err.is_input_error());
    }
}
