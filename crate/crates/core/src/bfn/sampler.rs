use rand::Rng;
use serde::{Deserialize, Serialize};

use super::flow::{gaussian_around, softmax_rows};
use super::schedule::NoiseSchedule;
use crate::encoder::{sca_forward, Conditioning, EncoderConfig, OutputNetwork};
use crate::error::{Result, SculptError};
use crate::geometry::pocket_frame;
use crate::io::{AtomVocabulary, Ligand, ProteinPocket, SurfaceGraph, Vec3};
use crate::numerics::{ParameterStore, Tensor};
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

/// How a fresh type observation updates `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeUpdate {
    /// `theta <- softmax(y)`: each step forgets earlier observations.
    #[default]
    Replace,
    /// `theta <- softmax(y_1 + ... + y_i)`: the Bayesian update, which keeps
    /// the accumulated evidence.
    Accumulate,
}

/// Which prediction the type observation is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeMean {
    /// Mean `alpha (K v_hat - 1)`, smooth in the prediction.
    #[default]
    Expectation,
    /// Mean `alpha (K e_argmax - 1)`.
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    pub steps: usize,
    pub type_update: TypeUpdate,
    pub type_mean: TypeMean,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            steps: 100,
            type_update: TypeUpdate::Replace,
            type_mean: TypeMean::Expectation,
        }
    }
}

/// A generated ligand with the final type distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLigand {
    pub positions: Vec<Vec3>,
    pub types: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

impl SampledLigand {
    pub fn to_ligand(&self) -> Result<Ligand> {
        let k = self.probs.first().map_or(0, Vec::len);
        Ligand::new(self.positions.clone(), self.types.clone(), k)
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

fn check_simplex(theta: &Tensor, step: usize) -> Result<()> {
    for r in 0..theta.rows() {
        let row = theta.row(r);
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p >= 0.0)) {
            return Err(SculptError::numeric(format!("type parameters left the simplex at step {step}")));
        }
    }
    Ok(())
}

/// Generates `n_atoms` atoms in the frame of `cond`. Starting from `mu = 0`
/// and uniform `theta`, every step predicts the clean ligand at
/// `t = (i - 1) / N`, redraws `mu` at the accuracy of `t' = i / N` and
/// observes the types at accuracy `alpha_i`; a final call at `t = 1` gives
/// the output, with types taken as the most probable class.
pub fn sample_ligand(
    network: &dyn OutputNetwork,
    store: &ParameterStore,
    cond: &Conditioning,
    n_atoms: usize,
    schedule: &NoiseSchedule,
    options: &SamplerOptions,
    rng: &mut impl Rng,
) -> Result<SampledLigand> {
    schedule.validate()?;
    if n_atoms == 0 {
        return Err(SculptError::validation("the ligand needs at least one atom"));
    }
    let steps = options.steps;
    if steps == 0 {
        return Err(SculptError::validation("sampling needs at least one step"));
    }
    let k = network.num_types();
    let mut mu = vec![[0.0; 3]; n_atoms];
    let mut theta = Tensor::full(&[n_atoms, k], 1.0 / k as f64);
    let mut evidence = vec![vec![0.0; k]; n_atoms];
    let kf = k as f64;
    for i in 1..=steps {
        let t = (i - 1) as f64 / steps as f64;
        let out = sca_forward(network, store, cond, &Tensor::from_vec3s(&mu), &theta, t)?;
        let gamma = schedule.gamma(i as f64 / steps as f64)?;
        mu = gaussian_around(&out.coords, gamma, rng)?;
        let alpha = schedule.alpha(i, steps)?;
        let sd = (alpha * kf).sqrt();
        for (acc, p) in evidence.iter_mut().zip(&out.probs) {
            let hard = argmax(p);
            for (j, e) in acc.iter_mut().enumerate() {
                let centre = match options.type_mean {
                    TypeMean::Expectation => kf * p[j] - 1.0,
                    TypeMean::Argmax => kf * if j == hard { 1.0 } else { 0.0 } - 1.0,
                };
                let noise: f64 = StandardNormal.sample(rng);
                let y = alpha * centre + sd * noise;
                *e = match options.type_update {
                    TypeUpdate::Replace => y,
                    TypeUpdate::Accumulate => *e + y,
                };
            }
        }
        theta = softmax_rows(&evidence);
        check_simplex(&theta, i)?;
    }
    let out = sca_forward(network, store, cond, &Tensor::from_vec3s(&mu), &theta, 1.0)?;
    Ok(SampledLigand {
        types: out.probs.iter().map(|p| argmax(p)).collect(),
        positions: out.coords,
        probs: out.probs,
    })
}

/// Samples in the canonical frame of the pocket and maps the result back,
/// so moving the pocket and surface rigidly moves the sample with them.
#[allow(clippy::too_many_arguments)]
pub fn sample_in_pocket(
    network: &dyn OutputNetwork,
    store: &ParameterStore,
    pocket: &ProteinPocket,
    surface: &SurfaceGraph,
    vocab: &AtomVocabulary,
    config: &EncoderConfig,
    n_atoms: usize,
    schedule: &NoiseSchedule,
    options: &SamplerOptions,
    rng: &mut impl Rng,
) -> Result<SampledLigand> {
    let frame = pocket_frame(&pocket.positions());
    let local = |p: Vec3| frame.to_local(p);
    let cond = Conditioning::new(pocket.map_positions(local), surface.map_positions(local), vocab, config)?;
    let mut sample = sample_ligand(network, store, &cond, n_atoms, schedule, options, rng)?;
    for p in &mut sample.positions {
        *p = frame.to_global(*p);
    }
    Ok(sample)
}

/// `histogram[n]` counts ligands with `n` atoms.
pub fn size_histogram(sizes: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let mut counts: Vec<f64> = Vec::new();
    for n in sizes {
        if counts.len() <= n {
            counts.resize(n + 1, 0.0);
        }
        counts[n] += 1.0;
    }
    counts
}

/// Draws a ligand size with probability proportional to its count.
pub fn draw_ligand_size(histogram: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let usable: Vec<f64> = histogram
        .iter()
        .enumerate()
        .map(|(n, &c)| if n == 0 { 0.0 } else { c })
        .collect();
    let dist = WeightedIndex::new(&usable)
        .map_err(|_| SculptError::validation("the ligand-size histogram has no positive counts"))?;
    Ok(dist.sample(rng))
}
