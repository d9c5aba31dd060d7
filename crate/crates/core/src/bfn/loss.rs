use rand::Rng;
use serde::Serialize;

use super::flow::{flow_sample_continuous, flow_sample_discrete, sender_sample};
use super::schedule::NoiseSchedule;
use crate::encoder::{Conditioning, EncoderConfig, OutputNetwork};
use crate::error::{Result, SculptError};
use crate::geometry::{pocket_frame, RigidFrame};
use crate::io::{AtomVocabulary, Ligand, ProteinPocket, SurfaceGraph, Vec3};
use crate::numerics::{ParameterStore, Tape, Tensor, Var};

/// A complex expressed in its pocket frame, ready for loss evaluation.
#[derive(Debug, Clone)]
pub struct TrainingComplex {
    pub frame: RigidFrame,
    pub cond: Conditioning,
    /// Clean ligand coordinates in the pocket frame.
    pub positions: Vec<Vec3>,
    pub types: Vec<usize>,
}

impl TrainingComplex {
    pub fn new(
        pocket: &ProteinPocket,
        surface: &SurfaceGraph,
        ligand: &Ligand,
        vocab: &AtomVocabulary,
        config: &EncoderConfig,
    ) -> Result<Self> {
        let frame = pocket_frame(&pocket.positions());
        let local = |p: Vec3| frame.to_local(p);
        let cond = Conditioning::new(pocket.map_positions(local), surface.map_positions(local), vocab, config)?;
        Ok(TrainingComplex {
            frame,
            cond,
            positions: ligand.positions().iter().map(|&p| frame.to_local(p)).collect(),
            types: ligand.types().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub loss_x: f64,
    pub loss_v: f64,
    pub total: f64,
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct LossOptions {
    /// Adds the negative log-likelihood of the clean ligand under the
    /// output distribution at `t = 1`.
    pub reconstruction: bool,
}

/// `weight(i, n) * |x - x_hat|^2` on plain values.
pub fn coordinate_loss(x: &[Vec3], x_hat: &[Vec3], i: usize, schedule: &NoiseSchedule) -> Result<f64> {
    if x.len() != x_hat.len() {
        return Err(SculptError::dimension("coordinate loss", format!("{} atoms", x.len()), x_hat.len()));
    }
    let w = schedule.coordinate_weight(i, schedule.steps)?;
    let sq: f64 = x
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>())
        .sum();
    Ok(w * sq)
}

/// Single-sample type loss on plain values: draws `y` from the sender at
/// accuracy `alpha_i` and returns `log p_S(y) - log p_R(y)` summed over atoms.
pub fn type_loss(
    types: &[usize],
    probs: &[Vec<f64>],
    i: usize,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<f64> {
    let k = probs.first().map_or(0, Vec::len);
    let alpha = schedule.alpha(i, schedule.steps)?;
    if !(alpha > 0.0) {
        return Err(SculptError::numeric("type accuracy must be positive"));
    }
    let y = sender_sample(types, alpha, k, rng);
    Ok(types
        .iter()
        .zip(&y)
        .zip(probs)
        .map(|((&a, y), p)| super::flow::type_loss_sample(y, a, p, alpha))
        .sum())
}

/// One Monte-Carlo estimate of the discrete-time loss: sample a step,
/// noise the clean ligand to its flow parameters, predict, and score the
/// coordinate and type terms. The returned variable is the total.
pub fn discrete_time_loss(
    tape: &mut Tape,
    network: &dyn OutputNetwork,
    store: &ParameterStore,
    complex: &TrainingComplex,
    schedule: &NoiseSchedule,
    options: &LossOptions,
    rng: &mut impl Rng,
) -> Result<(Var, LossBreakdown)> {
    schedule.validate()?;
    let n = schedule.steps;
    let k = network.num_types();
    let i = rng.random_range(1..=n);
    let t = (i - 1) as f64 / n as f64;
    let mu = flow_sample_continuous(&complex.positions, t, schedule, rng)?;
    let theta = flow_sample_discrete(&complex.types, t, schedule.beta1, k, rng)?;
    let out = network.forward(tape, store, &complex.cond, &Tensor::from_vec3s(&mu), &theta, t)?;

    let clean = tape.constant(Tensor::from_vec3s(&complex.positions));
    let diff = tape.sub(out.coords, clean);
    let sq = tape.sum_squares(diff);
    let lx = tape.scale(sq, schedule.coordinate_weight(i, n)?);

    // Sender and receiver class densities share everything except `y_c`
    // (see `type_loss_sample`), so only `y` enters the tape.
    let alpha = schedule.alpha(i, n)?;
    let y = sender_sample(&complex.types, alpha, k, rng);
    let sender: f64 = y.iter().zip(&complex.types).map(|(row, &a)| row[a]).sum();
    let y = tape.constant(Tensor::from_rows(&y));
    let joint = tape.add(out.log_probs, y);
    let receiver = tape.log_sum_exp_rows(joint);
    let receiver = tape.sum(receiver);
    let neg = tape.scale(receiver, -1.0);
    let sender_c = tape.constant(Tensor::scalar(sender));
    let lv = tape.add(sender_c, neg);
    let mut total = tape.add(lx, lv);

    if options.reconstruction {
        let recon = reconstruction_term(tape, network, store, complex, schedule, rng)?;
        total = tape.add(total, recon);
    }
    let breakdown = LossBreakdown {
        loss_x: tape.scalar(lx),
        loss_v: tape.scalar(lv),
        total: tape.scalar(total),
        step: i,
        t,
    };
    if !breakdown.total.is_finite() {
        return Err(SculptError::numeric(format!("loss is not finite at step {i}")));
    }
    Ok((total, breakdown))
}

/// `-log p_O(x, a)` at `t = 1`: Gaussian coordinates with standard
/// deviation `sigma1` around the prediction plus the type cross-entropy.
fn reconstruction_term(
    tape: &mut Tape,
    network: &dyn OutputNetwork,
    store: &ParameterStore,
    complex: &TrainingComplex,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Var> {
    let k = network.num_types();
    let mu = flow_sample_continuous(&complex.positions, 1.0, schedule, rng)?;
    let theta = flow_sample_discrete(&complex.types, 1.0, schedule.beta1, k, rng)?;
    let out = network.forward(tape, store, &complex.cond, &Tensor::from_vec3s(&mu), &theta, 1.0)?;
    let clean = tape.constant(Tensor::from_vec3s(&complex.positions));
    let diff = tape.sub(out.coords, clean);
    let sq = tape.sum_squares(diff);
    let s2 = schedule.sigma1 * schedule.sigma1;
    let coord = tape.scale(sq, 1.0 / (2.0 * s2));
    let mut onehot = vec![0.0; complex.len() * k];
    for (r, &a) in complex.types.iter().enumerate() {
        onehot[r * k + a] = 1.0;
    }
    let mask = tape.constant(Tensor::matrix(complex.len(), k, onehot));
    let picked = tape.mul(out.log_probs, mask);
    let ll = tape.sum(picked);
    let nll = tape.scale(ll, -1.0);
    let norm = 1.5 * complex.len() as f64 * (2.0 * std::f64::consts::PI * s2).ln();
    let c = tape.constant(Tensor::scalar(norm));
    let coord = tape.add(coord, c);
    Ok(tape.add(coord, nll))
}
