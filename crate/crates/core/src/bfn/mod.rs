//! Accuracy schedules, flow distributions, the discrete-time loss and the
//! sampler.

mod flow;
mod loss;
mod sampler;
mod schedule;
mod stub;

pub use flow::{
    class_log_density, flow_sample_continuous, flow_sample_discrete, sender_sample, softmax_rows, type_loss_sample,
};
pub use loss::{coordinate_loss, discrete_time_loss, type_loss, LossBreakdown, LossOptions, TrainingComplex};
pub use sampler::{
    draw_ligand_size, sample_in_pocket, sample_ligand, size_histogram, SampledLigand, SamplerOptions, TypeMean, TypeUpdate,
};
pub use schedule::{discrete_alpha, schedule_continuous, schedule_discrete, NoiseSchedule, ScheduleForm};
pub use stub::OracleNetwork;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for one batch item at one optimizer step, so the
/// result does not depend on how items are scheduled across threads.
pub fn item_rng(seed: u64, step: u64, item: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ item);
    rng
}
