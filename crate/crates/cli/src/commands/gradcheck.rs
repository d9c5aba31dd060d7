use sculpt::bfn::{discrete_time_loss, item_rng, TrainingComplex};
use sculpt::encoder::ScaNetwork;
use sculpt::numerics::{finite_diff_check, FdOptions, GradCheckReport, ParameterStore};
use sculpt::toy::toy_complex;
use sculpt::Result;

use crate::config::RunConfig;

/// Finite-difference check of the full loss on a small synthetic complex.
/// `inject_fault` corrupts one backward rule to prove the check can fail.
pub fn run(config: &RunConfig, inject_fault: bool) -> Result<GradCheckReport> {
    config.validate()?;
    let g = &config.gradcheck;
    let vocab = config.vocab()?;
    let toy = toy_complex(config.seed, g.ligand_atoms, g.pocket_atoms, &vocab)?;
    let complex = TrainingComplex::new(&toy.pocket, &toy.surface, &toy.ligand, &vocab, &g.encoder)?;
    let mut store = ParameterStore::new();
    let net = ScaNetwork::register(&mut store, &g.encoder, vocab.len(), &mut item_rng(config.seed, 0, 0))?;
    let options = FdOptions {
        step: g.step,
        tolerance: g.tolerance,
        max_entries_per_tensor: g.max_entries_per_tensor,
        seed: config.seed,
    };
    finite_diff_check(
        &store,
        |s, tape| {
            if inject_fault {
                tape.inject_backward_fault();
            }
            let mut rng = item_rng(config.seed, 1, 0);
            Ok(discrete_time_loss(tape, &net, s, &complex, &config.schedule, &config.loss, &mut rng)?.0)
        },
        &options,
    )
}
