use indexmap::IndexMap;
use sculpt::bfn::item_rng;
use sculpt::encoder::ScaNetwork;
use sculpt::io::Checkpoint;
use sculpt::numerics::{ParameterStore, Tensor};
use sculpt::{Result, SculptError};

use crate::config::RunConfig;

/// Network and freshly initialized parameters for `config`, drawn from the
/// initialization stream of `config.seed`.
pub fn build_network(config: &RunConfig) -> Result<(ScaNetwork, ParameterStore)> {
    let vocab = config.vocab()?;
    let mut store = ParameterStore::new();
    let mut rng = item_rng(config.seed, 0, 0);
    let net = ScaNetwork::register(&mut store, &config.encoder, vocab.len(), &mut rng)?;
    Ok((net, store))
}

pub fn to_checkpoint(store: &ParameterStore, config: &RunConfig, step: u64, size_histogram: &[f64]) -> Checkpoint {
    let collect = |f: fn(&sculpt::numerics::ParamEntry) -> &Tensor| -> IndexMap<String, Tensor> {
        store.iter().map(|(n, e)| (n.to_string(), f(e).clone())).collect()
    };
    Checkpoint {
        config_json: config.to_json(),
        params: collect(|e| &e.value),
        ema: collect(|e| &e.ema),
        adam_m: collect(|e| &e.m),
        adam_v: collect(|e| &e.v),
        seed: config.seed,
        step,
        size_histogram: size_histogram.to_vec(),
    }
}

/// Copies the checkpoint state into `store`, which must have exactly the
/// same tensor names and shapes.
pub fn restore(store: &mut ParameterStore, checkpoint: &Checkpoint) -> Result<()> {
    if checkpoint.params.len() != store.len() {
        return Err(SculptError::Checkpoint(format!(
            "checkpoint holds {} tensors, the network has {}",
            checkpoint.params.len(),
            store.len()
        )));
    }
    for (name, entry) in store.iter_mut() {
        let pick = |map: &IndexMap<String, Tensor>, what: &str| -> Result<Tensor> {
            let t = map
                .get(name)
                .ok_or_else(|| SculptError::Checkpoint(format!("{what} for {name:?} missing")))?;
            if t.shape() != entry.value.shape() {
                return Err(SculptError::Checkpoint(format!(
                    "{name:?} has shape {:?}, expected {:?}",
                    t.shape(),
                    entry.value.shape()
                )));
            }
            Ok(t.clone())
        };
        let value = pick(&checkpoint.params, "value")?;
        let ema = pick(&checkpoint.ema, "EMA shadow")?;
        let m = pick(&checkpoint.adam_m, "Adam first moment")?;
        let v = pick(&checkpoint.adam_v, "Adam second moment")?;
        entry.value = value;
        entry.ema = ema;
        entry.m = m;
        entry.v = v;
    }
    Ok(())
}

/// Network described by the checkpoint's own configuration, with its state
/// loaded.
pub fn load_checkpoint(checkpoint: &Checkpoint) -> Result<(RunConfig, ScaNetwork, ParameterStore)> {
    let config = RunConfig::from_json(&checkpoint.config_json, std::path::Path::new("<checkpoint config>"))?;
    let (net, mut store) = build_network(&config)?;
    restore(&mut store, checkpoint)?;
    Ok((config, net, store))
}

/// Writes through a temporary file so an interrupted write never replaces
/// the previous checkpoint.
pub fn save_atomically(checkpoint: &Checkpoint, path: &std::path::Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    checkpoint.save(&tmp)?;
    std::fs::rename(&tmp, path).map_err(|e| SculptError::io(path, e))
}
