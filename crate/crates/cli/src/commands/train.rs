use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sculpt::bfn::{discrete_time_loss, item_rng, size_histogram, LossBreakdown, TrainingComplex};
use sculpt::io::Checkpoint;
use sculpt::numerics::{adam_step, ema_update, Tape, Tensor};
use sculpt::{Result, SculptError};

use crate::config::RunConfig;
use crate::data::load_dataset;
use crate::model::{build_network, restore, save_atomically, to_checkpoint};

pub const CHECKPOINT_FILE: &str = "checkpoint.sclp";
pub const LOSS_LOG_FILE: &str = "loss.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const LOSS_LOG_HEADER: &str = "step,loss_x,loss_v,total";

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub config: RunConfig,
    pub resume: Option<Checkpoint>,
    /// Test hook: report a non-finite loss at this step.
    pub inject_nan_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub complexes: usize,
    pub first_step: u64,
    pub last_step: u64,
    pub last: Option<LossBreakdown>,
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
}

/// Keeps the header and the rows up to `step`, so a resumed run continues
/// the log without gaps or repeats.
fn trim_log(path: &Path, step: u64) -> Result<()> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(SculptError::io(path, e)),
    };
    let mut kept = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0
            || line
                .split(',')
                .next()
                .and_then(|s| s.parse::<u64>().ok())
                .is_some_and(|s| s <= step);
        if keep {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(|e| SculptError::io(path, e))
}

fn open_log(path: &Path, resume: bool) -> Result<BufWriter<File>> {
    let fresh = !resume || !path.exists();
    let file = if fresh {
        File::create(path)
    } else {
        OpenOptions::new().append(true).open(path)
    }
    .map_err(|e| SculptError::io(path, e))?;
    let mut w = BufWriter::new(file);
    if fresh {
        writeln!(w, "{LOSS_LOG_HEADER}").map_err(|e| SculptError::io(path, e))?;
    }
    Ok(w)
}

/// Epoch-major schedule: every epoch visits the complexes in a fresh
/// permutation, in batches of `batch_size` (the last batch may be short).
fn batch_for_step(step: u64, n: usize, batch_size: usize, seed: u64) -> Vec<usize> {
    let per_epoch = n.div_ceil(batch_size) as u64;
    let epoch = (step - 1) / per_epoch;
    let b = ((step - 1) % per_epoch) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut item_rng(seed, 0, 1 + epoch));
    order[b * batch_size..((b + 1) * batch_size).min(n)].to_vec()
}

/// Mean of each loss component over a batch.
fn batch_mean(items: &[LossBreakdown]) -> LossBreakdown {
    let n = items.len() as f64;
    let mean = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
    LossBreakdown {
        loss_x: mean(|b| b.loss_x),
        loss_v: mean(|b| b.loss_v),
        total: mean(|b| b.total),
        step: items[0].step,
        t: items[0].t,
    }
}

pub fn run(args: TrainArgs) -> Result<TrainSummary> {
    let config = args.config;
    config.validate()?;
    let vocab = config.vocab()?;
    let items = load_dataset(&args.data, &vocab)?;
    let complexes = items
        .iter()
        .map(|item| {
            let c = &item.complex;
            let ligand = c.ligand.as_ref().expect("training items carry ligands");
            TrainingComplex::new(&c.pocket, &c.surface, ligand, &vocab, &config.encoder)
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes = size_histogram(complexes.iter().map(TrainingComplex::len));
    let (net, mut store) = build_network(&config)?;
    let mut step = 0;
    if let Some(cp) = &args.resume {
        restore(&mut store, cp)?;
        step = cp.step;
    }

    fs::create_dir_all(&args.out).map_err(|e| SculptError::io(&args.out, e))?;
    let config_path = args.out.join(CONFIG_FILE);
    fs::write(&config_path, config.to_json()).map_err(|e| SculptError::io(&config_path, e))?;
    let ckpt_path = args.out.join(CHECKPOINT_FILE);
    let log_path = args.out.join(LOSS_LOG_FILE);
    if args.resume.is_some() {
        trim_log(&log_path, step)?;
    }
    let mut log = open_log(&log_path, args.resume.is_some())?;
    let log_err = |e| SculptError::io(&log_path, e);

    let batch_size = config.optimizer.batch_size;
    let per_epoch = complexes.len().div_ceil(batch_size) as u64;
    let total_steps = config
        .training
        .max_steps
        .unwrap_or(config.optimizer.epochs as u64 * per_epoch);
    let first_step = step + 1;
    let mut last = None;
    while step < total_steps {
        let next = step + 1;
        let draws = config.training.draws_per_item;
        let jobs: Vec<(usize, u64)> = batch_for_step(next, complexes.len(), batch_size, config.seed)
            .into_iter()
            .flat_map(|idx| (0..draws).map(move |d| (idx, (idx * draws + d) as u64)))
            .collect();
        let results: Vec<Result<(LossBreakdown, Vec<Tensor>)>> = jobs
            .par_iter()
            .map(|&(idx, stream)| {
                if args.inject_nan_at == Some(next) {
                    return Err(SculptError::numeric(format!("loss is not finite at optimizer step {next} (injected)")));
                }
                let mut rng = item_rng(config.seed, next, stream);
                let mut tape = Tape::new();
                let (loss, b) = discrete_time_loss(
                    &mut tape,
                    &net,
                    &store,
                    &complexes[idx],
                    &config.schedule,
                    &config.loss,
                    &mut rng,
                )?;
                let grads = tape.backward(loss)?;
                Ok((b, store.dense_grads(&grads)))
            })
            .collect();
        let mut parts = Vec::with_capacity(results.len());
        let mut failure = None;
        for r in results {
            match r {
                Ok(p) => parts.push(p),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        let outcome = match failure {
            Some(e) => Err(e),
            None => {
                let weight = 1.0 / parts.len() as f64;
                for (_, g) in &parts {
                    store.accumulate_dense(g, weight);
                }
                adam_step(&mut store, &config.optimizer, next)
            }
        };
        if let Err(e) = outcome {
            // The store still holds the state after `step`; keep it.
            store.zero_grads();
            log.flush().map_err(log_err)?;
            save_atomically(&to_checkpoint(&store, &config, step, &sizes), &ckpt_path)?;
            log::error!("aborting at step {next}; checkpoint of step {step} kept at {}", ckpt_path.display());
            return Err(e);
        }
        ema_update(&mut store, config.optimizer.ema_decay);
        step = next;
        let breakdowns: Vec<LossBreakdown> = parts.iter().map(|(b, _)| *b).collect();
        let mean = batch_mean(&breakdowns);
        writeln!(log, "{},{},{},{}", step, mean.loss_x, mean.loss_v, mean.total).map_err(log_err)?;
        if step % config.training.checkpoint_every == 0 || step == total_steps {
            log.flush().map_err(log_err)?;
            save_atomically(&to_checkpoint(&store, &config, step, &sizes), &ckpt_path)?;
        }
        if step % 100 == 0 {
            log::info!("step {step}/{total_steps}: total {:.4}", mean.total);
        }
        last = Some(mean);
    }
    log.flush().map_err(log_err)?;
    if !ckpt_path.exists() {
        save_atomically(&to_checkpoint(&store, &config, step, &sizes), &ckpt_path)?;
    }
    Ok(TrainSummary {
        complexes: complexes.len(),
        first_step,
        last_step: step,
        last,
        checkpoint: ckpt_path,
        loss_log: log_path,
    })
}
