use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sculpt::io::Checkpoint;
use sculpt::{Result, SculptError};
use sculpt_cli::commands::{eval, gradcheck, sample, surface, train};
use sculpt_cli::{exit_code, RunConfig};

#[derive(Parser)]
#[command(name = "sculpt", version, about = "Surface-conditioned Bayesian flow ligand generator")]
struct Cli {
    /// Run single-threaded for byte-exact reproducibility.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select pocket residues around a ligand and write a featurized surface.
    Surface {
        #[arg(long)]
        pocket: PathBuf,
        #[arg(long)]
        ligand: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the selected residues as a pocket file.
        #[arg(long)]
        pocket_out: Option<PathBuf>,
        /// Probe radius in Å.
        #[arg(long)]
        probe: Option<f64>,
        /// Sphere samples per atom.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on a directory of complexes.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from this checkpoint; its configuration applies unless
        /// --config is given.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_nan_at: Option<u64>,
    },
    /// Generate ligands for a pocket with the EMA weights of a checkpoint.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pocket: PathBuf,
        #[arg(long)]
        surface: PathBuf,
        /// Atoms per ligand; drawn from the training-size histogram if omitted.
        #[arg(long)]
        n_atoms: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare generated ligands against a reference pool.
    Eval {
        #[arg(long)]
        gen_dir: PathBuf,
        #[arg(long)]
        ref_dir: Option<PathBuf>,
        /// Pocket for clash counting.
        #[arg(long)]
        pocket: Option<PathBuf>,
        /// CSV with header pocket_id,role,energy.
        #[arg(long)]
        energies: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Finite-difference check of the loss gradient on a small complex.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn config_with_seed(path: Option<&std::path::Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut c = RunConfig::load_or_default(path)?;
    c.resolve_seed(seed)?;
    Ok(c)
}

fn required(value: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value
        .or_else(|| fallback.clone())
        .ok_or_else(|| SculptError::validation(format!("{flag} is required (or set it under \"paths\" in the config)")))
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Surface { pocket, ligand, out, pocket_out, probe, samples, config } => {
            let c = RunConfig::load_or_default(config.as_deref())?;
            let mut ses = c.surface.clone();
            if let Some(p) = probe {
                ses.probe_radius = p;
            }
            if let Some(s) = samples {
                ses.samples_per_atom = s;
            }
            let s = surface::run(surface::SurfaceArgs {
                pocket,
                ligand,
                out: out.clone(),
                pocket_out,
                ses,
                cutoff: c.pocket_cutoff,
                vocab: c.vocab()?,
                radii: c.radii.clone(),
            })?;
            println!(
                "{}: {} vertices, {} edges from {} pocket atoms ({} curvature fallbacks)",
                out.display(),
                s.vertices,
                s.edges,
                s.pocket_atoms,
                s.curvature_fallbacks
            );
        }
        Command::Train { data, config, out, resume, seed, inject_nan_at } => {
            let resume = resume.as_deref().map(Checkpoint::load).transpose()?;
            let mut c = match (&config, &resume) {
                (None, Some(cp)) => RunConfig::from_json(&cp.config_json, std::path::Path::new("<checkpoint config>"))?,
                _ => RunConfig::load_or_default(config.as_deref())?,
            };
            c.resolve_seed(seed)?;
            let data = required(data, &c.paths.data, "--data")?;
            let out = required(out, &c.paths.out, "--out")?;
            let s = train::run(train::TrainArgs { data, out, config: c, resume, inject_nan_at })?;
            match s.last {
                Some(b) => println!(
                    "steps {}..={} on {} complexes; last total {:.6} (L_x {:.6}, L_v {:.6})",
                    s.first_step, s.last_step, s.complexes, b.total, b.loss_x, b.loss_v
                ),
                None => println!("nothing to do: checkpoint already at step {}", s.last_step),
            }
            println!("checkpoint {}; loss log {}", s.checkpoint.display(), s.loss_log.display());
        }
        Command::Sample { ckpt, pocket, surface, n_atoms, steps, count, seed, out_dir } => {
            let m = sample::run(sample::SampleArgs {
                checkpoint: ckpt,
                pocket,
                surface,
                n_atoms,
                steps,
                count,
                seed,
                out_dir: out_dir.clone(),
            })?;
            for l in &m.ligands {
                println!("{}: {} atoms, {} clashes", l.file, l.n_atoms, l.clashes);
            }
            println!("manifest {}", out_dir.join(sample::MANIFEST_FILE).display());
        }
        Command::Eval { gen_dir, ref_dir, pocket, energies, out, config } => {
            let c = RunConfig::load_or_default(config.as_deref())?;
            let r = eval::run(eval::EvalArgs {
                gen_dir,
                ref_dir,
                pocket,
                energies,
                out: out.clone(),
                vocab: c.vocab()?,
                radii: c.radii.clone(),
            })?;
            let show = |v: Option<f64>| v.map_or_else(|| "null".to_string(), |v| format!("{v:.4}"));
            println!(
                "JSD_BL {}  JSD_CC_2A {}  JSD_All_12A {}  -> {}",
                show(r.jsd_bl),
                show(r.jsd_cc_2a),
                show(r.jsd_all_12a),
                out.display()
            );
        }
        Command::Gradcheck { config, seed, inject_fault } => {
            let c = config_with_seed(config.as_deref(), seed)?;
            let r = gradcheck::run(&c, inject_fault)?;
            println!(
                "worst relative error {:.3e} at {}[{}] over {} entries (tolerance {:.0e}); normwise {:.3e}",
                r.max_relative_error,
                r.worst_parameter,
                r.worst_entry,
                r.checked,
                r.tolerance,
                r.normwise_error()
            );
            if !r.passed() {
                println!("FAIL");
                return Ok(ExitCode::from(1));
            }
            println!("PASS");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .expect("thread pool is configured once");
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
