use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sculpt::bfn::{draw_ligand_size, item_rng, sample_in_pocket};
use sculpt::geometry::{count_clashes, CLASH_TOLERANCE};
use sculpt::io::{load_complex, write_ligand, Atom3D, Checkpoint, Ligand};
use sculpt::{Result, SculptError};
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::LIGAND_EXT;
use crate::model::load_checkpoint;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct SampleArgs {
    pub checkpoint: PathBuf,
    pub pocket: PathBuf,
    pub surface: PathBuf,
    pub n_atoms: Option<usize>,
    pub steps: Option<usize>,
    pub count: usize,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeSource {
    Fixed,
    Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub n_atoms: usize,
    pub clashes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub steps: usize,
    pub count: usize,
    pub size_source: SizeSource,
    /// Training-set size histogram the sizes were drawn from, if any.
    pub size_histogram: Option<Vec<f64>>,
    pub ligands: Vec<ManifestEntry>,
}

/// Removes what this run wrote unless it is disarmed.
struct Cleanup {
    files: Vec<PathBuf>,
    dir: Option<PathBuf>,
    armed: bool,
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if !self.armed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if let Some(d) = &self.dir {
            let _ = fs::remove_dir(d);
        }
    }
}

pub fn ligand_file_name(index: usize) -> String {
    format!("ligand_{index:03}.{LIGAND_EXT}")
}

pub fn run(args: SampleArgs) -> Result<Manifest> {
    if args.n_atoms == Some(0) {
        return Err(SculptError::validation("--n-atoms must be at least 1"));
    }
    if args.count == 0 {
        return Err(SculptError::validation("--count must be at least 1"));
    }
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let (mut config, net, store): (RunConfig, _, _) = load_checkpoint(&checkpoint)?;
    config.resolve_seed(args.seed)?;
    if let Some(s) = args.steps {
        config.sampler.steps = s;
    }
    config.validate()?;
    let weights = store.ema_weights();
    let vocab = config.vocab()?;
    let complex = load_complex(&args.pocket, &args.surface, None, &vocab)?;

    let mut cleanup = Cleanup {
        files: Vec::new(),
        dir: (!args.out_dir.exists()).then(|| args.out_dir.clone()),
        armed: true,
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| SculptError::io(&args.out_dir, e))?;

    let samples: Vec<Result<(Ligand, usize)>> = (0..args.count)
        .into_par_iter()
        .map(|c| {
            let mut rng = item_rng(config.seed, 0, c as u64);
            let n = match args.n_atoms {
                Some(n) => n,
                None => draw_ligand_size(&checkpoint.size_histogram, &mut rng)?,
            };
            let s = sample_in_pocket(
                &net,
                &weights,
                &complex.pocket,
                &complex.surface,
                &vocab,
                &config.encoder,
                n,
                &config.schedule,
                &config.sampler,
                &mut rng,
            )?;
            let ligand = s.to_ligand()?;
            let atoms: Vec<Atom3D> = ligand
                .elements(&vocab)
                .into_iter()
                .zip(ligand.positions())
                .map(|(el, &position)| Atom3D {
                    element: el.to_string(),
                    position,
                })
                .collect();
            let clashes = count_clashes(&atoms, &complex.pocket, &config.radii, CLASH_TOLERANCE)?;
            Ok((ligand, clashes))
        })
        .collect();

    let mut entries = Vec::with_capacity(args.count);
    for (c, s) in samples.into_iter().enumerate() {
        let (ligand, clashes) = s?;
        let name = ligand_file_name(c);
        let path = args.out_dir.join(&name);
        cleanup.files.push(path.clone());
        write_ligand(&ligand, &vocab, &path)?;
        entries.push(ManifestEntry {
            file: name,
            n_atoms: ligand.len(),
            clashes,
        });
    }
    let manifest = Manifest {
        seed: config.seed,
        steps: config.sampler.steps,
        count: args.count,
        size_source: if args.n_atoms.is_some() { SizeSource::Fixed } else { SizeSource::Histogram },
        size_histogram: args.n_atoms.is_none().then(|| checkpoint.size_histogram.clone()),
        ligands: entries,
    };
    let manifest_path = args.out_dir.join(MANIFEST_FILE);
    cleanup.files.push(manifest_path.clone());
    write_json(&manifest_path, &manifest)?;
    cleanup.armed = false;
    Ok(manifest)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| SculptError::io(path, e))
}
