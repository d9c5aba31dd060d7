use std::path::PathBuf;

use sculpt::geometry::RadiiTable;
use sculpt::io::{load_pocket, Atom3D, AtomVocabulary};
use sculpt::metrics::{evaluate, EnergyTable, EvalReport};
use sculpt::{Result, SculptError};

use super::sample::write_json;
use crate::data::load_ligand_dir;

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub gen_dir: PathBuf,
    pub ref_dir: Option<PathBuf>,
    pub pocket: Option<PathBuf>,
    pub energies: Option<PathBuf>,
    pub out: PathBuf,
    pub vocab: AtomVocabulary,
    pub radii: RadiiTable,
}

fn pool(dir: &std::path::Path, vocab: &AtomVocabulary) -> Result<Vec<Vec<Atom3D>>> {
    if !dir.is_dir() {
        return Err(SculptError::validation(format!("{} is not a directory", dir.display())));
    }
    Ok(load_ligand_dir(dir, vocab)?.into_iter().map(|(_, atoms)| atoms).collect())
}

/// Loads the pools and writes `evaluate`'s report unchanged.
pub fn run(args: EvalArgs) -> Result<EvalReport> {
    let generated = pool(&args.gen_dir, &args.vocab)?;
    if generated.is_empty() {
        return Err(SculptError::validation(format!("{} holds no ligand files", args.gen_dir.display())));
    }
    let reference = match &args.ref_dir {
        Some(d) => Some(pool(d, &args.vocab)?).filter(|r| !r.is_empty()),
        None => None,
    };
    let pocket = args.pocket.as_deref().map(load_pocket).transpose()?;
    let energies = args.energies.as_deref().map(EnergyTable::load).transpose()?;
    let report = evaluate(&generated, reference.as_deref(), pocket.as_ref(), energies.as_ref(), &args.radii)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    write_json(&args.out, &report)?;
    Ok(report)
}
