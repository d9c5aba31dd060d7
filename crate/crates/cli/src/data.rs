use std::fs;
use std::path::{Path, PathBuf};

use sculpt::io::{load_complex, load_ligand, Atom3D, AtomVocabulary, LoadedComplex};
use sculpt::{Result, SculptError};

pub const POCKET_FILE: &str = "pocket.json";
pub const SURFACE_FILE: &str = "surface.json";
pub const LIGAND_FILE: &str = "ligand.txt";
/// Extension of ligand files read and written by `sample` and `eval`.
pub const LIGAND_EXT: &str = "txt";

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| SculptError::io(dir, e))? {
        out.push(entry.map_err(|e| SculptError::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

/// A named training complex with its ligand.
#[derive(Debug, Clone)]
pub struct DataItem {
    pub name: String,
    pub complex: LoadedComplex,
}

fn load_item(dir: &Path, vocab: &AtomVocabulary) -> Result<DataItem> {
    let complex = load_complex(
        &dir.join(POCKET_FILE),
        &dir.join(SURFACE_FILE),
        Some(&dir.join(LIGAND_FILE)),
        vocab,
    )?;
    let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(DataItem { name, complex })
}

/// Either a single complex directory (holding `pocket.json`, `surface.json`
/// and `ligand.txt`) or a directory of such directories, in name order.
pub fn load_dataset(dir: &Path, vocab: &AtomVocabulary) -> Result<Vec<DataItem>> {
    if !dir.is_dir() {
        return Err(SculptError::validation(format!("data directory {} does not exist", dir.display())));
    }
    if dir.join(POCKET_FILE).exists() {
        return Ok(vec![load_item(dir, vocab)?]);
    }
    let mut items = Vec::new();
    for p in sorted_entries(dir)? {
        if p.is_dir() && p.join(POCKET_FILE).exists() {
            items.push(load_item(&p, vocab)?);
        }
    }
    if items.is_empty() {
        return Err(SculptError::validation(format!(
            "{} holds no complex directories with {POCKET_FILE}, {SURFACE_FILE} and {LIGAND_FILE}",
            dir.display()
        )));
    }
    Ok(items)
}

/// Every `*.txt` ligand in `dir`, in name order, as element-labelled atoms.
pub fn load_ligand_dir(dir: &Path, vocab: &AtomVocabulary) -> Result<Vec<(PathBuf, Vec<Atom3D>)>> {
    let mut out = Vec::new();
    for p in sorted_entries(dir)? {
        if p.is_file() && p.extension().is_some_and(|e| e == LIGAND_EXT) {
            let (ligand, _) = load_ligand(&p, vocab)?;
            let atoms = ligand
                .elements(vocab)
                .into_iter()
                .zip(ligand.positions())
                .map(|(el, &position)| Atom3D {
                    element: el.to_string(),
                    position,
                })
                .collect();
            out.push((p, atoms));
        }
    }
    Ok(out)
}
