#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sculpt::io::{write_ligand, write_pocket, write_surface, AtomVocabulary};
use sculpt::toy::{toy_complex, ToyComplex};
use sculpt_cli::data::{LIGAND_FILE, POCKET_FILE, SURFACE_FILE};

/// Writes a synthetic complex in the training-data layout and returns it.
pub fn write_toy(dir: &Path, seed: u64, ligand_atoms: usize, pocket_atoms: usize) -> ToyComplex {
    let vocab = AtomVocabulary::default();
    let c = toy_complex(seed, ligand_atoms, pocket_atoms, &vocab).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    write_pocket(&c.pocket, &dir.join(POCKET_FILE)).unwrap();
    write_surface(&c.surface, &dir.join(SURFACE_FILE)).unwrap();
    write_ligand(&c.ligand, &vocab, &dir.join(LIGAND_FILE)).unwrap();
    c
}

pub fn sculpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sculpt"))
        .args(args)
        .env_remove("SCULPT_SEED")
        .output()
        .expect("sculpt binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

/// Exponentially smoothed series with the given decay.
pub fn ema(values: &[f64], decay: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut s = values[0];
    for &v in values {
        s = decay * s + (1.0 - decay) * v;
        out.push(s);
    }
    out
}

pub fn loss_totals(log: &Path) -> Vec<(u64, f64)> {
    std::fs::read_to_string(log)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}
