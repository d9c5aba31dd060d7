use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::affinity::{affinity_aggregate, AffinitySummary, EnergyTable};
use super::bonds::{bond_length_profile, infer_bonds, jsd_bl, BondedMolecule, BOND_FACTOR};
use super::histogram::{distance_histogram, jsd, DistanceMode};
use crate::error::Result;
use crate::geometry::{count_clashes, RadiiTable, CLASH_TOLERANCE};
use crate::io::{Atom3D, ProteinPocket};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClashSummary {
    pub per_ligand: Vec<usize>,
    pub total: usize,
    pub mean: f64,
}

/// Everything the evaluation computes; JSD fields are `None` when a pool is
/// missing or has nothing to compare, with the reason in `warnings`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub generated: usize,
    pub reference: usize,
    pub jsd_bl: Option<f64>,
    pub jsd_bl_per_class: Option<IndexMap<String, f64>>,
    pub jsd_cc_2a: Option<f64>,
    pub jsd_all_12a: Option<f64>,
    pub clashes: Option<ClashSummary>,
    pub affinity: Option<AffinitySummary>,
    pub warnings: Vec<String>,
}

/// Molecules with bonds inferred from distances.
pub fn with_inferred_bonds(molecules: &[Vec<Atom3D>]) -> Vec<BondedMolecule> {
    molecules
        .iter()
        .map(|atoms| BondedMolecule {
            bonds: infer_bonds(atoms, BOND_FACTOR),
            atoms: atoms.clone(),
        })
        .collect()
}

fn distance_jsd(generated: &[Vec<Atom3D>], reference: &[Vec<Atom3D>], mode: DistanceMode) -> Result<f64> {
    jsd(&distance_histogram(generated, mode)?, &distance_histogram(reference, mode)?)
}

pub fn evaluate(
    generated: &[Vec<Atom3D>],
    reference: Option<&[Vec<Atom3D>]>,
    pocket: Option<&ProteinPocket>,
    energies: Option<&EnergyTable>,
    radii: &RadiiTable,
) -> Result<EvalReport> {
    let mut warnings = Vec::new();
    let mut report = EvalReport {
        generated: generated.len(),
        reference: reference.map_or(0, <[_]>::len),
        jsd_bl: None,
        jsd_bl_per_class: None,
        jsd_cc_2a: None,
        jsd_all_12a: None,
        clashes: None,
        affinity: None,
        warnings: Vec::new(),
    };
    match reference.filter(|r| !r.is_empty()) {
        None => warnings.push("no reference pool; JSD fields left empty".to_string()),
        Some(reference) => {
            for (mode, slot, label) in [
                (DistanceMode::Cc2, &mut report.jsd_cc_2a, "JSD_CC_2A"),
                (DistanceMode::All12, &mut report.jsd_all_12a, "JSD_All_12A"),
            ] {
                match distance_jsd(generated, reference, mode) {
                    Ok(v) => *slot = Some(v),
                    Err(e) => warnings.push(format!("{label}: {e}")),
                }
            }
            let g = bond_length_profile(&with_inferred_bonds(generated))?;
            let r = bond_length_profile(&with_inferred_bonds(reference))?;
            match jsd_bl(&g, &r) {
                Ok(b) => {
                    report.jsd_bl = Some(b.mean);
                    report.jsd_bl_per_class = Some(b.per_class);
                }
                Err(e) => warnings.push(format!("JSD_BL: {e}")),
            }
        }
    }
    if let Some(pocket) = pocket {
        let per_ligand = generated
            .iter()
            .map(|m| count_clashes(m, pocket, radii, CLASH_TOLERANCE))
            .collect::<Result<Vec<_>>>()?;
        let total = per_ligand.iter().sum();
        report.clashes = Some(ClashSummary {
            mean: if per_ligand.is_empty() { 0.0 } else { total as f64 / per_ligand.len() as f64 },
            total,
            per_ligand,
        });
    }
    if let Some(table) = energies {
        report.affinity = Some(affinity_aggregate(table)?);
    }
    report.warnings = warnings;
    Ok(report)
}
