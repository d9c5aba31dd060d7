use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::histogram::{jsd, Binning, Histogram};
use crate::error::{Result, SculptError};
use crate::geometry::vec::dist;
use crate::io::Atom3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Aromatic,
}

/// The eight carbon-centred bond classes compared by the bond-length metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondClass {
    CCSingle,
    CCDouble,
    CCAromatic,
    CNSingle,
    CNDouble,
    CNAromatic,
    COSingle,
    CODouble,
}

impl BondClass {
    pub const ALL: [BondClass; 8] = [
        BondClass::CCSingle,
        BondClass::CCDouble,
        BondClass::CCAromatic,
        BondClass::CNSingle,
        BondClass::CNDouble,
        BondClass::CNAromatic,
        BondClass::COSingle,
        BondClass::CODouble,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BondClass::CCSingle => "C-C",
            BondClass::CCDouble => "C=C",
            BondClass::CCAromatic => "C:C",
            BondClass::CNSingle => "C-N",
            BondClass::CNDouble => "C=N",
            BondClass::CNAromatic => "C:N",
            BondClass::COSingle => "C-O",
            BondClass::CODouble => "C=O",
        }
    }

    /// Class of a bond between `a` and `b`, if it is one of the eight.
    pub fn of(a: &str, b: &str, order: BondOrder) -> Option<BondClass> {
        let other = match (a, b) {
            ("C", x) | (x, "C") => x,
            _ => return None,
        };
        use BondOrder::*;
        Some(match (other, order) {
            ("C", Single) => BondClass::CCSingle,
            ("C", Double) => BondClass::CCDouble,
            ("C", Aromatic) => BondClass::CCAromatic,
            ("N", Single) => BondClass::CNSingle,
            ("N", Double) => BondClass::CNDouble,
            ("N", Aromatic) => BondClass::CNAromatic,
            ("O", Single) => BondClass::COSingle,
            ("O", Double) => BondClass::CODouble,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondedMolecule {
    pub atoms: Vec<Atom3D>,
    pub bonds: Vec<Bond>,
}

/// Single-bond covalent radii in Å.
pub fn covalent_radius(element: &str) -> f64 {
    match element {
        "H" => 0.31,
        "C" => 0.76,
        "N" => 0.71,
        "O" => 0.66,
        "F" => 0.57,
        "P" => 1.07,
        "S" => 1.05,
        "Cl" => 1.02,
        "Br" => 1.20,
        "I" => 1.39,
        _ => 0.77,
    }
}

/// Factor on the covalent-radius sum below which two atoms count as bonded.
pub const BOND_FACTOR: f64 = 1.7;

/// Bonds from distances alone, every one tagged single: atoms closer than
/// `factor` times their covalent-radius sum.
pub fn infer_bonds(atoms: &[Atom3D], factor: f64) -> Vec<Bond> {
    let mut bonds = Vec::new();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let cutoff = factor * (covalent_radius(&atoms[i].element) + covalent_radius(&atoms[j].element));
            if dist(atoms[i].position, atoms[j].position) < cutoff {
                bonds.push(Bond {
                    i,
                    j,
                    order: BondOrder::Single,
                });
            }
        }
    }
    bonds
}

pub const BOND_BINNING: Binning = Binning::new(0.8, 2.0, 100);

/// Per-class bond-length histograms; classes without any in-range bond are
/// absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondProfile {
    pub classes: IndexMap<String, Histogram>,
}

pub fn bond_lengths(molecules: &[BondedMolecule]) -> Result<IndexMap<BondClass, Vec<f64>>> {
    let mut lengths: IndexMap<BondClass, Vec<f64>> = IndexMap::new();
    for m in molecules {
        for b in &m.bonds {
            if b.i >= m.atoms.len() || b.j >= m.atoms.len() || b.i == b.j {
                return Err(SculptError::validation(format!("bond ({}, {}) does not join two atoms", b.i, b.j)));
            }
            let (a, c) = (&m.atoms[b.i], &m.atoms[b.j]);
            if let Some(class) = BondClass::of(&a.element, &c.element, b.order) {
                lengths.entry(class).or_default().push(dist(a.position, c.position));
            }
        }
    }
    lengths.sort_keys();
    Ok(lengths)
}

pub fn bond_length_profile(molecules: &[BondedMolecule]) -> Result<BondProfile> {
    let mut classes = IndexMap::new();
    for (class, values) in bond_lengths(molecules)? {
        if let Ok(h) = BOND_BINNING.histogram(values) {
            classes.insert(class.label().to_string(), h);
        }
    }
    Ok(BondProfile { classes })
}

/// Per-class divergences and their mean. A class in only one profile
/// scores 1; a class in neither is skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondJsd {
    pub per_class: IndexMap<String, f64>,
    pub mean: f64,
}

pub fn jsd_bl(generated: &BondProfile, reference: &BondProfile) -> Result<BondJsd> {
    let mut per_class = IndexMap::new();
    for class in BondClass::ALL {
        let label = class.label();
        let v = match (generated.classes.get(label), reference.classes.get(label)) {
            (Some(g), Some(r)) => jsd(g, r)?,
            (None, None) => continue,
            _ => 1.0,
        };
        per_class.insert(label.to_string(), v);
    }
    if per_class.is_empty() {
        return Err(SculptError::validation("no bond class present in either profile"));
    }
    let mean = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(BondJsd { per_class, mean })
}
