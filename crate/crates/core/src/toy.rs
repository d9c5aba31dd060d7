//! Small synthetic complexes and rigid motions for tests, diagnostics and
//! documentation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SculptError};
use crate::geometry::vec::{add, centroid, dist, norm, scale};
use crate::geometry::{approximate_ses, surface_features, RadiiTable, SesConfig};
use crate::io::{Atom3D, AtomVocabulary, Ligand, PocketAtom, ProteinPocket, SurfaceGraph, Vec3};

/// Rotation (row-major) followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: [[f64; 3]; 3],
    pub shift: Vec3,
}

impl RigidMotion {
    /// Uniformly random rotation and a shift with components in ±`max_shift`.
    pub fn random(rng: &mut impl Rng, max_shift: f64) -> Self {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        let rotation = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        let shift = std::array::from_fn(|_| rng.random_range(-max_shift..=max_shift));
        RigidMotion { rotation, shift }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        let r = &self.rotation;
        let rotated = std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]);
        add(rotated, self.shift)
    }
}

/// A pocket, its featurized surface and a bound ligand.
#[derive(Debug, Clone)]
pub struct ToyComplex {
    pub pocket: ProteinPocket,
    pub surface: SurfaceGraph,
    pub ligand: Ligand,
}

const RESIDUES: [&str; 8] = ["ALA", "ILE", "SER", "ASP", "LYS", "PHE", "GLY", "THR"];
const POCKET_ELEMENTS: [&str; 4] = ["C", "N", "O", "S"];

/// Ligand atoms random-walk with 1.5 Å steps (no two closer than 1.2 Å),
/// typed among the first three vocabulary classes; pocket atoms lie on a
/// 4.5–6 Å shell around the ligand, three atoms per residue. The surface is
/// the sphere-sampling approximation, sampled coarsely.
pub fn toy_complex(seed: u64, ligand_atoms: usize, pocket_atoms: usize, vocab: &AtomVocabulary) -> Result<ToyComplex> {
    if ligand_atoms == 0 || pocket_atoms == 0 {
        return Err(SculptError::validation("toy complex needs at least one ligand and one pocket atom"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> Vec3 {
        let v: Vec3 = std::array::from_fn(|_| StandardNormal.sample(rng));
        scale(v, 1.0 / norm(v).max(1e-12))
    };
    let mut lig: Vec<Vec3> = vec![[0.0; 3]];
    while lig.len() < ligand_atoms {
        let from = lig[rng.random_range(0..lig.len())];
        let p = add(from, scale(unit(&mut rng), 1.5));
        if lig.iter().all(|&q| dist(p, q) >= 1.2) {
            lig.push(p);
        }
    }
    let c = centroid(&lig);
    let lig: Vec<Vec3> = lig.into_iter().map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]]).collect();
    let types: Vec<usize> = (0..ligand_atoms).map(|_| rng.random_range(0..3.min(vocab.len()))).collect();
    let ligand = Ligand::new(lig.clone(), types, vocab.len())?;

    let reach = lig.iter().map(|&p| norm(p)).fold(0.0, f64::max);
    let mut atoms = Vec::with_capacity(pocket_atoms);
    for i in 0..pocket_atoms {
        let r = reach + rng.random_range(4.5..6.0);
        let position = scale(unit(&mut rng), r);
        atoms.push(PocketAtom {
            atom: Atom3D {
                element: POCKET_ELEMENTS[rng.random_range(0..POCKET_ELEMENTS.len())].to_string(),
                position,
            },
            residue_id: (i / 3) as i64 + 1,
            residue_name: RESIDUES[(i / 3) % RESIDUES.len()].to_string(),
        });
    }
    let pocket = ProteinPocket::new(atoms)?;
    let ses = SesConfig {
        samples_per_atom: 16,
        retain_radius: 7.0,
        ..SesConfig::default()
    };
    let geometry = approximate_ses(&pocket, &lig, &ses, &RadiiTable::default())?;
    let surface = surface_features(&geometry, &pocket)?.surface;
    Ok(ToyComplex {
        pocket,
        surface,
        ligand,
    })
}

impl ToyComplex {
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3 + Copy) -> ToyComplex {
        ToyComplex {
            pocket: self.pocket.map_positions(f),
            surface: self.surface.map_positions(f),
            ligand: self.ligand.map_positions(f),
        }
    }
}
