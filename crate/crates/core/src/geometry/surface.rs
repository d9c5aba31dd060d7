//! Pocket selection, a sphere-sampling approximation of the solvent-excluded
//! surface, and per-vertex surface descriptors.

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::clash::RadiiTable;
use super::graph::knn_edges;
use super::vec::{add, cross, dist2, dot, norm, scale, sub};
use crate::error::{Result, SculptError};
use crate::io::{ProteinPocket, SurfaceFeature, SurfaceGeometry, SurfaceGraph, SurfaceVertex, Vec3};

/// Residue-level descriptors copied onto nearby surface vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueProperties {
    /// Kyte–Doolittle hydropathy divided by 4.5, so the scale spans [-1, 1].
    pub hydrophobicity: f64,
    pub polarity: f64,
    pub charge: f64,
}

/// Properties of a three-letter residue code; unknown residues are neutral.
pub fn residue_properties(name: &str) -> ResidueProperties {
    let upper = name.trim().to_ascii_uppercase();
    let kd = match upper.as_str() {
        "ILE" => 4.5,
        "VAL" => 4.2,
        "LEU" => 3.8,
        "PHE" => 2.8,
        "CYS" => 2.5,
        "MET" => 1.9,
        "ALA" => 1.8,
        "GLY" => -0.4,
        "THR" => -0.7,
        "SER" => -0.8,
        "TRP" => -0.9,
        "TYR" => -1.3,
        "PRO" => -1.6,
        "HIS" => -3.2,
        "GLU" | "GLN" | "ASP" | "ASN" => -3.5,
        "LYS" => -3.9,
        "ARG" => -4.5,
        _ => 0.0,
    };
    let polar = matches!(
        upper.as_str(),
        "SER" | "THR" | "ASN" | "GLN" | "TYR" | "CYS" | "HIS" | "LYS" | "ARG" | "ASP" | "GLU"
    );
    let charge = match upper.as_str() {
        "ASP" | "GLU" => -1.0,
        "LYS" | "ARG" | "HIS" => 1.0,
        _ => 0.0,
    };
    ResidueProperties {
        hydrophobicity: kd / 4.5,
        polarity: if polar { 1.0 } else { 0.0 },
        charge,
    }
}

/// Default residue selection radius around the ligand, in Å.
pub const POCKET_CUTOFF: f64 = 10.0;

/// Whole residues with any atom within `cutoff` of any ligand atom.
pub fn select_pocket_residues(protein: &ProteinPocket, ligand: &[Vec3], cutoff: f64) -> Result<ProteinPocket> {
    let c2 = cutoff * cutoff;
    let keep: HashSet<i64> = protein
        .atoms()
        .iter()
        .filter(|a| ligand.iter().any(|&l| dist2(a.atom.position, l) <= c2))
        .map(|a| a.residue_id)
        .collect();
    let atoms: Vec<_> = protein
        .atoms()
        .iter()
        .filter(|a| keep.contains(&a.residue_id))
        .cloned()
        .collect();
    if atoms.is_empty() {
        return Err(SculptError::validation(format!(
            "no residues within cutoff ({cutoff} Å of the ligand)"
        )));
    }
    ProteinPocket::new(atoms)
}

/// `n` nearly uniform unit vectors on a golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SesConfig {
    pub probe_radius: f64,
    pub samples_per_atom: usize,
    /// Kept vertices lie within this distance of some ligand atom.
    pub retain_radius: f64,
    pub mesh_k: usize,
}

impl Default for SesConfig {
    fn default() -> Self {
        SesConfig {
            probe_radius: 1.4,
            samples_per_atom: 64,
            retain_radius: 5.0,
            mesh_k: 3,
        }
    }
}

const SURFACE_EPS: f64 = 1e-9;

/// Sample points on every inflated atom sphere that lie outside all other
/// inflated spheres, with the owning atom index.
///
/// A point exactly on another sphere counts as buried only when that sphere
/// has the lower index, so coincident atoms contribute one copy of their
/// shared sphere.
pub fn exposed_sphere_points(
    pocket: &ProteinPocket,
    radii: &RadiiTable,
    probe_radius: f64,
    samples_per_atom: usize,
) -> Result<Vec<(Vec3, usize)>> {
    let centers = pocket.positions();
    let inflated = pocket
        .atoms()
        .iter()
        .map(|a| radii.radius(&a.atom.element).map(|r| r + probe_radius))
        .collect::<Result<Vec<_>>>()?;
    let dirs = fibonacci_sphere(samples_per_atom);
    let mut out = Vec::new();
    for (i, (&c, &r)) in centers.iter().zip(&inflated).enumerate() {
        for &u in &dirs {
            let q = add(c, scale(u, r));
            let buried = centers.iter().zip(&inflated).enumerate().any(|(j, (&cj, &rj))| {
                if j == i {
                    return false;
                }
                let d = dist2(q, cj).sqrt();
                d < rj - SURFACE_EPS || ((d - rj).abs() <= SURFACE_EPS && j < i)
            });
            if !buried {
                out.push((q, i));
            }
        }
    }
    Ok(out)
}

/// Exposed sphere points near the ligand with k-NN mesh connectivity.
///
/// An empty `ligand` disables the proximity filter.
pub fn approximate_ses(
    pocket: &ProteinPocket,
    ligand: &[Vec3],
    config: &SesConfig,
    radii: &RadiiTable,
) -> Result<SurfaceGeometry> {
    if !(config.probe_radius >= 0.0) || config.samples_per_atom == 0 {
        return Err(SculptError::config("probe radius must be >= 0 and samples per atom >= 1"));
    }
    let r2 = config.retain_radius * config.retain_radius;
    let positions: Vec<Vec3> = exposed_sphere_points(pocket, radii, config.probe_radius, config.samples_per_atom)?
        .into_iter()
        .map(|(p, _)| p)
        .filter(|&p| ligand.is_empty() || ligand.iter().any(|&l| dist2(p, l) <= r2))
        .collect();
    if positions.is_empty() {
        return Err(SculptError::validation("surface approximation left zero vertices"));
    }
    let k = config.mesh_k.min(positions.len() - 1);
    let mut seen = HashSet::new();
    let edges = knn_edges(&positions, k)?
        .into_iter()
        .map(|(i, j)| (i.min(j), i.max(j)))
        .filter(|e| seen.insert(*e))
        .collect();
    Ok(SurfaceGeometry { positions, edges })
}

/// A featurized surface and the number of vertices whose curvature could
/// not be fitted (their shape index is 0).
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedSurface {
    pub surface: SurfaceGraph,
    pub curvature_fallbacks: usize,
}

/// Minimum neighbourhood size for the quadric fit.
pub const MIN_FIT_NEIGHBOURS: usize = 5;

/// Shape index from principal curvatures `k1 <= k2` (positive = convex).
///
/// Planar points give 0; umbilic non-planar points give the sign of the
/// mean curvature, the limit of the formula as `k2 - k1 -> 0`.
pub fn shape_index(k1: f64, k2: f64) -> f64 {
    let (k1, k2) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
    if k2 - k1 < 1e-6 {
        if k1.abs() + k2.abs() < 1e-6 {
            return 0.0;
        }
        return (k1 + k2).signum();
    }
    (2.0 / std::f64::consts::PI) * ((k1 + k2) / (k2 - k1)).atan()
}

/// Principal curvatures at `p` from a quadric height-field fit over
/// `neighbours`, taking `outward` as the side the surface faces. Returns
/// `None` when the fit is under-determined.
pub fn fit_principal_curvatures(p: Vec3, neighbours: &[Vec3], outward: Vec3) -> Option<(f64, f64)> {
    if neighbours.len() < MIN_FIT_NEIGHBOURS {
        return None;
    }
    // Normal: least-variance direction of the neighbourhood.
    let all: Vec<Vec3> = std::iter::once(p).chain(neighbours.iter().copied()).collect();
    let c = super::vec::centroid(&all);
    let mut cov = Matrix3::zeros();
    for &q in &all {
        let d = Vector3::from(sub(q, c));
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let col = eig.eigenvectors.column(imin);
    let mut n = [col[0], col[1], col[2]];
    if dot(n, outward) < 0.0 {
        n = scale(n, -1.0);
    }
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = {
        let t = cross(n, helper);
        scale(t, 1.0 / norm(t))
    };
    let t2 = cross(n, t1);

    let m = neighbours.len();
    let mut a = DMatrix::zeros(m, 5);
    let mut b = DVector::zeros(m);
    for (r, &q) in neighbours.iter().enumerate() {
        let d = sub(q, p);
        let (u, v, h) = (dot(d, t1), dot(d, t2), dot(d, n));
        a[(r, 0)] = u * u;
        a[(r, 1)] = u * v;
        a[(r, 2)] = v * v;
        a[(r, 3)] = u;
        a[(r, 4)] = v;
        b[r] = h;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < 1e-10 * smax {
        return None;
    }
    let x = svd.solve(&b, 0.0).ok()?;
    let (qa, qb, qc, qd, qe) = (x[0], x[1], x[2], x[3], x[4]);
    // Shape operator of the graph h(u, v) at the origin.
    let w = (1.0 + qd * qd + qe * qe).sqrt();
    let (e, f, g) = (1.0 + qd * qd, qd * qe, 1.0 + qe * qe);
    let (l, mm, nn) = (2.0 * qa / w, qb / w, 2.0 * qc / w);
    let det1 = e * g - f * f;
    let s11 = (g * l - f * mm) / det1;
    let s12 = (g * mm - f * nn) / det1;
    let s21 = (e * mm - f * l) / det1;
    let s22 = (e * nn - f * mm) / det1;
    let half_trace = 0.5 * (s11 + s22);
    let det = s11 * s22 - s12 * s21;
    let disc = (half_trace * half_trace - det).max(0.0).sqrt();
    // The height rises towards the outward normal, so a convex cap has
    // negative height curvature; flip the sign so caps are positive.
    let (l1, l2) = (-(half_trace + disc), -(half_trace - disc));
    Some((l1.min(l2), l1.max(l2)))
}

/// Vertices within two mesh hops of each vertex, excluding itself.
pub fn two_ring(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(i, j) in edges {
        adj[i].insert(j);
        adj[j].insert(i);
    }
    (0..n)
        .map(|i| {
            let mut ring: BTreeSet<usize> = adj[i].clone();
            for &j in &adj[i] {
                ring.extend(adj[j].iter().copied());
            }
            ring.remove(&i);
            ring.into_iter().collect()
        })
        .collect()
}

/// Fills the four descriptors of every vertex: curvature-based shape index
/// from the mesh neighbourhood, and residue properties from the residue of
/// the nearest pocket atom. Normals are oriented away from that atom.
pub fn surface_features(geometry: &SurfaceGeometry, pocket: &ProteinPocket) -> Result<FeaturizedSurface> {
    geometry.validate()?;
    let atoms = pocket.atoms();
    let rings = two_ring(geometry.positions.len(), &geometry.edges);
    let mut cache: HashMap<&str, ResidueProperties> = HashMap::new();
    let mut fallbacks = 0;
    let mut vertices = Vec::with_capacity(geometry.positions.len());
    for (i, &p) in geometry.positions.iter().enumerate() {
        let nearest = atoms
            .iter()
            .enumerate()
            .min_by(|a, b| dist2(p, a.1.atom.position).total_cmp(&dist2(p, b.1.atom.position)))
            .map(|(k, _)| k)
            .expect("pocket is never empty");
        let outward = sub(p, atoms[nearest].atom.position);
        let neighbours: Vec<Vec3> = rings[i].iter().map(|&j| geometry.positions[j]).collect();
        let si = match fit_principal_curvatures(p, &neighbours, outward) {
            Some((k1, k2)) => shape_index(k1, k2),
            None => {
                fallbacks += 1;
                0.0
            }
        };
        let name = atoms[nearest].residue_name.as_str();
        let props = *cache.entry(name).or_insert_with(|| residue_properties(name));
        vertices.push(SurfaceVertex {
            position: p,
            feature: SurfaceFeature {
                shape_index: si.clamp(-1.0, 1.0),
                hydrophobicity: props.hydrophobicity,
                polarity: props.polarity,
                charge: props.charge,
            },
        });
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} surface vertices had too few neighbours for a curvature fit");
    }
    Ok(FeaturizedSurface {
        surface: SurfaceGraph::new(vertices, geometry.edges.clone())?,
        curvature_fallbacks: fallbacks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Atom3D, PocketAtom};

    fn pocket(atoms: &[(&str, Vec3, i64, &str)]) -> ProteinPocket {
        ProteinPocket::new(
            atoms
                .iter()
                .map(|&(el, p, id, name)| PocketAtom {
                    atom: Atom3D {
                        element: el.into(),
                        position: p,
                    },
                    residue_id: id,
                    residue_name: name.into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn kyte_doolittle_extremes() {
        assert_eq!(residue_properties("ILE").hydrophobicity, 1.0);
        assert_eq!(residue_properties("arg").hydrophobicity, -1.0);
        let asp = residue_properties("ASP");
        assert_eq!((asp.polarity, asp.charge), (1.0, -1.0));
        let ala = residue_properties("ALA");
        assert_eq!((ala.polarity, ala.charge), (0.0, 0.0));
    }

    #[test]
    fn residue_cutoff_boundary() {
        let p = pocket(&[("C", [9.9, 0.0, 0.0], 1, "ALA"), ("C", [0.0, 10.1, 0.0], 2, "GLY")]);
        let sel = select_pocket_residues(&p, &[[0.0; 3]], POCKET_CUTOFF).unwrap();
        assert_eq!(sel.len(), 1);
        assert_eq!(sel.atoms()[0].residue_id, 1);
        let err = select_pocket_residues(&p, &[[50.0, 50.0, 50.0]], POCKET_CUTOFF).unwrap_err();
        assert!(err.to_string().contains("no residues within cutoff"));
    }

    #[test]
    fn residues_kept_whole() {
        let p = pocket(&[("C", [1.0, 0.0, 0.0], 4, "SER"), ("O", [30.0, 0.0, 0.0], 4, "SER")]);
        assert_eq!(select_pocket_residues(&p, &[[0.0; 3]], 10.0).unwrap().len(), 2);
    }

    #[test]
    fn isolated_atom_fully_exposed() {
        let p = pocket(&[("C", [0.0; 3], 1, "ALA")]);
        let pts = exposed_sphere_points(&p, &RadiiTable::default(), 1.4, 64).unwrap();
        assert_eq!(pts.len(), 64);
        for (q, _) in pts {
            assert!((norm(q) - 3.1).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_atoms_share_one_sphere() {
        let p = pocket(&[("C", [1.0, 2.0, 3.0], 1, "ALA"), ("C", [1.0, 2.0, 3.0], 1, "ALA")]);
        let pts = exposed_sphere_points(&p, &RadiiTable::default(), 1.4, 64).unwrap();
        assert_eq!(pts.len(), 64);
        assert!(pts.iter().all(|&(_, owner)| owner == 0));
    }

    #[test]
    fn shape_index_values() {
        assert_eq!(shape_index(0.0, 0.0), 0.0);
        assert_eq!(shape_index(1.0, 1.0), 1.0);
        assert_eq!(shape_index(-1.0, -1.0), -1.0);
        assert!((shape_index(-1.0, 1.0)).abs() < 1e-15);
        assert!((shape_index(0.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn plane_has_zero_shape_index() {
        let mut positions = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                positions.push([i as f64, j as f64, 0.0]);
            }
        }
        let k = 4;
        let mut seen = HashSet::new();
        let edges = knn_edges(&positions, k)
            .unwrap()
            .into_iter()
            .map(|(i, j)| (i.min(j), i.max(j)))
            .filter(|e| seen.insert(*e))
            .collect();
        let g = SurfaceGeometry { positions, edges };
        let p = pocket(&[("C", [2.5, 2.5, -3.0], 1, "ILE")]);
        let f = surface_features(&g, &p).unwrap();
        assert_eq!(f.curvature_fallbacks, 0);
        for v in f.surface.vertices() {
            assert_eq!(v.feature.shape_index, 0.0);
            assert_eq!(v.feature.hydrophobicity, 1.0);
        }
    }

    #[test]
    fn sphere_is_a_cap() {
        let positions = fibonacci_sphere(400);
        let mut seen = HashSet::new();
        let edges = knn_edges(&positions, 6)
            .unwrap()
            .into_iter()
            .map(|(i, j)| (i.min(j), i.max(j)))
            .filter(|e| seen.insert(*e))
            .collect();
        let g = SurfaceGeometry { positions, edges };
        let p = pocket(&[("C", [0.0; 3], 1, "ALA")]);
        let f = surface_features(&g, &p).unwrap();
        for v in f.surface.vertices() {
            assert!((v.feature.shape_index - 1.0).abs() < 0.15, "{}", v.feature.shape_index);
        }
    }

    #[test]
    fn sparse_vertices_fall_back() {
        let g = SurfaceGeometry {
            positions: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            edges: vec![(0, 1), (1, 2)],
        };
        let p = pocket(&[("C", [0.0, 0.0, -2.0], 1, "LYS")]);
        let f = surface_features(&g, &p).unwrap();
        assert_eq!(f.curvature_fallbacks, 3);
        assert!(f.surface.vertices().iter().all(|v| v.feature.charge == 1.0));
    }
}
