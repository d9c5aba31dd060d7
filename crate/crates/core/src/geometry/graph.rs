//! Neighbour graphs: k-NN, the unified surface/ligand graph and local
//! distance-binned edges.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::vec::dist2;
use crate::error::{Result, SculptError};
use crate::io::{SurfaceGraph, Vec3};

/// Directed k-NN edges `(i, j)`: `j` is one of the `k` points nearest to `i`.
///
/// Edges for each `i` are listed nearest first; equal distances are ordered
/// by the lower index.
pub fn knn_edges(points: &[Vec3], k: usize) -> Result<Vec<(usize, usize)>> {
    let n = points.len();
    if k >= n {
        return Err(SculptError::validation(format!(
            "k-NN needs k < N (k = {k}, N = {n})"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        others.clear();
        others.extend((0..n).filter(|&j| j != i).map(|j| (dist2(points[i], points[j]), j)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k > 0 && k < others.len() {
            others.select_nth_unstable_by(k - 1, cmp);
        }
        let nearest = &mut others[..k];
        nearest.sort_unstable_by(cmp);
        edges.extend(nearest.iter().map(|&(_, j)| (i, j)));
    }
    Ok(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Surface,
    Ligand,
}

/// Edge categories of the unified graph, named `source–target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    SurfaceMesh,
    SurfaceSurfaceKnn,
    SurfaceLigandKnn,
    LigandSurfaceKnn,
    LigandLigandKnn,
    SelfLoop,
}

impl EdgeType {
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; Self::COUNT] {
        let mut v = [0.0; Self::COUNT];
        v[self.index()] = 1.0;
        v
    }

    fn knn(source: NodeKind, target: NodeKind) -> Self {
        match (source, target) {
            (NodeKind::Surface, NodeKind::Surface) => EdgeType::SurfaceSurfaceKnn,
            (NodeKind::Surface, NodeKind::Ligand) => EdgeType::SurfaceLigandKnn,
            (NodeKind::Ligand, NodeKind::Surface) => EdgeType::LigandSurfaceKnn,
            (NodeKind::Ligand, NodeKind::Ligand) => EdgeType::LigandLigandKnn,
        }
    }
}

/// A message path from `source` to `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnifiedEdge {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
    pub edge_type: EdgeType,
}

/// Surface vertices (indices `0..n_surface`) followed by ligand atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedGraph {
    pub n_surface: usize,
    pub n_ligand: usize,
    pub positions: Vec<Vec3>,
    pub edges: Vec<UnifiedEdge>,
}

impl UnifiedGraph {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.n_surface {
            NodeKind::Surface
        } else {
            NodeKind::Ligand
        }
    }
}

/// Mesh edges in both directions, k-NN edges over all nodes (each node
/// receives messages from its `k` nearest others) and one self-loop per
/// node. A pair that is both a mesh and a k-NN edge keeps the mesh label.
pub fn build_unified_graph(surface: &SurfaceGraph, ligand: &[Vec3], k: usize) -> Result<UnifiedGraph> {
    if let Some(i) = ligand.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(SculptError::validation(format!("ligand atom {i}: non-finite position")));
    }
    let n_surface = surface.len();
    let mut positions = surface.positions();
    positions.extend_from_slice(ligand);
    let kind = |i: usize| if i < n_surface { NodeKind::Surface } else { NodeKind::Ligand };

    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |edges: &mut Vec<UnifiedEdge>, s: usize, t: usize, ty: EdgeType| {
        if seen.insert((s, t)) {
            edges.push(UnifiedEdge {
                source: s,
                target: t,
                distance: dist2(positions[s], positions[t]).sqrt(),
                edge_type: ty,
            });
        }
    };
    for &(i, j) in surface.edges() {
        push(&mut edges, i, j, EdgeType::SurfaceMesh);
        push(&mut edges, j, i, EdgeType::SurfaceMesh);
    }
    for (m, j) in knn_edges(&positions, k)? {
        push(&mut edges, j, m, EdgeType::knn(kind(j), kind(m)));
    }
    for i in 0..positions.len() {
        push(&mut edges, i, i, EdgeType::SelfLoop);
    }
    Ok(UnifiedGraph {
        n_surface,
        n_ligand: ligand.len(),
        positions,
        edges,
    })
}

/// Upper bounds of the local distance bins, in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalThresholds(pub [f64; 3]);

impl Default for LocalThresholds {
    fn default() -> Self {
        LocalThresholds([2.7, 3.4, 5.0])
    }
}

impl LocalThresholds {
    pub fn validate(&self) -> Result<()> {
        let t = self.0;
        if !(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2] && t[2].is_finite()) {
            return Err(SculptError::config("local thresholds must be positive and increasing"));
        }
        Ok(())
    }

    /// Smallest bin whose threshold is at least `d`.
    pub fn bin(&self, d: f64) -> Option<usize> {
        self.0.iter().position(|&t| d <= t)
    }

    pub fn cutoff(&self) -> f64 {
        self.0[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalEdge {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
    pub bin: usize,
}

/// Ligand atoms (indices `0..n_ligand`) followed by protein atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEdgeSet {
    pub n_ligand: usize,
    pub n_protein: usize,
    pub edges: Vec<LocalEdge>,
}

impl LocalEdgeSet {
    pub fn is_ligand(&self, node: usize) -> bool {
        node < self.n_ligand
    }
}

/// Every ordered pair with at least one ligand endpoint and distance within
/// the outer threshold, tagged with its exclusive bin. Protein–protein pairs
/// are not included.
pub fn build_local_edges(
    ligand: &[Vec3],
    protein: &[Vec3],
    thresholds: &LocalThresholds,
) -> Result<LocalEdgeSet> {
    thresholds.validate()?;
    let nl = ligand.len();
    let node = |i: usize| if i < nl { ligand[i] } else { protein[i - nl] };
    let total = nl + protein.len();
    let mut edges = Vec::new();
    let mut add = |s: usize, t: usize, d: f64| {
        if let Some(bin) = thresholds.bin(d) {
            edges.push(LocalEdge {
                source: s,
                target: t,
                distance: d,
                bin,
            });
        }
    };
    for a in 0..nl {
        for b in 0..total {
            if a == b {
                continue;
            }
            let d = dist2(node(a), node(b)).sqrt();
            add(b, a, d);
            if b >= nl {
                add(a, b, d);
            }
        }
    }
    Ok(LocalEdgeSet {
        n_ligand: nl,
        n_protein: protein.len(),
        edges,
    })
}
