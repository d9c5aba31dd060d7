use serde::{Deserialize, Serialize};

use crate::error::{Result, SculptError};

/// Cartesian position in Ångström.
pub type Vec3 = [f64; 3];

/// Ordered element vocabulary for ligand atom types.
///
/// The final entry is always the catch-all "other" class, written to files
/// as `X`. Lookup is case-insensitive, so `CL`, `cl` and `Cl` all resolve to
/// the same class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomVocabulary {
    symbols: Vec<String>,
}

/// Symbol used for the catch-all class.
pub const OTHER_SYMBOL: &str = "X";

impl Default for AtomVocabulary {
    fn default() -> Self {
        AtomVocabulary::new(["C", "N", "O", "F", "P", "S", "Cl", "Br"]).expect("default vocabulary")
    }
}

impl AtomVocabulary {
    /// Builds a vocabulary from explicit element symbols; the "other" class
    /// is appended automatically.
    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for s in symbols {
            let s = s.into();
            if s.is_empty() || s.eq_ignore_ascii_case(OTHER_SYMBOL) {
                return Err(SculptError::config(format!("invalid vocabulary symbol {s:?}")));
            }
            if out.iter().any(|o| o.eq_ignore_ascii_case(&s)) {
                return Err(SculptError::config(format!("duplicate vocabulary symbol {s:?}")));
            }
            out.push(s);
        }
        out.push(OTHER_SYMBOL.to_string());
        Ok(AtomVocabulary { symbols: out })
    }

    /// Number of classes including "other".
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn other_index(&self) -> usize {
        self.symbols.len() - 1
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Class index of `element`, and whether it was a known symbol.
    pub fn lookup(&self, element: &str) -> (usize, bool) {
        let known = &self.symbols[..self.symbols.len() - 1];
        match known.iter().position(|s| s.eq_ignore_ascii_case(element)) {
            Some(i) => (i, true),
            None => (self.other_index(), false),
        }
    }

    /// One-hot row for `element`.
    pub fn one_hot(&self, element: &str) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        row[self.lookup(element).0] = 1.0;
        row
    }
}

/// An element symbol at a position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom3D {
    pub element: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocketAtom {
    pub atom: Atom3D,
    pub residue_id: i64,
    pub residue_name: String,
}

/// Protein atoms with residue annotations. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ProteinPocket {
    atoms: Vec<PocketAtom>,
}

impl ProteinPocket {
    pub fn new(atoms: Vec<PocketAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(SculptError::validation("pocket must contain at least one atom"));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !a.atom.position.iter().all(|c| c.is_finite()) {
                return Err(SculptError::validation(format!(
                    "pocket atom {i}: non-finite position"
                )));
            }
            if a.residue_name.trim().is_empty() {
                return Err(SculptError::validation(format!(
                    "pocket atom {i}: missing residue annotation"
                )));
            }
        }
        Ok(ProteinPocket { atoms })
    }

    pub fn atoms(&self) -> &[PocketAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.atoms.iter().map(|a| a.atom.position).collect()
    }

    /// Returns a copy with every position mapped through `f`.
    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> ProteinPocket {
        let atoms = self
            .atoms
            .iter()
            .map(|a| PocketAtom {
                atom: Atom3D {
                    element: a.atom.element.clone(),
                    position: f(a.atom.position),
                },
                residue_id: a.residue_id,
                residue_name: a.residue_name.clone(),
            })
            .collect();
        ProteinPocket { atoms }
    }
}

/// Per-vertex surface descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFeature {
    /// Curvature-derived shape index in [-1, 1].
    pub shape_index: f64,
    pub hydrophobicity: f64,
    /// 0 or 1.
    pub polarity: f64,
    /// -1, 0 or +1.
    pub charge: f64,
}

impl SurfaceFeature {
    pub fn as_array(&self) -> [f64; 4] {
        [self.shape_index, self.hydrophobicity, self.polarity, self.charge]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceVertex {
    pub position: Vec3,
    pub feature: SurfaceFeature,
}

/// Surface vertices without descriptors, plus undirected mesh edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry {
    pub positions: Vec<Vec3>,
    pub edges: Vec<(usize, usize)>,
}

impl SurfaceGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(SculptError::validation("surface has no vertices"));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(SculptError::validation(format!(
                    "surface vertex {i}: non-finite position"
                )));
            }
        }
        validate_edges(&self.edges, self.positions.len())
    }
}

fn validate_edges(edges: &[(usize, usize)], n: usize) -> Result<()> {
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(SculptError::validation(format!(
                "edge index out of range: ({i}, {j}) with {n} vertices"
            )));
        }
        if i == j {
            return Err(SculptError::validation(format!("self-loop mesh edge at vertex {i}")));
        }
    }
    Ok(())
}

/// Featurized surface graph. Mesh edges are stored once per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGraph {
    vertices: Vec<SurfaceVertex>,
    edges: Vec<(usize, usize)>,
}

impl SurfaceGraph {
    pub fn new(vertices: Vec<SurfaceVertex>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(SculptError::validation("surface has no vertices"));
        }
        for (i, v) in vertices.iter().enumerate() {
            let f = v.feature.as_array();
            if !v.position.iter().chain(f.iter()).all(|c| c.is_finite()) {
                return Err(SculptError::validation(format!(
                    "surface vertex {i}: non-finite component"
                )));
            }
            if !(-1.0..=1.0).contains(&v.feature.shape_index) {
                return Err(SculptError::validation(format!(
                    "surface vertex {i}: shape index {} outside [-1, 1]",
                    v.feature.shape_index
                )));
            }
        }
        validate_edges(&edges, vertices.len())?;
        // Canonical undirected storage: (min, max), deduplicated, in first-seen order.
        let mut seen = std::collections::HashSet::new();
        let edges = edges
            .into_iter()
            .map(|(i, j)| (i.min(j), i.max(j)))
            .filter(|e| seen.insert(*e))
            .collect();
        Ok(SurfaceGraph { vertices, edges })
    }

    pub fn vertices(&self) -> &[SurfaceVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.vertices.iter().map(|v| v.position).collect()
    }

    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> SurfaceGraph {
        SurfaceGraph {
            vertices: self
                .vertices
                .iter()
                .map(|v| SurfaceVertex {
                    position: f(v.position),
                    feature: v.feature,
                })
                .collect(),
            edges: self.edges.clone(),
        }
    }
}

/// Ligand point cloud: positions plus vocabulary class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Ligand {
    positions: Vec<Vec3>,
    types: Vec<usize>,
}

impl Ligand {
    /// Validates against a vocabulary of `num_types` classes.
    pub fn new(positions: Vec<Vec3>, types: Vec<usize>, num_types: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(SculptError::validation("ligand must contain at least one atom"));
        }
        if positions.len() != types.len() {
            return Err(SculptError::dimension(
                "ligand types",
                positions.len(),
                types.len(),
            ));
        }
        for (i, (p, &t)) in positions.iter().zip(&types).enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(SculptError::validation(format!("ligand atom {i}: non-finite position")));
            }
            if t >= num_types {
                return Err(SculptError::validation(format!(
                    "ligand atom {i}: type index {t} outside vocabulary of {num_types}"
                )));
            }
        }
        for i in 0..positions.len() {
            for j in 0..i {
                if positions[i] == positions[j] {
                    return Err(SculptError::validation(format!(
                        "duplicate atom position: atoms {j} and {i}"
                    )));
                }
            }
        }
        Ok(Ligand { positions, types })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn map_positions(&self, f: impl Fn(Vec3) -> Vec3) -> Ligand {
        Ligand {
            positions: self.positions.iter().map(|&p| f(p)).collect(),
            types: self.types.clone(),
        }
    }

    /// Element symbols of every atom.
    pub fn elements<'v>(&self, vocab: &'v AtomVocabulary) -> Vec<&'v str> {
        self.types
            .iter()
            .map(|&t| vocab.symbol(t).unwrap_or(OTHER_SYMBOL))
            .collect()
    }
}
