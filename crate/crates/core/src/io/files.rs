//! Text and JSON formats for pockets, surfaces and ligands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::types::{
    Atom3D, AtomVocabulary, Ligand, PocketAtom, ProteinPocket, SurfaceFeature, SurfaceGeometry,
    SurfaceGraph, SurfaceVertex, Vec3,
};
use crate::error::{Result, SculptError};
use crate::geometry;

#[derive(Debug, Serialize, Deserialize)]
struct PocketFile {
    atoms: Vec<PocketAtomRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PocketAtomRecord {
    el: String,
    x: f64,
    y: f64,
    z: f64,
    res_id: i64,
    res_name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SurfaceFile {
    vertices: Vec<SurfaceVertexRecord>,
    edges: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SurfaceVertexRecord {
    x: f64,
    y: f64,
    z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    si: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chg: Option<f64>,
}

/// A surface as read from disk: either fully featurized or geometry only.
#[derive(Debug, Clone)]
pub enum SurfaceInput {
    Featurized(SurfaceGraph),
    GeometryOnly(SurfaceGeometry),
}

/// Everything [`load_complex`] produces.
#[derive(Debug, Clone)]
pub struct LoadedComplex {
    pub pocket: ProteinPocket,
    pub surface: SurfaceGraph,
    pub ligand: Option<Ligand>,
    /// Ligand elements that were mapped onto the "other" class.
    pub unknown_elements: usize,
    /// Surface vertices whose shape index fell back to zero.
    pub curvature_fallbacks: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SculptError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| SculptError::io(path, e))
}

fn json_error(path: &Path, e: serde_json::Error) -> SculptError {
    SculptError::Parse {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    }
}

pub fn parse_pocket(text: &str, origin: &Path) -> Result<ProteinPocket> {
    let file: PocketFile = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
    let atoms = file
        .atoms
        .into_iter()
        .map(|r| PocketAtom {
            atom: Atom3D {
                element: r.el,
                position: [r.x, r.y, r.z],
            },
            residue_id: r.res_id,
            residue_name: r.res_name,
        })
        .collect();
    ProteinPocket::new(atoms)
}

pub fn load_pocket(path: &Path) -> Result<ProteinPocket> {
    parse_pocket(&read(path)?, path)
}

pub fn pocket_to_json(pocket: &ProteinPocket) -> String {
    let file = PocketFile {
        atoms: pocket
            .atoms()
            .iter()
            .map(|a| PocketAtomRecord {
                el: a.atom.element.clone(),
                x: a.atom.position[0],
                y: a.atom.position[1],
                z: a.atom.position[2],
                res_id: a.residue_id,
                res_name: a.residue_name.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("pocket serializes")
}

pub fn write_pocket(pocket: &ProteinPocket, path: &Path) -> Result<()> {
    write(path, &pocket_to_json(pocket))
}

pub fn parse_surface(text: &str, origin: &Path) -> Result<SurfaceInput> {
    let file: SurfaceFile = serde_json::from_str(text).map_err(|e| json_error(origin, e))?;
    let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
    let featurized = file
        .vertices
        .iter()
        .all(|v| v.si.is_some() && v.hyd.is_some() && v.pol.is_some() && v.chg.is_some());
    if featurized {
        let vertices = file
            .vertices
            .iter()
            .map(|v| SurfaceVertex {
                position: [v.x, v.y, v.z],
                feature: SurfaceFeature {
                    shape_index: v.si.unwrap_or_default(),
                    hydrophobicity: v.hyd.unwrap_or_default(),
                    polarity: v.pol.unwrap_or_default(),
                    charge: v.chg.unwrap_or_default(),
                },
            })
            .collect();
        Ok(SurfaceInput::Featurized(SurfaceGraph::new(vertices, edges)?))
    } else {
        let geometry = SurfaceGeometry {
            positions: file.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
            edges,
        };
        geometry.validate()?;
        Ok(SurfaceInput::GeometryOnly(geometry))
    }
}

pub fn load_surface(path: &Path) -> Result<SurfaceInput> {
    parse_surface(&read(path)?, path)
}

pub fn surface_to_json(surface: &SurfaceGraph) -> String {
    let file = SurfaceFile {
        vertices: surface
            .vertices()
            .iter()
            .map(|v| SurfaceVertexRecord {
                x: v.position[0],
                y: v.position[1],
                z: v.position[2],
                si: Some(v.feature.shape_index),
                hyd: Some(v.feature.hydrophobicity),
                pol: Some(v.feature.polarity),
                chg: Some(v.feature.charge),
            })
            .collect(),
        edges: surface.edges().iter().map(|&(i, j)| [i, j]).collect(),
    };
    serde_json::to_string_pretty(&file).expect("surface serializes")
}

pub fn write_surface(surface: &SurfaceGraph, path: &Path) -> Result<()> {
    write(path, &surface_to_json(surface))
}

/// Parses the plain-text ligand format. Returns the ligand and the number of
/// elements that were mapped onto the "other" class.
pub fn parse_ligand(text: &str, vocab: &AtomVocabulary, origin: &Path) -> Result<(Ligand, usize)> {
    let file = origin.display().to_string();
    let err = |line: usize, message: String| SculptError::Parse {
        file: file.clone(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty ligand file".into()))?;
    let count: usize = header
        .parse()
        .map_err(|_| err(1, format!("expected atom count, found {header:?}")))?;
    let mut positions: Vec<Vec3> = Vec::with_capacity(count);
    let mut types = Vec::with_capacity(count);
    let mut unknown = 0;
    for (line_no, line) in lines {
        if line.is_empty() {
            continue;
        }
        if positions.len() == count {
            return Err(err(line_no, "more atom lines than the declared count".into()));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(line_no, format!("expected 'EL x y z', found {line:?}")));
        }
        let mut p = [0.0; 3];
        for (k, field) in fields[1..].iter().enumerate() {
            p[k] = field
                .parse()
                .map_err(|_| err(line_no, format!("field {}: not a number: {field:?}", k + 2)))?;
        }
        let (t, known) = vocab.lookup(fields[0]);
        if !known {
            unknown += 1;
        }
        positions.push(p);
        types.push(t);
    }
    if positions.len() != count {
        return Err(err(
            text.lines().count(),
            format!("declared {count} atoms, found {}", positions.len()),
        ));
    }
    Ok((Ligand::new(positions, types, vocab.len())?, unknown))
}

pub fn load_ligand(path: &Path, vocab: &AtomVocabulary) -> Result<(Ligand, usize)> {
    parse_ligand(&read(path)?, vocab, path)
}

/// Serializes a ligand: atom count, then one `EL x y z` line per atom with
/// six decimal places.
pub fn ligand_to_text(ligand: &Ligand, vocab: &AtomVocabulary) -> Result<String> {
    let mut out = format!("{}\n", ligand.len());
    for (p, &t) in ligand.positions().iter().zip(ligand.types()) {
        let symbol = vocab.symbol(t).ok_or_else(|| {
            SculptError::validation(format!(
                "type index {t} outside vocabulary of {}",
                vocab.len()
            ))
        })?;
        out.push_str(&format!("{symbol} {:.6} {:.6} {:.6}\n", p[0], p[1], p[2]));
    }
    Ok(out)
}

pub fn write_ligand(ligand: &Ligand, vocab: &AtomVocabulary, path: &Path) -> Result<()> {
    let text = ligand_to_text(ligand, vocab)?;
    write(path, &text)
}

/// Loads a pocket, a surface and optionally a ligand, validating all of
/// them. Surfaces without descriptors are featurized from the pocket.
pub fn load_complex(
    pocket_path: &Path,
    surface_path: &Path,
    ligand_path: Option<&Path>,
    vocab: &AtomVocabulary,
) -> Result<LoadedComplex> {
    let pocket = load_pocket(pocket_path)?;
    let (surface, curvature_fallbacks) = match load_surface(surface_path)? {
        SurfaceInput::Featurized(s) => (s, 0),
        SurfaceInput::GeometryOnly(g) => {
            let featurized = geometry::surface_features(&g, &pocket)?;
            (featurized.surface, featurized.curvature_fallbacks)
        }
    };
    let (ligand, unknown_elements) = match ligand_path {
        Some(p) => {
            let (l, u) = load_ligand(p, vocab)?;
            (Some(l), u)
        }
        None => (None, 0),
    };
    if unknown_elements > 0 {
        log::warn!("{unknown_elements} ligand atoms mapped to the 'other' class");
    }
    Ok(LoadedComplex {
        pocket,
        surface,
        ligand,
        unknown_elements,
        curvature_fallbacks,
    })
}
