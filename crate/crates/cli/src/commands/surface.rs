use std::path::PathBuf;

use sculpt::geometry::{approximate_ses, select_pocket_residues, surface_features, RadiiTable, SesConfig};
use sculpt::io::{load_ligand, load_pocket, write_pocket, write_surface, AtomVocabulary};
use sculpt::Result;

#[derive(Debug, Clone)]
pub struct SurfaceArgs {
    pub pocket: PathBuf,
    pub ligand: PathBuf,
    pub out: PathBuf,
    /// Also write the selected residues here.
    pub pocket_out: Option<PathBuf>,
    pub ses: SesConfig,
    pub cutoff: f64,
    pub vocab: AtomVocabulary,
    pub radii: RadiiTable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceSummary {
    pub pocket_atoms: usize,
    pub vertices: usize,
    pub edges: usize,
    pub curvature_fallbacks: usize,
}

/// Residue selection, sphere-sampled surface and descriptors, written as a
/// featurized surface file.
pub fn run(args: SurfaceArgs) -> Result<SurfaceSummary> {
    let protein = load_pocket(&args.pocket)?;
    let (ligand, _) = load_ligand(&args.ligand, &args.vocab)?;
    let pocket = select_pocket_residues(&protein, ligand.positions(), args.cutoff)?;
    let geometry = approximate_ses(&pocket, ligand.positions(), &args.ses, &args.radii)?;
    let featurized = surface_features(&geometry, &pocket)?;
    write_surface(&featurized.surface, &args.out)?;
    if let Some(p) = &args.pocket_out {
        write_pocket(&pocket, p)?;
    }
    Ok(SurfaceSummary {
        pocket_atoms: pocket.len(),
        vertices: featurized.surface.len(),
        edges: featurized.surface.edges().len(),
        curvature_fallbacks: featurized.curvature_fallbacks,
    })
}
