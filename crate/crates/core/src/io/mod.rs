//! Domain types, validation and file formats.

mod checkpoint;
mod files;
mod types;

pub use checkpoint::{decode_tensors, encode_tensors, Checkpoint, MAGIC, VERSION};
pub use files::{
    ligand_to_text, load_complex, load_ligand, load_pocket, load_surface, parse_ligand,
    parse_pocket, parse_surface, pocket_to_json, surface_to_json, write_ligand, write_pocket,
    write_surface, LoadedComplex, SurfaceInput,
};
pub use types::{
    Atom3D, AtomVocabulary, Ligand, PocketAtom, ProteinPocket, SurfaceFeature, SurfaceGeometry,
    SurfaceGraph, SurfaceVertex, Vec3, OTHER_SYMBOL,
};
