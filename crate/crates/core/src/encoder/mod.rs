//! The conditional output network mapping flow parameters, pocket and
//! surface to predictions of the clean ligand.

mod attention;
mod config;
mod network;

pub use attention::{adaptive_edge_select, relative_geometry, EdgeList};
pub use config::EncoderConfig;
pub use network::{
    sca_forward, time_embedding, Conditioning, NetworkOutput, OutputNetwork, ScaNetwork, ScaOutput,
};
