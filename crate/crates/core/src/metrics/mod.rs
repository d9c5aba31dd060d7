//! Structural-plausibility and affinity metrics.

mod affinity;
mod bonds;
mod histogram;
mod matching;
mod report;

pub use affinity::{affinity_aggregate, is_valid_energy, AffinitySummary, EnergyTable, PocketEnergies};
pub use bonds::{
    bond_length_profile, bond_lengths, covalent_radius, infer_bonds, jsd_bl, Bond, BondClass, BondJsd, BondOrder,
    BondProfile, BondedMolecule, BOND_BINNING, BOND_FACTOR,
};
pub use histogram::{distance_histogram, jsd, pair_distances, Binning, DistanceMode, Histogram};
pub use matching::{hungarian, matched_mean_error, same_type_multiset};
pub use report::{evaluate, with_inferred_bonds, ClashSummary, EvalReport};
