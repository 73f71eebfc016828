//! Pressure, entropy and the free-energy scan.

pub mod entropy;
pub mod potential;
pub mod pressure;
pub mod separated;
pub mod variational;

pub use entropy::{partition_entropy, random_ks_entropy, EntropyEstimate, PartitionSpec};
pub use potential::{Potential, PotentialKind, TrigTerm};
pub use pressure::{pressure, PressureEstimate, PressureRow};
pub use separated::{separated_set, CandidateOrbits, SeparatedSet};
pub use variational::{equilibrium_scan, free_energy, integral, low_variation_test, LowVariation, ScanEntry, ScanOptions, ScanReport};
