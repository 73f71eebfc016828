//! Random non-uniformly expanding torus maps: construction, random cocycles,
//! hyperbolic times, ergodic estimators and finite-scale thermodynamics.

pub mod config;
pub mod error;
pub mod hypotheses;
pub mod map;
pub mod noise;
pub mod orbit;
pub mod pliss;
pub mod profile;
pub mod reduce;
pub mod thermo;
pub mod ergodic;
pub mod torus;

pub use config::{IniDoc, Section};
pub use error::{Error, Result};
pub use hypotheses::{check_hypotheses, derive_constants, estimate_eps0, ExpansionConstants, HypothesisReport, RegionStats, Verdict};
pub use map::{Jacobian, MapParams, MapSpec, MarkovBoxes};
pub use noise::{realize_noise, skew_step, NoiseModel, NoiseRealization, PerturbationLaw};
pub use orbit::{derivative_cocycle, iterate, OrbitTrace, Region, RegionFlags};
pub use pliss::{
    check_backward_contraction, density_at_infinity, hyperbolic_times, pliss_times, pliss_zeta, ContractionReport,
    HyperbolicTimeSet, PlissProblem,
};
pub use profile::{BumpFunction, DeformationProfile};
pub use torus::TorusPoint;
pub use ergodic::{
    birkhoff_average, box_marginal, dyadic_cell, empirical_measure, empirical_measure_fibers, expansion_exponent,
    k_alpha_test, lebesgue_starts, lyapunov_from_trace, lyapunov_spectrum, occupation_fraction, separation_time,
    Channel, EmpiricalMeasure, KAlphaReport, LyapunovSpectrum, MeasureMeta,
};
pub use thermo::{
    equilibrium_scan, free_energy, low_variation_test, partition_entropy, pressure, random_ks_entropy, separated_set,
    CandidateOrbits, EntropyEstimate, LowVariation, PartitionSpec, Potential, PotentialKind, PressureEstimate,
    PressureRow, ScanEntry, ScanOptions, ScanReport, SeparatedSet, TrigTerm,
};
