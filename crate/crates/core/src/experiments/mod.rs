//! Scenario drivers built on the measure, transport and group layers.

pub mod census;
pub mod config;
pub mod convergence;
pub mod ergodic;
pub mod observable;
pub mod probe;
pub mod sphere;

pub use census::{run_ito_kawada_census, run_stromberg, CensusReport, StrombergReport, Verdict};
pub use config::{validate_config, validate_config_file, Mode, Walk, WalkConfig};
pub use convergence::{run_convergence, ConvergenceRecord, ConvergenceSeries};
pub use ergodic::{run_ergodic, run_large_deviations, ErgodicReport, LdReport};
pub use observable::{Observable, Provenance};
pub use probe::{probe_standing_assumption, revalidate, ProbeOptions, ProbeReport, WindowMode};
pub use sphere::{run_sphere_equidistribution, CapSpec, SphereReport};
