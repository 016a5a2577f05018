//! Verification harness: configured sweeps of the exact inequality checks,
//! fitted constants, scaling fits and reports.

pub mod checks;
pub mod config;
pub mod report;
pub mod suite;

pub use checks::{
    coupling_summary, fa_chain_check, generalised_mixing_check, instance_checks, instance_summary,
    projected_mixture_deviation, scaling_fit, CouplingSummary, InstanceSummary, ScalingFit, Theorem3Record,
};
pub use config::{ExperimentConfig, Model, PRule};
pub use report::{CheckRow, VerificationReport};
pub use suite::{scaling_report, verify_suite};
