//! Exact finite-state analysis of CBSEP, g-CBSEP and FA-1f.

pub mod analysis;
pub mod entropy;
pub mod forms;
pub mod generator;
pub mod hitting;
pub mod states;

pub use analysis::{
    logsob_constant, mixing_times, relaxation_time, semigroup, spectral_gap, LogSobolev, MixingTimes, SpectralGap,
};
pub use entropy::{entropy_decomposition, EntropySplit};
pub use forms::{dirichlet_form, form_ratio_max, FormKind, QuadraticForm};
pub use generator::{cbsep_generator, fa1f_generator, gcbsep_generator, lumping_deviation, SparseGenerator};
pub use hitting::{restricted_gap_and_hitting, RestrictedHitting};
pub use states::{Constraint, GeneralSpace, Measure, ParticleConfig, SiteSpace, StateSpace};
