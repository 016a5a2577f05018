//! Event-driven simulation through the graphical construction: Poisson
//! clocks on edges and oriented edges, shared by coupled trajectories.

pub mod evolve;
pub mod timeline;
pub mod walk;

pub use evolve::{
    compare_coupled, count_move_rates, evolve_cbsep, evolve_csep, evolve_gcbsep, grand_coupling, hitting_time_n1,
    projection_matches, BinaryDynamics, ComparisonCounts, GeneralDynamics, GrandCoupling, HittingTime, Move,
    MoveRates, Step, Trajectory, UpdatedSet,
};
pub use timeline::{clock_rates, Clock, Event, EventStream, GraphicalTimeline};
pub use walk::{
    embedded_walk, empirical_law, mean_hitting_time_two, replica_seed, sigma_cov_estimate, HittingEstimate,
    SigmaCover, SigmaCurve, WalkPath,
};
