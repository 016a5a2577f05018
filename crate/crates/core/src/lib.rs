//! Coalescing and branching exclusion processes on finite graphs: exact
//! spectral quantities, graphical-construction simulation, electrical
//! networks and the random-walk statistics they are compared against.

pub mod birthdeath;
pub mod dynamics;
pub mod electrical;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod rwstats;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{Family, Graph};
