//! Splitting `Ent(f^2)` along the particle number.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::states::{kahan_sum, Measure, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySplit {
    /// `mu(Ent(f^2 | N))`.
    pub conditional: f64,
    /// `Ent(mu(f^2 | N))`.
    pub projected: f64,
}

impl EntropySplit {
    pub fn total(&self) -> f64 {
        self.conditional + self.projected
    }
}

/// Per-sector data: `(mu(N = k), mu(f^2 | N = k), Ent(f^2 | N = k))` for
/// `k = 0..=n`; empty sectors carry zero mass.
pub fn sector_statistics(space: &StateSpace, mu: &Measure, f: &[f64]) -> Result<Vec<(f64, f64, f64)>> {
    if f.len() != space.len() || mu.len() != space.len() {
        return Err(Error::Dimension { expected: space.len(), got: f.len() });
    }
    let n = space.n();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for i in 0..space.len() {
        members[space.particle_count(i)].push(i);
    }
    let w = mu.weights();
    Ok(members
        .iter()
        .map(|idx| {
            let mass = kahan_sum(idx.iter().map(|&i| w[i]));
            if mass == 0.0 {
                return (0.0, 0.0, 0.0);
            }
            let mean = kahan_sum(idx.iter().map(|&i| w[i] * f[i] * f[i])) / mass;
            let ent = if mean > 0.0 {
                kahan_sum(idx.iter().filter(|&&i| f[i] != 0.0).map(|&i| {
                    let g = f[i] * f[i];
                    w[i] * g * (g / mean).ln()
                })) / mass
            } else {
                0.0
            };
            (mass, mean, ent)
        })
        .collect())
}

/// `Ent(f^2) = mu(Ent(f^2 | N)) + Ent(mu(f^2 | N))`.
pub fn entropy_decomposition(space: &StateSpace, mu: &Measure, f: &[f64]) -> Result<EntropySplit> {
    let sectors = sector_statistics(space, mu, f)?;
    let conditional = kahan_sum(sectors.iter().map(|s| s.0 * s.2));
    let total = kahan_sum(sectors.iter().map(|s| s.0 * s.1));
    let projected = if total > 0.0 {
        kahan_sum(sectors.iter().filter(|s| s.1 > 0.0).map(|s| s.0 * s.1 * (s.1 / total).ln()))
    } else {
        0.0
    };
    Ok(EntropySplit { conditional, projected })
}
