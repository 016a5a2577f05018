//! Spectrum of CBSEP killed on `{N = 1}` and the expected hitting time of
//! that set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{conjugate_gradient, lanczos_smallest, sorted_symmetric_eigen, LanczosOptions};

use super::analysis::DENSE_CAP;
use super::generator::cbsep_generator;

pub const HITTING_MAX_VERTICES: usize = 20;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RestrictedHitting {
    /// Smallest eigenvalue of `-L` on `{N >= 2}` with absorption on `{N = 1}`.
    pub lambda0: f64,
    /// `E_{mu(. | N >= 2)}(tau)`.
    pub e_tau: f64,
    /// `E_{mu(. | N = 2)}(tau)`.
    pub e_tau_two: f64,
    /// `mu(N >= 2)`.
    pub mu_at_least_two: f64,
    /// `mu(N = 2 | N >= 2)`.
    pub mu_two_given_at_least_two: f64,
}

pub fn restricted_gap_and_hitting(graph: &Graph, p: f64) -> Result<RestrictedHitting> {
    let n = graph.n();
    if n > HITTING_MAX_VERTICES {
        return Err(Error::Size { what: "vertices", got: n as u64, cap: HITTING_MAX_VERTICES as u64 });
    }
    if n < 2 {
        return Err(Error::Domain("{N >= 2} is empty on a single vertex".into()));
    }
    let (gen, space) = cbsep_generator(graph, p)?;
    let keep: Vec<usize> = (0..space.len()).filter(|&i| space.particle_count(i) >= 2).collect();
    let mu = gen.measure().weights();
    let a = gen.symmetrized().principal_submatrix(&keep);
    let dim = keep.len();
    let sq: Vec<f64> = keep.iter().map(|&i| mu[i].sqrt()).collect();

    let (lambda0, y) = if dim <= DENSE_CAP {
        let dense = a.to_dense();
        let dense = (&dense + dense.transpose()) * 0.5;
        let (values, _) = sorted_symmetric_eigen(dense.clone());
        let chol = dense
            .cholesky()
            .ok_or_else(|| Error::Domain("restricted generator is not positive definite".into()))?;
        let y = chol.solve(&nalgebra::DVector::from_column_slice(&sq));
        (values[0], y.iter().copied().collect::<Vec<_>>())
    } else {
        let pair = lanczos_smallest(|x, out| a.mul_vec_into(x, out), dim, &[], LanczosOptions::default())?;
        let y = conjugate_gradient(|x, out| a.mul_vec_into(x, out), &sq, 1e-12, 100 * dim)?;
        (pair.value, y)
    };
    // h = D^{-1/2} A^{-1} D^{1/2} 1 solves (-Q_R) h = 1
    let h: Vec<f64> = y.iter().zip(&sq).map(|(v, s)| v / s).collect();
    let mut mass = 0.0;
    let mut total = 0.0;
    let mut mass_two = 0.0;
    let mut total_two = 0.0;
    for (r, &i) in keep.iter().enumerate() {
        mass += mu[i];
        total += mu[i] * h[r];
        if space.particle_count(i) == 2 {
            mass_two += mu[i];
            total_two += mu[i] * h[r];
        }
    }
    Ok(RestrictedHitting {
        lambda0,
        e_tau: total / mass,
        e_tau_two: total_two / mass_two,
        mu_at_least_two: mass,
        mu_two_given_at_least_two: mass_two / mass,
    })
}
