//! Rate matrices of CBSEP, FA-1f and g-CBSEP over enumerated spaces.

use std::collections::VecDeque;

use log::warn;

use crate::error::{check_probability, Error, Result};
use crate::graph::Graph;
use crate::linalg::CsrMatrix;

use super::states::{Constraint, GeneralSpace, Measure, SiteSpace, StateSpace};

/// Continuous-time chain on `0..dim`: full rate matrix `Q` (diagonal equal
/// to minus the off-diagonal row sum) together with its reversible measure.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    rates: CsrMatrix,
    measure: Measure,
}

impl SparseGenerator {
    /// Builds `Q` from off-diagonal rate rows. Each row lists `(target,
    /// rate)`; repeated targets are summed, self-loops ignored.
    pub fn from_offdiagonal_rows(rows: Vec<Vec<(usize, f64)>>, measure: Measure) -> Result<Self> {
        let dim = rows.len();
        if measure.len() != dim {
            return Err(Error::Dimension { expected: dim, got: measure.len() });
        }
        let full_rows = rows.into_iter().enumerate().map(|(i, mut row)| {
            row.retain(|&(j, r)| j != i && r != 0.0);
            row.sort_unstable_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len() + 1);
            for (j, r) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += r,
                    _ => merged.push((j, r)),
                }
            }
            let exit: f64 = merged.iter().map(|e| e.1).sum();
            let pos = merged.partition_point(|e| e.0 < i);
            merged.insert(pos, (i, -exit));
            merged
        });
        let rates = CsrMatrix::from_rows(dim, full_rows.collect::<Vec<_>>());
        Ok(SparseGenerator { rates, measure })
    }

    pub fn dim(&self) -> usize {
        self.rates.n_rows()
    }

    pub fn rates(&self) -> &CsrMatrix {
        &self.rates
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates.get(from, to)
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rates.get(i, i)
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.dim()).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    /// Largest `|sum_j Q_ij|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.rates.row(i).map(|(_, v)| v).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|mu_i Q_ij - mu_j Q_ji|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mu = self.measure.weights();
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for (j, q) in self.rates.row(i) {
                if i != j {
                    worst = worst.max((mu[i] * q - mu[j] * self.rates.get(j, i)).abs());
                }
            }
        }
        worst
    }

    /// Whether every state reaches every other through positive rates.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        if n == 0 {
            return false;
        }
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        for i in 0..n {
            for (j, v) in self.rates.row(i) {
                if j != i && v > 0.0 {
                    forward[i].push(j);
                    backward[j].push(i);
                }
            }
        }
        let reaches_all = |adj: &[Vec<usize>]| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(i) = queue.pop_front() {
                for &j in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            seen.iter().all(|&s| s)
        };
        reaches_all(&forward) && reaches_all(&backward)
    }

    /// `-Q` conjugated by `diag(sqrt(mu))`: symmetric for reversible chains,
    /// with kernel spanned by `sqrt(mu)`.
    pub fn symmetrized(&self) -> CsrMatrix {
        let sq: Vec<f64> = self.measure.weights().iter().map(|w| w.sqrt()).collect();
        self.rates.map_entries(|i, j, q| -q * sq[i] / sq[j])
    }

    /// Generator pairing `<f, -Q f>_mu`.
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        let qf = self.rates.mul_vec(f);
        -self.measure.expect(&f.iter().zip(&qf).map(|(a, b)| a * b).collect::<Vec<_>>())
    }
}

fn warn_large_p(p: f64) {
    if p > 0.5 {
        warn!("p = {p} exceeds 1/2; formulas stay valid but bounds assume p bounded away from 1");
    }
}

/// CBSEP on `Omega_+`: every non-empty edge resamples at rate one from
/// `pi_e(. | E_e)`.
pub fn cbsep_generator(graph: &Graph, p: f64) -> Result<(SparseGenerator, StateSpace)> {
    check_probability(p)?;
    warn_large_p(p);
    let space = StateSpace::enumerate(graph.n(), Constraint::OmegaPlus)?;
    let sep = (1.0 - p) / (2.0 - p);
    let branch = p / (2.0 - p);
    let rows = space
        .states()
        .iter()
        .map(|&m| {
            let mut row = Vec::with_capacity(2 * graph.num_edges());
            for &(a, b) in graph.edges() {
                let (ba, bb) = (1u32 << a, 1u32 << b);
                match (m & ba != 0, m & bb != 0) {
                    (false, false) => {}
                    (true, true) => {
                        row.push((space.index_of(m & !ba).unwrap(), sep));
                        row.push((space.index_of(m & !bb).unwrap(), sep));
                    }
                    _ => {
                        row.push((space.index_of(m ^ ba ^ bb).unwrap(), sep));
                        row.push((space.index_of(m | ba | bb).unwrap(), branch));
                    }
                }
            }
            row
        })
        .collect();
    let measure = space.bernoulli_measure(p);
    Ok((SparseGenerator::from_offdiagonal_rows(rows, measure)?, space))
}

/// FA-1f on `Omega_+`: a vertex with an occupied neighbour resamples from
/// Bernoulli(`p`) at rate one.
pub fn fa1f_generator(graph: &Graph, p: f64) -> Result<(SparseGenerator, StateSpace)> {
    check_probability(p)?;
    warn_large_p(p);
    let space = StateSpace::enumerate(graph.n(), Constraint::OmegaPlus)?;
    let neighbour_masks: Vec<u32> = (0..graph.n())
        .map(|x| graph.neighbors(x).iter().fold(0u32, |m, &y| m | 1 << y))
        .collect();
    let rows = space
        .states()
        .iter()
        .map(|&m| {
            (0..graph.n())
                .filter(|&x| m & neighbour_masks[x] != 0)
                .map(|x| {
                    let rate = if m >> x & 1 == 1 { 1.0 - p } else { p };
                    (space.index_of(m ^ 1 << x).unwrap(), rate)
                })
                .collect()
        })
        .collect();
    let measure = space.bernoulli_measure(p);
    Ok((SparseGenerator::from_offdiagonal_rows(rows, measure)?, space))
}

/// g-CBSEP: every edge with an endpoint in `S1` resamples at rate one from
/// `rho x rho` conditioned on that event.
pub fn gcbsep_generator(graph: &Graph, site: &SiteSpace) -> Result<(SparseGenerator, GeneralSpace)> {
    let space = GeneralSpace::enumerate(graph.n(), site.clone())?;
    let s = site.size();
    let rho = site.rho();
    let p_edge = 1.0 - (1.0 - site.p()).powi(2);
    // admissible two-site states and their conditional probabilities
    let pairs: Vec<(usize, usize, f64)> = (0..s)
        .flat_map(|a| (0..s).map(move |b| (a, b)))
        .filter(|&(a, b)| site.is_particle(a) || site.is_particle(b))
        .map(|(a, b)| (a, b, rho[a] * rho[b] / p_edge))
        .collect();
    let rows = (0..space.len())
        .map(|i| {
            let config = space.config(i);
            let mut row = Vec::new();
            let mut target = config.clone();
            for &(x, y) in graph.edges() {
                if !(site.is_particle(config[x]) || site.is_particle(config[y])) {
                    continue;
                }
                for &(a, b, r) in &pairs {
                    target[x] = a;
                    target[y] = b;
                    row.push((space.index_of(&target).unwrap(), r));
                }
                target[x] = config[x];
                target[y] = config[y];
            }
            row
        })
        .collect();
    let measure = space.product_measure();
    Ok((SparseGenerator::from_offdiagonal_rows(rows, measure)?, space))
}

/// Largest entrywise deviation between the g-CBSEP rates lumped through the
/// projection and the CBSEP rates, over every representative state.
pub fn lumping_deviation(
    general: &SparseGenerator,
    space: &GeneralSpace,
    cbsep: &SparseGenerator,
    cbsep_space: &StateSpace,
) -> f64 {
    let proj: Vec<usize> = (0..space.len())
        .map(|i| cbsep_space.index_of(space.projection(i)).expect("projection lies in Omega_+"))
        .collect();
    let mut worst: f64 = 0.0;
    let mut lumped = vec![0.0; cbsep.dim()];
    for i in 0..general.dim() {
        lumped.iter_mut().for_each(|v| *v = 0.0);
        for (j, q) in general.rates().row(i) {
            if proj[j] != proj[i] {
                lumped[proj[j]] += q;
            }
        }
        let eta = proj[i];
        for (k, &l) in lumped.iter().enumerate() {
            if k != eta {
                worst = worst.max((l - cbsep.rate(eta, k)).abs());
            }
        }
    }
    worst
}
