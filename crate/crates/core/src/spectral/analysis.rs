//! Relaxation time, log-Sobolev witness, semigroup and mixing times of a
//! reversible generator.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, lanczos_smallest, sorted_symmetric_eigen, LanczosOptions};

use super::generator::SparseGenerator;
use super::states::{entropy_kernel, kahan_sum};

/// Largest dimension handled by dense eigensolves.
pub const DENSE_CAP: usize = 1500;
/// Largest dimension accepted by [`mixing_times`].
pub const MIXING_CAP: usize = 4096;
/// Largest dimension accepted by [`logsob_constant`].
pub const LOGSOB_CAP: usize = 50_000;

/// TV threshold defining `t_mix`.
pub const TV_THRESHOLD: f64 = 0.5 / std::f64::consts::E;
/// L2 threshold defining `T_2`.
pub const L2_THRESHOLD: f64 = 1.0 / std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

/// Smallest nonzero eigenvalue of `-Q` in `L^2(mu)`.
#[derive(Debug, Clone)]
pub struct SpectralGap {
    pub gap: f64,
    /// Eigenfunction in `L^2(mu)` coordinates, normalised so `mu(v^2) = 1`.
    pub eigenfunction: Vec<f64>,
    pub method: EigenMethod,
    pub residual: f64,
    pub matvecs: usize,
}

impl SpectralGap {
    pub fn t_rel(&self) -> f64 {
        1.0 / self.gap
    }
}

pub fn spectral_gap(gen: &SparseGenerator) -> Result<SpectralGap> {
    spectral_gap_with(gen, LanczosOptions::default())
}

pub fn spectral_gap_with(gen: &SparseGenerator, opts: LanczosOptions) -> Result<SpectralGap> {
    let dim = gen.dim();
    if dim < 2 {
        return Err(Error::Domain("spectral gap needs at least two states".into()));
    }
    let sq: Vec<f64> = gen.measure().weights().iter().map(|w| w.sqrt()).collect();
    let a = gen.symmetrized();
    let (gap, u, method, residual, matvecs) = if dim <= DENSE_CAP {
        let dense = a.to_dense();
        let dense = (&dense + dense.transpose()) * 0.5;
        let (values, vectors) = sorted_symmetric_eigen(dense);
        (values[1], vectors.column(1).iter().copied().collect::<Vec<_>>(), EigenMethod::Dense, 0.0, 0)
    } else {
        let pair = lanczos_smallest(|x, y| a.mul_vec_into(x, y), dim, &[sq.clone()], opts)?;
        (pair.value, pair.vector, EigenMethod::Lanczos, pair.residual, pair.matvecs)
    };
    let eigenfunction = u.iter().zip(&sq).map(|(x, s)| x / s).collect();
    Ok(SpectralGap { gap, eigenfunction, method, residual, matvecs })
}

/// `t_rel = 1 / gap`.
pub fn relaxation_time(gen: &SparseGenerator) -> Result<f64> {
    Ok(spectral_gap(gen)?.t_rel())
}

/// Outcome of the log-Sobolev search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogSobolev {
    /// Upper bound on `alpha`: the least `D(f)/Ent(f^2)` seen, capped by `gap/2`.
    pub witness: f64,
    /// Best ratio reached by the optimiser itself.
    pub optimized: f64,
    /// `gap / 2`, the limit of the ratio along `1 + eps v`.
    pub linearized: f64,
    pub used_linearized: bool,
    /// `[gap / (2 + log(1/mu_*)), gap / 2]`.
    pub bracket: (f64, f64),
    pub mu_star: f64,
    pub restarts: usize,
    pub stagnated: bool,
}

impl LogSobolev {
    pub fn inverse(&self) -> f64 {
        1.0 / self.witness
    }

    pub fn within_bracket(&self, rel_tol: f64) -> bool {
        self.witness >= self.bracket.0 * (1.0 - rel_tol) && self.witness <= self.bracket.1 * (1.0 + rel_tol)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LogSobolevOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LogSobolevOptions {
    fn default() -> Self {
        LogSobolevOptions { restarts: 20, max_iter: 2000, seed: 0x1095_0b }
    }
}

pub fn logsob_constant(gen: &SparseGenerator) -> Result<LogSobolev> {
    let gap = spectral_gap(gen)?;
    logsob_constant_with(gen, &gap, LogSobolevOptions::default())
}

/// Searches for `f >= 0` minimising `D(f) / Ent(f^2)` by projected gradient
/// descent in `L^2(mu)`, from random starts, the gap eigenfunction, and
/// level-set indicators of that eigenfunction.
pub fn logsob_constant_with(gen: &SparseGenerator, gap: &SpectralGap, opts: LogSobolevOptions) -> Result<LogSobolev> {
    let dim = gen.dim();
    if dim > LOGSOB_CAP {
        return Err(Error::Size { what: "log-Sobolev dimension", got: dim as u64, cap: LOGSOB_CAP as u64 });
    }
    let mu = gen.measure().weights();
    let mu_star = gen.measure().min();
    let linearized = gap.gap / 2.0;
    let bracket = (gap.gap / (2.0 + (1.0 / mu_star).ln()), linearized);
    let problem = LogSobProblem { gen, mu };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let v = &gap.eigenfunction;
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    for c in [0.5, 0.9, 0.99] {
        starts.push(v.iter().map(|x| 1.0 + c * x / vmax).collect());
        starts.push(v.iter().map(|x| 1.0 - c * x / vmax).collect());
    }
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    for q in [0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999] {
        let level = sorted[((q * dim as f64) as usize).min(dim - 1)];
        starts.push(v.iter().map(|&x| if x <= level { 1.0 } else { 1e-3 }).collect());
        starts.push(v.iter().map(|&x| if x >= level { 1.0 } else { 1e-3 }).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for r in 0..opts.restarts {
        let sigma = 0.25 + 2.0 * r as f64 / opts.restarts.max(1) as f64;
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        starts.push((0..dim).map(|_| normal.sample(&mut rng).exp()).collect());
    }

    let mut optimized = f64::INFINITY;
    let mut stagnated = false;
    // point-mass candidates have a closed-form ratio q_x / log(1/mu_x)
    for x in 0..dim {
        if mu[x] < 1.0 {
            optimized = optimized.min(gen.exit_rate(x) / (1.0 / mu[x]).ln());
        }
    }
    let restarts = starts.len();
    for start in starts {
        let (value, ok) = problem.descend(start, opts.max_iter);
        optimized = optimized.min(value);
        stagnated |= !ok;
    }
    let used_linearized = linearized <= optimized;
    Ok(LogSobolev {
        witness: optimized.min(linearized),
        optimized,
        linearized,
        used_linearized,
        bracket,
        mu_star,
        restarts,
        stagnated,
    })
}

struct LogSobProblem<'a> {
    gen: &'a SparseGenerator,
    mu: &'a [f64],
}

impl LogSobProblem<'_> {
    /// Returns `(D, Ent, -Qf)` for `f` normalised to `mu(f^2) = 1`.
    fn evaluate(&self, f: &[f64]) -> (f64, f64, Vec<f64>) {
        let lf: Vec<f64> = self.gen.rates().mul_vec(f).into_iter().map(|x| -x).collect();
        let d = kahan_sum(self.mu.iter().zip(f).zip(&lf).map(|((m, a), b)| m * a * b)).max(0.0);
        let s = kahan_sum(self.mu.iter().zip(f).map(|(m, x)| m * x * x));
        let ent = s * kahan_sum(self.mu.iter().zip(f).map(|(m, x)| m * entropy_kernel(x * x / s)));
        (d, ent, lf)
    }

    fn normalize(&self, f: &mut [f64]) -> bool {
        let s = kahan_sum(self.mu.iter().zip(f.iter()).map(|(m, x)| m * x * x)).sqrt();
        if !(s > 0.0 && s.is_finite()) {
            return false;
        }
        f.iter_mut().for_each(|x| *x /= s);
        true
    }

    fn ratio(&self, f: &[f64]) -> f64 {
        let (d, e, _) = self.evaluate(f);
        if e <= 1e-14 {
            f64::INFINITY
        } else {
            d / e
        }
    }

    /// Projected gradient descent with Armijo backtracking. The boolean is
    /// false when the iteration budget ran out before the step collapsed.
    fn descend(&self, mut f: Vec<f64>, max_iter: usize) -> (f64, bool) {
        f.iter_mut().for_each(|x| *x = x.max(0.0));
        if !self.normalize(&mut f) {
            return (f64::INFINITY, true);
        }
        let mut step = 1.0;
        let mut best = f64::INFINITY;
        for _ in 0..max_iter {
            let (d, ent, lf) = self.evaluate(&f);
            if ent <= 1e-14 {
                return (best, true);
            }
            let r = d / ent;
            best = best.min(r);
            // gradient in the mu-weighted inner product
            let grad: Vec<f64> = f
                .iter()
                .zip(&lf)
                .map(|(&x, &l)| {
                    let log_term = if x > 0.0 { x * (x * x).ln() } else { 0.0 };
                    2.0 * (l - r * log_term) / ent
                })
                .collect();
            let slope: f64 = kahan_sum(self.mu.iter().zip(&grad).map(|(m, g)| m * g * g));
            if slope.sqrt() < 1e-13 * r.max(1e-300) {
                return (best, true);
            }
            let mut accepted = false;
            let mut s = step * 2.0;
            while s > 1e-16 {
                let mut trial: Vec<f64> = f.iter().zip(&grad).map(|(x, g)| (x - s * g).max(0.0)).collect();
                if self.normalize(&mut trial) {
                    let rt = self.ratio(&trial);
                    if rt <= r - 1e-4 * s * slope {
                        f = trial;
                        step = s;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                return (best, true);
            }
            let rn = self.ratio(&f);
            best = best.min(rn);
            if r - rn <= 1e-13 * r {
                return (best, true);
            }
        }
        (best, false)
    }
}

/// Law at time `t` of the chain started from `initial`, by uniformization.
/// Long horizons are split so that each piece has Poisson mean at most 200.
pub fn semigroup(gen: &SparseGenerator, t: f64, initial: &[f64]) -> Result<Vec<f64>> {
    if initial.len() != gen.dim() {
        return Err(Error::Dimension { expected: gen.dim(), got: initial.len() });
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Parameter(format!("time must be finite and nonnegative, got {t}")));
    }
    let lambda = 1.01 * gen.max_exit_rate();
    if t == 0.0 || lambda == 0.0 {
        return Ok(initial.to_vec());
    }
    let pieces = (lambda * t / 200.0).ceil().max(1.0) as usize;
    let dt = t / pieces as f64;
    // P = I + Q / lambda, applied as a row-vector product
    let kernel = gen.rates().map_entries(|i, j, q| if i == j { 1.0 + q / lambda } else { q / lambda });
    let mut dist = initial.to_vec();
    let mut term = vec![0.0; dist.len()];
    let mut next = vec![0.0; dist.len()];
    let mean = lambda * dt;
    for _ in 0..pieces {
        let mut weight = (-mean).exp();
        let mut mass = weight;
        term.copy_from_slice(&dist);
        let mut acc: Vec<f64> = term.iter().map(|x| weight * x).collect();
        let mut k = 0usize;
        while 1.0 - mass > 1e-14 && k < 100_000 {
            k += 1;
            kernel.vec_mul_into(&term, &mut next);
            std::mem::swap(&mut term, &mut next);
            weight *= mean / k as f64;
            mass += weight;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
        }
        dist = acc;
    }
    Ok(dist)
}

/// Mixing times and the route used to obtain them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixingTimes {
    pub t_mix: f64,
    pub t2: f64,
}

/// Full eigendecomposition of the symmetrised generator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub mu: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn new(gen: &SparseGenerator) -> Result<Self> {
        let dim = gen.dim();
        if dim > MIXING_CAP {
            return Err(Error::Size { what: "dense decomposition dimension", got: dim as u64, cap: MIXING_CAP as u64 });
        }
        let dense = gen.symmetrized().to_dense();
        let dense = (&dense + dense.transpose()) * 0.5;
        let (values, vectors) = sorted_symmetric_eigen(dense);
        Ok(SpectralDecomposition { values, vectors, mu: gen.measure().weights().to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `max_x ||h_x^t - 1||_{L^2(mu)}`.
    pub fn max_l2_distance(&self, t: f64) -> f64 {
        let dim = self.dim();
        let decay: Vec<f64> = self.values.iter().map(|l| (-2.0 * l.max(0.0) * t).exp()).collect();
        (0..dim)
            .map(|x| {
                let s: f64 = (1..dim).map(|k| decay[k] * self.vectors[(x, k)].powi(2)).sum();
                (s / self.mu[x]).max(0.0).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Transition matrix `P_t`.
    pub fn transition(&self, t: f64) -> DMatrix<f64> {
        let dim = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..dim {
            let e = (-self.values[k].max(0.0) * t).exp();
            scaled.column_mut(k).scale_mut(e);
        }
        let mut p = scaled * self.vectors.transpose();
        for x in 0..dim {
            let sx = self.mu[x].sqrt();
            for y in 0..dim {
                p[(x, y)] *= self.mu[y].sqrt() / sx;
            }
        }
        p
    }

    /// `max_x TV(P_t(x, .), mu)`.
    pub fn max_tv_distance(&self, t: f64) -> f64 {
        let p = self.transition(t);
        (0..self.dim())
            .map(|x| 0.5 * (0..self.dim()).map(|y| (p[(x, y)] - self.mu[y]).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Smallest `t` with `distance(t) <= threshold` for a nonincreasing
/// `distance`, by doubling then bisection to relative width `1e-9`.
pub fn first_passage_time(distance: impl Fn(f64) -> f64, threshold: f64) -> f64 {
    if distance(0.0) <= threshold {
        return 0.0;
    }
    let mut hi = 1.0;
    while distance(hi) > threshold {
        hi *= 2.0;
        if hi > 1e15 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if distance(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `t_mix` (TV threshold `1/(2e)`) and `T_2` (L2 threshold `1/e`),
/// maximised over starting states, from the dense spectral decomposition.
pub fn mixing_times(gen: &SparseGenerator) -> Result<MixingTimes> {
    let dec = SpectralDecomposition::new(gen)?;
    Ok(MixingTimes {
        t_mix: first_passage_time(|t| dec.max_tv_distance(t), TV_THRESHOLD),
        t2: first_passage_time(|t| dec.max_l2_distance(t), L2_THRESHOLD),
    })
}

/// Same quantities computed from [`semigroup`] started at every point mass.
/// Much slower; kept as an independent route.
pub fn mixing_times_uniformization(gen: &SparseGenerator) -> Result<MixingTimes> {
    let dim = gen.dim();
    let mu = gen.measure().weights();
    let laws = |t: f64| -> Vec<Vec<f64>> {
        (0..dim)
            .map(|x| {
                let mut delta = vec![0.0; dim];
                delta[x] = 1.0;
                semigroup(gen, t, &delta).expect("dimensions agree")
            })
            .collect()
    };
    let tv = |t: f64| {
        laws(t)
            .iter()
            .map(|row| 0.5 * row.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let l2 = |t: f64| {
        laws(t)
            .iter()
            .map(|row| row.iter().zip(mu).map(|(a, m)| (a / m - 1.0).powi(2) * m).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    Ok(MixingTimes { t_mix: first_passage_time(tv, TV_THRESHOLD), t2: first_passage_time(l2, L2_THRESHOLD) })
}

/// `D(f) / Var(f)` in `L^2(mu)`; `None` when `f` is constant.
pub fn rayleigh_quotient(gen: &SparseGenerator, f: &[f64]) -> Option<f64> {
    let var = gen.measure().variance(f);
    (var > 0.0).then(|| gen.dirichlet(f) / var)
}

/// `mu`-orthogonality of two functions.
pub fn mu_inner(gen: &SparseGenerator, f: &[f64], g: &[f64]) -> f64 {
    let w: Vec<f64> = f.iter().zip(gen.measure().weights()).map(|(a, m)| a * m).collect();
    dot(&w, g)
}
