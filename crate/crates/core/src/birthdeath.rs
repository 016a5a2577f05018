//! Binomial conditioned to be positive, the birth-death chain reversible
//! for it, and the Hardy-type bounds on its log-Sobolev constant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::spectral::states::{kahan_sum, Measure, StateSpace};

pub const BEST_LOGSOB_CAP: usize = 500;

/// `gamma(k)` proportional to `C(n,k) p^k (1-p)^(n-k)` on `1..=n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaMeasure {
    n: usize,
    p: f64,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
}

/// `log(-log T)` given `log T` and `log(1 - T)`, accurate when `T` is near one.
fn log_neg_log_mass(log_t: f64, log_complement: f64) -> f64 {
    if log_t < -std::f64::consts::LN_2 {
        (-log_t).ln()
    } else if log_complement < -30.0 {
        log_complement
    } else {
        (-(-log_complement.exp()).ln_1p()).ln()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + kahan_sum(v.iter().map(|x| (x - top).exp())).ln()
}

impl GammaMeasure {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        if n == 0 {
            return Err(Error::Parameter("n must be at least 1".into()));
        }
        // log C(n,k) p^k q^(n-k) by the ratio recurrence from k = 1
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let mut raw = Vec::with_capacity(n);
        let mut cur = (n as f64).ln() + lp + (n - 1) as f64 * lq;
        raw.push(cur);
        for k in 2..=n {
            cur += ((n - k + 1) as f64).ln() - (k as f64).ln() + lp - lq;
            raw.push(cur);
        }
        let total = log_sum_exp(raw.iter().copied());
        let log_weights: Vec<f64> = raw.iter().map(|x| x - total).collect();
        let weights = log_weights.iter().map(|x| x.exp()).collect();
        Ok(GammaMeasure { n, p, log_weights, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `gamma(k)` for `1 <= k <= n`.
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k - 1]
    }

    pub fn log_weight(&self, k: usize) -> f64 {
        self.log_weights[k - 1]
    }

    /// Weights indexed from `k = 1`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `max_k |gamma(k)(1-p)k - gamma(k-1)p(n-k+1)|`.
    pub fn ratio_identity_residual(&self) -> f64 {
        let (n, p) = (self.n, self.p);
        (2..=n)
            .map(|k| (self.weight(k) * (1.0 - p) * k as f64 - self.weight(k - 1) * p * (n - k + 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Death rate `c(k, k-1) = k` (zero at `k = 1`).
    pub fn death_rate(&self, k: usize) -> f64 {
        if k >= 2 {
            k as f64
        } else {
            0.0
        }
    }

    /// Birth rate `c(k, k+1) = (n-k) p / (1-p)`.
    pub fn birth_rate(&self, k: usize) -> f64 {
        (self.n - k) as f64 * self.p / (1.0 - self.p)
    }

    /// `m = ceil(pn)`, computed so that exact products are not rounded up.
    pub fn m(&self) -> usize {
        let x = self.p * self.n as f64;
        let r = x.round();
        let m = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
        (m as usize).max(1)
    }

    /// `Ent(g^2) / D(g)` for `g = 1_{k >= j}`, `2 <= j <= n`, in log space.
    pub fn indicator_ratio_ge(&self, j: usize) -> f64 {
        let lt = self.log_tail_ge(j);
        (log_neg_log_mass(lt, self.log_tail_le(j - 1)) + lt - self.log_weight(j)).exp() / j as f64
    }

    /// `Ent(g^2) / D(g)` for `g = 1_{k <= j}`, `1 <= j < n`, in log space.
    pub fn indicator_ratio_le(&self, j: usize) -> f64 {
        let lt = self.log_tail_le(j);
        (log_neg_log_mass(lt, self.log_tail_ge(j + 1)) + lt - self.log_weight(j + 1)).exp() / (j + 1) as f64
    }

    fn log_tail_ge(&self, j: usize) -> f64 {
        log_sum_exp(self.log_weights[j - 1..].iter().copied())
    }

    fn log_tail_le(&self, j: usize) -> f64 {
        log_sum_exp(self.log_weights[..j].iter().copied())
    }
}

/// `sum_{k=2}^n gamma(k) k [g(k) - g(k-1)]^2` with `g` indexed from `k = 1`.
pub fn bd_dirichlet(gm: &GammaMeasure, g: &[f64]) -> Result<f64> {
    if g.len() != gm.n {
        return Err(Error::Dimension { expected: gm.n, got: g.len() });
    }
    Ok(kahan_sum((2..=gm.n).map(|k| gm.weight(k) * k as f64 * (g[k - 1] - g[k - 2]).powi(2))))
}

/// `Ent_gamma(g^2)`.
pub fn bd_entropy(gm: &GammaMeasure, g: &[f64]) -> Result<f64> {
    if g.len() != gm.n {
        return Err(Error::Dimension { expected: gm.n, got: g.len() });
    }
    let sq: Vec<f64> = g.iter().map(|x| x * x).collect();
    Ok(Measure::normalized(gm.weights.clone()).entropy(&sq))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MicloBound {
    pub c_plus: f64,
    pub c_minus: f64,
    pub c_star: f64,
    pub i: usize,
}

/// Both Hardy-type maxima evaluated exactly in log space, with
/// `i = max(2, ceil(pn))`; an empty index range contributes zero.
pub fn miclo_bound(n: usize, p: f64) -> Result<MicloBound> {
    if n < 2 {
        return Err(Error::Parameter("miclo_bound needs n >= 2".into()));
    }
    let gm = GammaMeasure::new(n, p)?;
    let i = gm.m().max(2);
    let mut c_plus: f64 = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for j in i + 1..=n {
        let term = -gm.log_weight(j) - gm.death_rate(j).ln();
        acc = log_sum_exp([acc, term].into_iter());
        let lt = gm.log_tail_ge(j);
        c_plus = c_plus.max((acc + lt + log_neg_log_mass(lt, gm.log_tail_le(j - 1))).exp());
    }
    let mut c_minus: f64 = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for j in (1..i.min(n + 1)).rev() {
        let term = -gm.log_weight(j) - gm.birth_rate(j).ln();
        acc = log_sum_exp([acc, term].into_iter());
        let lt = gm.log_tail_le(j);
        c_minus = c_minus.max((acc + lt + log_neg_log_mass(lt, gm.log_tail_ge(j + 1))).exp());
    }
    Ok(MicloBound { c_plus, c_minus, c_star: c_plus.max(c_minus), i })
}

/// `log a_l` for `a_l = 1 / ((m+l) gamma(m+l))`, `l = 1..=n-m`.
pub fn log_a_sequence(gm: &GammaMeasure) -> Vec<f64> {
    let m = gm.m();
    (1..=gm.n.saturating_sub(m)).map(|l| -((m + l) as f64).ln() - gm.log_weight(m + l)).collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BestLogSob {
    /// Largest `Ent(g^2) / D(g)` found; a lower bound on the best constant.
    pub witness: f64,
    /// Value at `g = 1_{k=1}`.
    pub two_point: f64,
    pub stagnated: bool,
}

/// Ratio used by the search. Entropies below `1e-24 mu(g^2)` sit at the
/// rounding floor of the sum and are treated as zero.
fn ratio(gm: &GammaMeasure, g: &[f64]) -> f64 {
    let d = bd_dirichlet(gm, g).unwrap_or(0.0);
    let e = bd_entropy(gm, g).unwrap_or(0.0);
    let s = kahan_sum(gm.weights.iter().zip(g).map(|(w, x)| w * x * x));
    if d > 0.0 && e > 1e-24 * s {
        e / d
    } else {
        0.0
    }
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Best constant search for `Ent_gamma(g^2) <= C D_gamma(g)` over
/// `g = softplus(theta)`, started from tail indicators and random points.
pub fn bd_best_logsob(gm: &GammaMeasure, restarts: usize, seed: u64) -> Result<BestLogSob> {
    let n = gm.n;
    if n > BEST_LOGSOB_CAP {
        return Err(Error::Size { what: "birth-death size", got: n as u64, cap: BEST_LOGSOB_CAP as u64 });
    }
    if n < 2 {
        return Err(Error::Parameter("need n >= 2".into()));
    }
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    let two_point = ratio(gm, &first);
    let mut best = two_point;
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for j in 1..n {
        let low: Vec<f64> = (1..=n).map(|k| if k <= j { 1.0 } else { 0.0 }).collect();
        let high: Vec<f64> = (1..=n).map(|k| if k > j { 1.0 } else { 0.0 }).collect();
        best = best.max(gm.indicator_ratio_le(j)).max(gm.indicator_ratio_ge(j + 1));
        starts.push(low);
        starts.push(high);
    }
    // keep the strongest indicator starts
    starts.sort_by(|a, b| ratio(gm, b).total_cmp(&ratio(gm, a)));
    starts.truncate(6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 2.0).expect("positive sigma");
    for _ in 0..restarts {
        starts.push((0..n).map(|_| softplus(normal.sample(&mut rng))).collect());
    }
    let mut stagnated = false;
    for g0 in starts {
        // invert softplus, clamping exact zeros to a small positive value
        let theta: Vec<f64> = g0
            .iter()
            .map(|&g| {
                let g = g.max(1e-8);
                if g > 30.0 {
                    g
                } else {
                    g.exp_m1().ln()
                }
            })
            .collect();
        let (value, ok) = ascend(gm, theta, 3000);
        best = best.max(value);
        stagnated |= !ok;
    }
    Ok(BestLogSob { witness: best, two_point, stagnated })
}

fn ascend(gm: &GammaMeasure, mut theta: Vec<f64>, max_iter: usize) -> (f64, bool) {
    let n = gm.n;
    let w = gm.weights();
    let wmax = w.iter().copied().fold(0.0, f64::max);
    let floor = 1e-12 * wmax;
    // outside the numerically resolved support g is held at its boundary
    // values, so those sites carry neither energy nor resolvable entropy
    let lo = w.iter().position(|&x| x >= 1e-250 * wmax).unwrap_or(0);
    let hi = w.iter().rposition(|&x| x >= 1e-250 * wmax).unwrap_or(n - 1);
    let eval = |theta: &[f64]| -> (Vec<f64>, f64) {
        let g: Vec<f64> = (0..n).map(|k| softplus(theta[k.clamp(lo, hi)])).collect();
        if g.iter().any(|x| !(x * x).is_finite()) {
            return (g, f64::NAN);
        }
        let r = ratio(gm, &g);
        (g, r)
    };
    let (mut g, mut r) = eval(&theta);
    let mut best = r;
    let mut step = 1.0;
    for _ in 0..max_iter {
        let d = bd_dirichlet(gm, &g).unwrap_or(0.0);
        if d <= 0.0 {
            return (best, true);
        }
        let s = kahan_sum(w.iter().zip(&g).map(|(a, x)| a * x * x));
        let mut grad = vec![0.0; n];
        for k in lo..=hi {
            let de = if g[k] > 0.0 { 2.0 * w[k] * g[k] * (g[k] * g[k] / s).ln() } else { 0.0 };
            let mut dd = 0.0;
            if k >= 1 {
                dd += 2.0 * w[k] * (k + 1) as f64 * (g[k] - g[k - 1]);
            }
            if k + 1 < n {
                dd -= 2.0 * w[k + 1] * (k + 2) as f64 * (g[k + 1] - g[k]);
            }
            // gamma-weighted metric, chain rule through softplus
            let weight = w[k].max(floor);
            grad[k] = (de - r * dd) / d * sigmoid(theta[k]) / weight;
        }
        let slope: f64 = kahan_sum(w.iter().zip(&grad).map(|(a, x)| a.max(floor) * x * x));
        if !(slope > 0.0 && slope.is_finite()) {
            return (best, true);
        }
        let mut s_try = step * 2.0;
        let mut accepted = false;
        while s_try > 1e-14 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, d)| t + s_try * d).collect();
            let (gt, rt) = eval(&trial);
            if rt.is_finite() && rt >= r + 1e-4 * s_try * slope {
                theta = trial;
                g = gt;
                let gain = rt - r;
                r = rt;
                best = best.max(r);
                step = s_try;
                accepted = true;
                if gain <= 1e-12 * r {
                    return (best, true);
                }
                break;
            }
            s_try *= 0.5;
        }
        if !accepted {
            return (best, true);
        }
    }
    (best, false)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlipGradientCheck {
    /// `max_k ([g(k)-g(k-1)]^2 - 2/(n-k+1) sum_y mu(...| N=k-1))`; nonpositive when the bound holds.
    pub worst_excess: f64,
    /// `|sum_k gamma(k) k [g(k)-g(k-1)]^2 bound - 2p/(1-p) flip form|`, relative.
    pub summation_residual: f64,
}

/// For `g(k) = mu(f^2 | N=k)^{1/2}`, compares each squared increment of `g`
/// with the conditional single-flip energy at level `k-1`, and checks the
/// identity turning the weighted sum of those energies into the
/// single-flip form.
pub fn flip_gradient_check(space: &StateSpace, p: f64, f: &[f64]) -> Result<FlipGradientCheck> {
    if f.len() != space.len() {
        return Err(Error::Dimension { expected: space.len(), got: f.len() });
    }
    let n = space.n();
    let mu = space.bernoulli_measure(p);
    let w = mu.weights();
    let mut level_mass = vec![0.0; n + 1];
    let mut level_f2 = vec![0.0; n + 1];
    let mut level_flip = vec![0.0; n + 1];
    for (i, &m) in space.states().iter().enumerate() {
        let k = m.count_ones() as usize;
        level_mass[k] += w[i];
        level_f2[k] += w[i] * f[i] * f[i];
        for y in 0..n {
            if m >> y & 1 == 0 {
                let j = space.index_of(m | 1 << y).expect("adding a particle stays in Omega_+");
                level_flip[k] += w[i] * (f[i] - f[j]).powi(2);
            }
        }
    }
    let g: Vec<f64> = (0..=n)
        .map(|k| if level_mass[k] > 0.0 { (level_f2[k] / level_mass[k]).sqrt() } else { 0.0 })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let gm = GammaMeasure::new(n, p)?;
    let mut weighted = 0.0;
    for k in 2..=n {
        let cond = level_flip[k - 1] / level_mass[k - 1];
        let bound = 2.0 / (n - k + 1) as f64 * cond;
        worst = worst.max((g[k] - g[k - 1]).powi(2) - bound);
        weighted += gm.weight(k) * k as f64 * bound;
    }
    let flip_total: f64 = level_flip.iter().sum();
    let target = 2.0 * p / (1.0 - p) * flip_total;
    let summation_residual = if target > 0.0 { (weighted - target).abs() / target } else { weighted.abs() };
    Ok(FlipGradientCheck { worst_excess: worst, summation_residual })
}
