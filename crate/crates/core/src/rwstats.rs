//! Random-walk reference quantities: lazy mixing time, meeting time of two
//! rate-one walks, and the cover-time quantile.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::stats;

pub const LAZY_MIXING_CAP: usize = 2000;
pub const MEETING_EXACT_CAP: usize = 300;
pub const DEFAULT_TV_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkKind {
    /// Discrete time, uniform neighbour each step.
    Discrete,
    /// Continuous time, rate one across each incident edge.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    pub stderr: f64,
}

fn max_tv_to_stationary(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..p.nrows())
        .map(|x| 0.5 * (0..p.ncols()).map(|y| (p[(x, y)] - pi[y]).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest integer `t` with `max_x TV(P^t(x, .), pi) <= threshold` for the
/// lazy walk `P = (I + D^{-1} A) / 2`; binary lifting over repeated squares.
pub fn lazy_mixing_time(graph: &Graph, threshold: f64) -> Result<u64> {
    let n = graph.n();
    if n > LAZY_MIXING_CAP {
        return Err(Error::Size { what: "vertices for lazy mixing", got: n as u64, cap: LAZY_MIXING_CAP as u64 });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Parameter(format!("threshold must lie in (0,1), got {threshold}")));
    }
    let two_e = 2.0 * graph.num_edges() as f64;
    let pi: Vec<f64> = (0..n).map(|x| graph.degree(x) as f64 / two_e).collect();
    let mut step = DMatrix::zeros(n, n);
    for x in 0..n {
        step[(x, x)] += 0.5;
        let d = graph.degree(x) as f64;
        for &y in graph.neighbors(x) {
            step[(x, y)] += 0.5 / d;
        }
    }
    let id = DMatrix::identity(n, n);
    if max_tv_to_stationary(&id, &pi) <= threshold {
        return Ok(0);
    }
    let mut powers = vec![step];
    while max_tv_to_stationary(powers.last().unwrap(), &pi) > threshold {
        if powers.len() > 62 {
            return Err(Error::Convergence { method: "lazy mixing", iterations: 62, residual: threshold });
        }
        let last = powers.last().unwrap();
        powers.push(last * last);
    }
    // largest t with distance above threshold, bit by bit
    let mut cur = id;
    let mut t = 0u64;
    for (j, pw) in powers.iter().enumerate().rev() {
        let cand = &cur * pw;
        if max_tv_to_stationary(&cand, &pi) > threshold {
            cur = cand;
            t += 1 << j;
        }
    }
    Ok(t + 1)
}

/// Expected meeting time of two independent continuous-time walks with rate
/// one per edge, from independent uniform starts (coinciding starts count
/// as zero). Exact linear solve on the product chain up to
/// [`MEETING_EXACT_CAP`] vertices, Monte Carlo above.
pub fn expected_meeting_time(graph: &Graph, mc_samples: usize, seed: u64) -> Result<Estimate> {
    let n = graph.n();
    if n <= MEETING_EXACT_CAP {
        return Ok(Estimate { value: meeting_time_exact(graph)?, method: Method::Exact, stderr: 0.0 });
    }
    meeting_time_mc(graph, mc_samples, seed)
}

pub fn meeting_time_exact(graph: &Graph) -> Result<f64> {
    let n = graph.n();
    if n < 2 {
        return Ok(0.0);
    }
    let idx = |x: usize, y: usize| x * n + y;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).filter(|(x, y)| x != y).collect();
    let mut index = vec![usize::MAX; n * n];
    for (i, &(x, y)) in pairs.iter().enumerate() {
        index[idx(x, y)] = i;
    }
    let mut trip = Vec::new();
    for (i, &(x, y)) in pairs.iter().enumerate() {
        trip.push((i, i, (graph.degree(x) + graph.degree(y)) as f64));
        for &u in graph.neighbors(x) {
            if u != y {
                trip.push((i, index[idx(u, y)], -1.0));
            }
        }
        for &v in graph.neighbors(y) {
            if v != x {
                trip.push((i, index[idx(x, v)], -1.0));
            }
        }
    }
    let m = CsrMatrix::from_triplets(pairs.len(), pairs.len(), trip);
    let ones = vec![1.0; pairs.len()];
    let h = conjugate_gradient(|a, b| m.mul_vec_into(a, b), &ones, 1e-12, 50 * pairs.len().max(100))?;
    Ok(h.iter().sum::<f64>() / (n * n) as f64)
}

pub fn meeting_time_mc(graph: &Graph, samples: usize, seed: u64) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<f64> = (0..samples)
        .map(|_| {
            let (mut x, mut y) = (rng.random_range(0..n), rng.random_range(0..n));
            let mut t = 0.0;
            while x != y {
                let (dx, dy) = (graph.degree(x), graph.degree(y));
                let total = (dx + dy) as f64;
                t += Exp::new(total).expect("positive rate").sample(&mut rng);
                let k = rng.random_range(0..dx + dy);
                if k < dx {
                    x = graph.neighbors(x)[k];
                } else {
                    y = graph.neighbors(y)[k - dx];
                }
            }
            t
        })
        .collect();
    let (mean, se) = stats::mean_stderr(&times);
    Ok(Estimate { value: mean, method: Method::Mc, stderr: se })
}

/// Sorted cover-time samples from one start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartCurve {
    pub start: usize,
    pub sorted_times: Vec<f64>,
}

impl StartCurve {
    /// Empirical `P(tau > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        let above = self.sorted_times.len() - self.sorted_times.partition_point(|&s| s <= t);
        above as f64 / self.sorted_times.len() as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverTime {
    /// `inf{t : max_x P_x(tau_cov > t) <= 1/e}` from the empirical laws.
    pub estimate: f64,
    /// 95% band from order-statistic inversion of the binomial.
    pub band: (f64, f64),
    pub curves: Vec<StartCurve>,
}

/// Empirical `1/e` survival quantile of the cover time, maximised over
/// starts. For `n = 1` the cover time is zero.
pub fn cover_time_quantile(graph: &Graph, kind: WalkKind, samples: usize, seed: u64) -> Result<CoverTime> {
    let n = graph.n();
    if n == 1 {
        return Ok(CoverTime { estimate: 0.0, band: (0.0, 0.0), curves: vec![StartCurve { start: 0, sorted_times: vec![0.0] }] });
    }
    if samples < 100 {
        return Err(Error::Parameter(format!("cover time needs at least 100 samples, got {samples}")));
    }
    let mut curves = Vec::with_capacity(n);
    for start in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(start as u64);
        let mut times: Vec<f64> = (0..samples).map(|_| cover_once(graph, kind, start, &mut rng)).collect();
        times.sort_by(f64::total_cmp);
        curves.push(StartCurve { start, sorted_times: times });
    }
    // P(tau > t) <= 1/e  <=>  t >= the ceil(N (1 - 1/e))-th order statistic
    let q = 1.0 - (-1.0f64).exp();
    let (lo, mid, hi) = stats::quantile_order_statistics(samples, q, 1.96);
    let pick = |k: usize| curves.iter().map(|c| c.sorted_times[k]).fold(0.0, f64::max);
    Ok(CoverTime { estimate: pick(mid), band: (pick(lo), pick(hi)), curves })
}

fn cover_once(graph: &Graph, kind: WalkKind, start: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = graph.n();
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut remaining = n - 1;
    let mut at = start;
    let mut t = 0.0;
    while remaining > 0 {
        let nb = graph.neighbors(at);
        t += match kind {
            WalkKind::Discrete => 1.0,
            WalkKind::Continuous => Exp::new(nb.len() as f64).expect("positive degree").sample(rng),
        };
        at = nb[rng.random_range(0..nb.len())];
        if !seen[at] {
            seen[at] = true;
            remaining -= 1;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn two_vertex_lazy_walk_mixes_in_one_step() {
        assert_eq!(lazy_mixing_time(&graph::complete(2).unwrap(), 0.25).unwrap(), 1);
    }

    #[test]
    fn two_vertex_meeting() {
        assert!((meeting_time_exact(&graph::complete(2).unwrap()).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_vertex_cover() {
        let g = Graph::from_edges(1, &[]).unwrap();
        assert_eq!(cover_time_quantile(&g, WalkKind::Discrete, 100, 1).unwrap().estimate, 0.0);
    }
}
