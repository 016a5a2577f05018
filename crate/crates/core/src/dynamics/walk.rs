//! The embedded walk, its cover time, and Monte Carlo estimators built on
//! streamed timelines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{ParticleConfig, StateSpace};
use crate::stats;

use super::evolve::{hitting_time_n1, BinaryDynamics, HittingTime};
use super::timeline::{Clock, Event, EventStream};

/// Seed of replica `index` under master seed `seed` (SplitMix64 finaliser).
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkPath {
    pub start: usize,
    /// `(time, new position)` per jump.
    pub jumps: Vec<(f64, usize)>,
    /// The walker's site was occupied after every event.
    pub invariant_held: bool,
}

impl WalkPath {
    pub fn position_at(&self, t: f64) -> usize {
        self.jumps.iter().take_while(|j| j.0 <= t).last().map_or(self.start, |j| j.1)
    }
}

/// Walker jumping from `W` to `u` at each arrival of the oriented clock
/// `(u, W)`, run alongside CBSEP from `omega0`.
pub fn embedded_walk(
    graph: &Graph,
    omega0: &ParticleConfig,
    v: usize,
    events: impl IntoIterator<Item = Event>,
) -> Result<WalkPath> {
    let mut walk = WalkRunner::new(graph, omega0, v)?;
    for ev in events {
        walk.step(graph, &ev);
    }
    Ok(WalkPath { start: v, jumps: walk.jumps, invariant_held: walk.invariant_held })
}

struct WalkRunner {
    dynamics: BinaryDynamics,
    at: usize,
    jumps: Vec<(f64, usize)>,
    invariant_held: bool,
}

impl WalkRunner {
    fn new(graph: &Graph, omega0: &ParticleConfig, v: usize) -> Result<Self> {
        if omega0.n() != graph.n() || v >= graph.n() {
            return Err(Error::Parameter("start vertex or configuration does not fit the graph".into()));
        }
        if !omega0.get(v) {
            return Err(Error::Domain(format!("walk start {v} is not occupied")));
        }
        Ok(WalkRunner { dynamics: BinaryDynamics::cbsep(omega0)?, at: v, jumps: Vec::new(), invariant_held: true })
    }

    fn step(&mut self, graph: &Graph, ev: &Event) -> bool {
        self.dynamics.apply(graph, ev);
        let mut jumped = false;
        if let Clock::Oriented(o) = ev.clock {
            let (u, w) = graph.oriented_edge(o);
            if w == self.at {
                self.at = u;
                self.jumps.push((ev.time, u));
                jumped = true;
            }
        }
        self.invariant_held &= self.dynamics.get(self.at);
        jumped
    }
}

/// Cover-time samples of the embedded walk from one start; censored samples
/// are stored as `+inf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaCurve {
    pub start: usize,
    pub sorted_times: Vec<f64>,
    pub censored: usize,
}

impl SigmaCurve {
    pub fn survival(&self, t: f64) -> f64 {
        let above = self.sorted_times.len() - self.sorted_times.partition_point(|&s| s <= t);
        above as f64 / self.sorted_times.len() as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaCover {
    pub curves: Vec<SigmaCurve>,
    pub invariant_held: bool,
}

impl SigmaCover {
    /// `max_v P_v(sigma_cov > t)` with a 95% Wilson band around the
    /// maximising start.
    pub fn max_survival(&self, t: f64) -> (f64, (f64, f64)) {
        let best = self
            .curves
            .iter()
            .max_by(|a, b| a.survival(t).total_cmp(&b.survival(t)))
            .expect("at least one start");
        let k = best.sorted_times.len();
        let above = k - best.sorted_times.partition_point(|&s| s <= t);
        (best.survival(t), stats::wilson_interval(above, k, 1.96))
    }
}

/// Monte Carlo law of the embedded walk's cover time from every start, each
/// sample on its own streamed timeline (started from the full
/// configuration) and censored at `horizon`.
pub fn sigma_cov_estimate(graph: &Graph, p: f64, samples: usize, horizon: f64, seed: u64) -> Result<SigmaCover> {
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let n = graph.n();
    let full = ParticleConfig::full(n);
    let mut curves = Vec::with_capacity(n);
    let mut invariant_held = true;
    for start in 0..n {
        let mut times = Vec::with_capacity(samples);
        let mut censored = 0;
        for k in 0..samples {
            let s = replica_seed(seed, (start * samples + k) as u64);
            let mut walk = WalkRunner::new(graph, &full, start)?;
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut remaining = n - 1;
            let mut covered_at = if remaining == 0 { Some(0.0) } else { None };
            for ev in EventStream::new(graph, p, horizon, s)? {
                if covered_at.is_some() {
                    break;
                }
                if walk.step(graph, &ev) && !seen[walk.at] {
                    seen[walk.at] = true;
                    remaining -= 1;
                    if remaining == 0 {
                        covered_at = Some(ev.time);
                    }
                }
            }
            invariant_held &= walk.invariant_held;
            times.push(covered_at.unwrap_or_else(|| {
                censored += 1;
                f64::INFINITY
            }));
        }
        times.sort_by(f64::total_cmp);
        curves.push(SigmaCurve { start, sorted_times: times, censored });
    }
    Ok(SigmaCover { curves, invariant_held })
}

/// Empirical law of CBSEP at time `t` from `omega0`, indexed like `space`.
pub fn empirical_law(
    graph: &Graph,
    p: f64,
    omega0: &ParticleConfig,
    t: f64,
    space: &StateSpace,
    runs: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; space.len()];
    for r in 0..runs {
        let mut d = BinaryDynamics::cbsep(omega0)?;
        for ev in EventStream::new(graph, p, t, replica_seed(seed, r as u64))? {
            d.apply(graph, &ev);
        }
        let idx = space
            .index_of(d.config().mask() as u32)
            .ok_or_else(|| Error::Domain("simulated state outside the enumerated space".into()))?;
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Monte Carlo `E_{mu(. | N = 2)}(tau)` for `tau` the hitting time of
/// `{N = 1}`: two particles at a uniform pair of distinct sites.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HittingEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub censored: usize,
}

pub fn mean_hitting_time_two(graph: &Graph, p: f64, runs: usize, horizon: f64, seed: u64) -> Result<HittingEstimate> {
    let n = graph.n();
    if n < 2 {
        return Err(Error::Domain("two particles need two vertices".into()));
    }
    let mut pick = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(runs);
    let mut censored = 0;
    for r in 0..runs {
        let x = pick.random_range(0..n);
        let mut y = pick.random_range(0..n - 1);
        if y >= x {
            y += 1;
        }
        let omega0 = ParticleConfig::from_sites(n, &[x, y]);
        let events = EventStream::new(graph, p, horizon, replica_seed(seed, r as u64))?;
        let HittingTime { time, censored: c } = hitting_time_n1(graph, &omega0, horizon, events)?;
        censored += usize::from(c);
        times.push(time);
    }
    let (mean, stderr) = stats::mean_stderr(&times);
    Ok(HittingEstimate { mean, stderr, censored })
}
