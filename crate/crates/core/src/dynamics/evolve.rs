//! CBSEP, CSEP and g-CBSEP driven by a shared stream of clock arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::spectral::{ParticleConfig, SiteSpace};

use super::timeline::{Clock, Event};

/// Effect of one arrival on a `{0,1}`-valued edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    /// Edge empty, nothing happens.
    Ignored,
    /// Edge resampled into its previous state.
    Idle,
    Sep,
    Branch,
    Coalesce,
}

/// Endpoints touched by `clock`: the oriented edge itself, or `(min, max)`
/// for an unordered edge.
pub fn clock_sites(graph: &Graph, clock: Clock) -> (usize, usize) {
    match clock {
        Clock::Edge(e) => graph.edges()[e],
        Clock::Oriented(o) => graph.oriented_edge(o),
    }
}

/// `{0,1}` dynamics: CBSEP, or CSEP when `branching` is off.
#[derive(Debug, Clone)]
pub struct BinaryDynamics {
    occupancy: Vec<bool>,
    count: usize,
    branching: bool,
}

impl BinaryDynamics {
    pub fn cbsep(omega0: &ParticleConfig) -> Result<Self> {
        Self::new(omega0, true)
    }

    pub fn csep(omega0: &ParticleConfig) -> Result<Self> {
        Self::new(omega0, false)
    }

    fn new(omega0: &ParticleConfig, branching: bool) -> Result<Self> {
        if omega0.is_empty() {
            return Err(Error::Domain("initial configuration has no particle".into()));
        }
        Ok(BinaryDynamics { occupancy: omega0.occupancy().to_vec(), count: omega0.count(), branching })
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn get(&self, x: usize) -> bool {
        self.occupancy[x]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn config(&self) -> ParticleConfig {
        ParticleConfig::new(self.occupancy.clone())
    }

    fn set(&mut self, x: usize, v: bool) {
        if self.occupancy[x] != v {
            self.occupancy[x] = v;
            if v {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    pub fn apply(&mut self, graph: &Graph, event: &Event) -> Move {
        let (u, v) = clock_sites(graph, event.clock);
        let (a, b) = (self.occupancy[u], self.occupancy[v]);
        if !a && !b {
            return Move::Ignored;
        }
        match event.clock {
            Clock::Edge(_) if !self.branching => Move::Ignored,
            Clock::Edge(_) => {
                self.set(u, true);
                self.set(v, true);
                if a && b {
                    Move::Idle
                } else {
                    Move::Branch
                }
            }
            Clock::Oriented(_) => {
                self.set(u, true);
                self.set(v, false);
                match (a, b) {
                    (true, false) => Move::Idle,
                    (false, true) => Move::Sep,
                    _ => Move::Coalesce,
                }
            }
        }
    }
}

/// g-CBSEP on `S^V`. The resampling variables of the `k`-th arrival of a
/// clock are read from a ChaCha stream keyed by `seed2` and the clock id,
/// at word offset `16 k`, and mapped through the conditional inverse CDFs.
#[derive(Debug, Clone)]
pub struct GeneralDynamics {
    state: Vec<usize>,
    site: SiteSpace,
    cdf: [Vec<f64>; 2],
    seed2: u64,
    num_edges: usize,
}

impl GeneralDynamics {
    pub fn new(graph: &Graph, omega0: &[usize], site: &SiteSpace, seed2: u64) -> Result<Self> {
        if omega0.len() != graph.n() {
            return Err(Error::Dimension { expected: graph.n(), got: omega0.len() });
        }
        if let Some(&s) = omega0.iter().find(|&&s| s >= site.size()) {
            return Err(Error::Parameter(format!("site value {s} outside S")));
        }
        if !omega0.iter().any(|&s| site.is_particle(s)) {
            return Err(Error::Domain("initial projection has no particle".into()));
        }
        let cumulative = |w: Vec<f64>| {
            let mut acc = 0.0;
            w.into_iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect::<Vec<_>>()
        };
        Ok(GeneralDynamics {
            state: omega0.to_vec(),
            site: site.clone(),
            cdf: [cumulative(site.conditional(false)), cumulative(site.conditional(true))],
            seed2,
            num_edges: graph.num_edges(),
        })
    }

    pub fn state(&self) -> &[usize] {
        &self.state
    }

    pub fn projection(&self) -> Vec<bool> {
        self.state.iter().map(|&s| self.site.is_particle(s)).collect()
    }

    fn draw(&self, particle: bool, u: f64) -> usize {
        let cdf = &self.cdf[usize::from(particle)];
        let k = cdf.partition_point(|&c| c <= u);
        if k < cdf.len() {
            k
        } else {
            // round-off in the last cumulative value
            (0..cdf.len()).rev().find(|&s| self.site.is_particle(s) == particle).expect("class nonempty")
        }
    }

    /// Applies one arrival; returns whether the edge event `E^(g)` held.
    pub fn apply(&mut self, graph: &Graph, event: &Event) -> bool {
        let (u, v) = clock_sites(graph, event.clock);
        if !(self.site.is_particle(self.state[u]) || self.site.is_particle(self.state[v])) {
            return false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed2);
        rng.set_stream(event.clock.id(self.num_edges) as u64);
        rng.set_word_pos(16 * event.seq as u128);
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let second_particle = matches!(event.clock, Clock::Edge(_));
        self.state[u] = self.draw(true, x);
        self.state[v] = self.draw(second_particle, y);
        true
    }
}

/// One recorded event: the edge state was resampled (its event held).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub time: f64,
    pub clock: Clock,
    pub sites: (usize, usize),
    pub before: (usize, usize),
    pub after: (usize, usize),
}

/// Initial configuration and the ordered list of acting events. Site values
/// are `0/1` for the particle systems and elements of `S` for g-CBSEP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: Vec<usize>,
    pub steps: Vec<Step>,
}

impl Trajectory {
    /// Configuration just after all steps with time `<= t`.
    pub fn config_at(&self, t: f64) -> Vec<usize> {
        let mut c = self.initial.clone();
        for s in self.steps.iter().take_while(|s| s.time <= t) {
            c[s.sites.0] = s.after.0;
            c[s.sites.1] = s.after.1;
        }
        c
    }

    pub fn final_config(&self) -> Vec<usize> {
        self.config_at(f64::INFINITY)
    }
}

fn binary_trajectory(
    graph: &Graph,
    mut dynamics: BinaryDynamics,
    events: impl IntoIterator<Item = Event>,
) -> Trajectory {
    let initial: Vec<usize> = dynamics.occupancy().iter().map(|&b| usize::from(b)).collect();
    let mut steps = Vec::new();
    for ev in events {
        let (u, v) = clock_sites(graph, ev.clock);
        let before = (usize::from(dynamics.get(u)), usize::from(dynamics.get(v)));
        if dynamics.apply(graph, &ev) != Move::Ignored {
            let after = (usize::from(dynamics.get(u)), usize::from(dynamics.get(v)));
            steps.push(Step { time: ev.time, clock: ev.clock, sites: (u, v), before, after });
        }
    }
    Trajectory { initial, steps }
}

pub fn evolve_cbsep(graph: &Graph, omega0: &ParticleConfig, events: impl IntoIterator<Item = Event>) -> Result<Trajectory> {
    check_size(graph, omega0)?;
    Ok(binary_trajectory(graph, BinaryDynamics::cbsep(omega0)?, events))
}

pub fn evolve_csep(graph: &Graph, omega0: &ParticleConfig, events: impl IntoIterator<Item = Event>) -> Result<Trajectory> {
    check_size(graph, omega0)?;
    Ok(binary_trajectory(graph, BinaryDynamics::csep(omega0)?, events))
}

pub fn evolve_gcbsep(
    graph: &Graph,
    omega0: &[usize],
    site: &SiteSpace,
    seed2: u64,
    events: impl IntoIterator<Item = Event>,
) -> Result<Trajectory> {
    let mut dynamics = GeneralDynamics::new(graph, omega0, site, seed2)?;
    let mut steps = Vec::new();
    for ev in events {
        let (u, v) = clock_sites(graph, ev.clock);
        let before = (dynamics.state[u], dynamics.state[v]);
        if dynamics.apply(graph, &ev) {
            steps.push(Step { time: ev.time, clock: ev.clock, sites: (u, v), before, after: (dynamics.state[u], dynamics.state[v]) });
        }
    }
    Ok(Trajectory { initial: omega0.to_vec(), steps })
}

fn check_size(graph: &Graph, omega0: &ParticleConfig) -> Result<()> {
    if omega0.n() != graph.n() {
        return Err(Error::Dimension { expected: graph.n(), got: omega0.n() });
    }
    Ok(())
}

/// Whether the projection of a g-CBSEP trajectory equals a CBSEP
/// trajectory step by step.
pub fn projection_matches(general: &Trajectory, binary: &Trajectory, site: &SiteSpace) -> bool {
    let proj = |s: usize| usize::from(site.is_particle(s));
    general.initial.iter().map(|&s| proj(s)).eq(binary.initial.iter().copied())
        && general.steps.len() == binary.steps.len()
        && general.steps.iter().zip(&binary.steps).all(|(g, b)| {
            g.time == b.time
                && g.clock == b.clock
                && (proj(g.after.0), proj(g.after.1)) == b.after
                && (proj(g.before.0), proj(g.before.1)) == b.before
        })
}

/// First time each vertex took part in an acting event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpdatedSet {
    pub first_update: Vec<Option<f64>>,
}

impl UpdatedSet {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let mut first_update = vec![None; traj.initial.len()];
        for s in &traj.steps {
            for x in [s.sites.0, s.sites.1] {
                first_update[x].get_or_insert(s.time);
            }
        }
        UpdatedSet { first_update }
    }

    pub fn contains(&self, x: usize, t: f64) -> bool {
        self.first_update[x].is_some_and(|s| s <= t)
    }

    pub fn members(&self, t: f64) -> Vec<usize> {
        (0..self.first_update.len()).filter(|&x| self.contains(x, t)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrandCoupling {
    pub trajectories: Vec<Trajectory>,
    /// First time all trajectories agree; `None` if not within the events.
    pub coalescence_time: Option<f64>,
    /// Ordered initial pairs found out of order after some event.
    pub order_violations: u64,
}

/// CBSEP from every start on the same arrivals.
pub fn grand_coupling(graph: &Graph, starts: &[ParticleConfig], events: &[Event]) -> Result<GrandCoupling> {
    let mut dyns = starts
        .iter()
        .map(|s| {
            check_size(graph, s)?;
            BinaryDynamics::cbsep(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let ordered: Vec<(usize, usize)> = (0..starts.len())
        .flat_map(|i| (0..starts.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && starts[i].is_below(&starts[j]))
        .collect();
    let all_equal = |d: &[BinaryDynamics]| d.windows(2).all(|w| w[0].occupancy() == w[1].occupancy());
    let mut coalescence_time = if all_equal(&dyns) { Some(0.0) } else { None };
    let mut order_violations = 0;
    for ev in events {
        for d in dyns.iter_mut() {
            d.apply(graph, ev);
        }
        order_violations += ordered
            .iter()
            .filter(|&&(i, j)| dyns[i].occupancy().iter().zip(dyns[j].occupancy()).any(|(&a, &b)| a && !b))
            .count() as u64;
        if coalescence_time.is_none() && all_equal(&dyns) {
            coalescence_time = Some(ev.time);
        }
    }
    let trajectories = starts.iter().map(|s| binary_trajectory(graph, BinaryDynamics::cbsep(s).expect("checked"), events.iter().copied())).collect();
    Ok(GrandCoupling { trajectories, coalescence_time, order_violations })
}

/// Pathwise comparison counts for one shared run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonCounts {
    pub events: u64,
    /// Events after which the lower CBSEP is not below the upper one.
    pub order_violations: u64,
    /// Events after which CSEP (from the lower start) is not below CBSEP.
    pub inclusion_violations: u64,
    /// Events at which the CSEP particle count increased.
    pub csep_growth: u64,
}

/// Runs CBSEP from `lower` and `upper` and CSEP from `lower` together.
pub fn compare_coupled(
    graph: &Graph,
    lower: &ParticleConfig,
    upper: &ParticleConfig,
    events: impl IntoIterator<Item = Event>,
) -> Result<ComparisonCounts> {
    check_size(graph, lower)?;
    check_size(graph, upper)?;
    if !lower.is_below(upper) {
        return Err(Error::Parameter("lower start is not below upper start".into()));
    }
    let mut lo = BinaryDynamics::cbsep(lower)?;
    let mut hi = BinaryDynamics::cbsep(upper)?;
    let mut cs = BinaryDynamics::csep(lower)?;
    let mut c = ComparisonCounts::default();
    let below = |a: &BinaryDynamics, b: &BinaryDynamics| a.occupancy().iter().zip(b.occupancy()).all(|(&x, &y)| !x || y);
    for ev in events {
        lo.apply(graph, &ev);
        hi.apply(graph, &ev);
        let before = cs.count();
        cs.apply(graph, &ev);
        c.events += 1;
        c.order_violations += u64::from(!below(&lo, &hi));
        c.inclusion_violations += u64::from(!below(&cs, &lo));
        c.csep_growth += u64::from(cs.count() > before);
    }
    Ok(c)
}

/// Move counts and exposures (time-integrated numbers of edges holding one
/// or two particles) for the per-move rate check.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MoveRates {
    pub events: u64,
    pub sep: u64,
    pub branch: u64,
    pub coalesce: u64,
    pub single_exposure: f64,
    pub double_exposure: f64,
}

impl MoveRates {
    /// Empirical `(sep, branch, coalesce)` rates per eligible edge.
    pub fn rates(&self) -> (f64, f64, f64) {
        (
            self.sep as f64 / self.single_exposure,
            self.branch as f64 / self.single_exposure,
            self.coalesce as f64 / self.double_exposure,
        )
    }

    /// Nominal `(sep, branch, coalesce)` rates.
    pub fn nominal(p: f64) -> (f64, f64, f64) {
        ((1.0 - p) / (2.0 - p), p / (2.0 - p), 2.0 * (1.0 - p) / (2.0 - p))
    }
}

pub fn count_move_rates(
    graph: &Graph,
    omega0: &ParticleConfig,
    horizon: f64,
    events: impl IntoIterator<Item = Event>,
) -> Result<MoveRates> {
    check_size(graph, omega0)?;
    let mut d = BinaryDynamics::cbsep(omega0)?;
    let edge_load = |d: &BinaryDynamics, e: usize| {
        let (a, b) = graph.edges()[e];
        usize::from(d.get(a)) + usize::from(d.get(b))
    };
    let mut by_load = [0usize; 3];
    for e in 0..graph.num_edges() {
        by_load[edge_load(&d, e)] += 1;
    }
    let mut r = MoveRates::default();
    let mut clock = 0.0;
    let mut touched = Vec::new();
    for ev in events {
        r.single_exposure += by_load[1] as f64 * (ev.time - clock);
        r.double_exposure += by_load[2] as f64 * (ev.time - clock);
        clock = ev.time;
        let (u, v) = clock_sites(graph, ev.clock);
        touched.clear();
        for x in [u, v] {
            for &y in graph.neighbors(x) {
                touched.push(graph.edge_index(x, y).expect("adjacent"));
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for &e in &touched {
            by_load[edge_load(&d, e)] -= 1;
        }
        let mv = d.apply(graph, &ev);
        for &e in &touched {
            by_load[edge_load(&d, e)] += 1;
        }
        r.events += 1;
        match mv {
            Move::Sep => r.sep += 1,
            Move::Branch => r.branch += 1,
            Move::Coalesce => r.coalesce += 1,
            Move::Idle | Move::Ignored => {}
        }
    }
    r.single_exposure += by_load[1] as f64 * (horizon - clock).max(0.0);
    r.double_exposure += by_load[2] as f64 * (horizon - clock).max(0.0);
    Ok(r)
}

/// Hitting time of `{N = 1}`; `censored` when not reached by the last event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingTime {
    pub time: f64,
    pub censored: bool,
}

pub fn hitting_time_n1(
    graph: &Graph,
    omega0: &ParticleConfig,
    horizon: f64,
    events: impl IntoIterator<Item = Event>,
) -> Result<HittingTime> {
    check_size(graph, omega0)?;
    let mut d = BinaryDynamics::cbsep(omega0)?;
    if d.count() == 1 {
        return Ok(HittingTime { time: 0.0, censored: false });
    }
    for ev in events {
        d.apply(graph, &ev);
        if d.count() == 1 {
            return Ok(HittingTime { time: ev.time, censored: false });
        }
    }
    Ok(HittingTime { time: horizon, censored: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    fn ev(time: f64, clock: Clock) -> Event {
        Event { time, clock, seq: 0 }
    }

    #[test]
    fn oriented_event_moves_particle() {
        let g = graph::path(2).unwrap();
        let start = ParticleConfig::from_sites(2, &[0]);
        // oriented id 1 is (1, 0)
        let traj = evolve_cbsep(&g, &start, [ev(0.5, Clock::Oriented(1))]).unwrap();
        assert_eq!(traj.final_config(), vec![0, 1]);
        assert_eq!(traj.config_at(0.4), vec![1, 0]);
    }

    #[test]
    fn csep_adjacent_pair_coalesces() {
        let g = graph::path(3).unwrap();
        let start = ParticleConfig::from_sites(3, &[0, 1]);
        let traj = evolve_csep(&g, &start, [ev(0.1, Clock::Edge(1)), ev(0.2, Clock::Oriented(0))]).unwrap();
        assert_eq!(traj.final_config(), vec![1, 0, 0]);
    }

    #[test]
    fn empty_start_rejected() {
        let g = graph::path(2).unwrap();
        assert!(evolve_cbsep(&g, &ParticleConfig::empty(2), []).is_err());
    }

    #[test]
    fn binary_site_space_reproduces_cbsep() {
        let g = graph::cycle(5).unwrap();
        let tl = super::super::GraphicalTimeline::build(&g, 0.3, 20.0, 4).unwrap();
        let start = ParticleConfig::from_sites(5, &[2]);
        let site = SiteSpace::binary(0.3).unwrap();
        let a = evolve_cbsep(&g, &start, tl.events.iter().copied()).unwrap();
        let b = evolve_gcbsep(&g, &[0, 0, 1, 0, 0], &site, 9, tl.events.iter().copied()).unwrap();
        assert_eq!(a.steps, b.steps);
    }
}
