//! Poisson clocks of the graphical construction.
//!
//! Clock ids: `e` for the unordered edge `e` (rate `p/(2-p)`), and
//! `m + o` for the oriented edge with id `o` (rate `(1-p)/(2-p)`), where `m`
//! is the number of edges. Each clock draws its gaps from its own ChaCha
//! stream, so streams do not depend on how many other clocks exist.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clock {
    /// Unordered edge id.
    Edge(usize),
    /// Oriented edge id (`2e` for `(a, b)`, `2e + 1` for `(b, a)`).
    Oriented(usize),
}

impl Clock {
    pub fn id(self, num_edges: usize) -> usize {
        match self {
            Clock::Edge(e) => e,
            Clock::Oriented(o) => num_edges + o,
        }
    }

    pub fn from_id(id: usize, num_edges: usize) -> Clock {
        if id < num_edges {
            Clock::Edge(id)
        } else {
            Clock::Oriented(id - num_edges)
        }
    }
}

/// One arrival: `seq` counts previous arrivals of the same clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub clock: Clock,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    id: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // min-heap on time
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.id.cmp(&self.id))
    }
}

/// Nominal clock rates `(unordered, oriented)`.
pub fn clock_rates(p: f64) -> (f64, f64) {
    (p / (2.0 - p), (1.0 - p) / (2.0 - p))
}

/// Lazily merged arrival stream over all clocks up to `horizon`.
pub struct EventStream {
    num_edges: usize,
    horizon: f64,
    rngs: Vec<ChaCha8Rng>,
    gaps: [Exp<f64>; 2],
    prev: Vec<f64>,
    seq: Vec<u64>,
    heap: BinaryHeap<Pending>,
    emitted: f64,
    redraws: u64,
}

impl EventStream {
    pub fn new(graph: &Graph, p: f64, horizon: f64, seed: u64) -> Result<Self> {
        check_probability(p)?;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::Parameter(format!("horizon must be finite and nonnegative, got {horizon}")));
        }
        let m = graph.num_edges();
        let (r_edge, r_oriented) = clock_rates(p);
        let gaps = [
            Exp::new(r_edge).map_err(|e| Error::Parameter(e.to_string()))?,
            Exp::new(r_oriented).map_err(|e| Error::Parameter(e.to_string()))?,
        ];
        let mut s = EventStream {
            num_edges: m,
            horizon,
            rngs: Vec::with_capacity(3 * m),
            gaps,
            prev: vec![0.0; 3 * m],
            seq: vec![0; 3 * m],
            heap: BinaryHeap::with_capacity(3 * m),
            emitted: f64::NEG_INFINITY,
            redraws: 0,
        };
        for id in 0..3 * m {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id as u64);
            s.rngs.push(rng);
            s.schedule(id);
        }
        Ok(s)
    }

    fn schedule(&mut self, id: usize) {
        let kind = usize::from(id >= self.num_edges);
        let t = self.prev[id] + self.gaps[kind].sample(&mut self.rngs[id]);
        if t <= self.horizon {
            self.heap.push(Pending { time: t, id });
        }
    }

    /// Arrivals discarded because they coincided with an earlier one.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }
}

impl Iterator for EventStream {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        loop {
            let top = self.heap.pop()?;
            if top.time <= self.emitted {
                // coincident arrival: redraw this clock's gap
                self.redraws += 1;
                self.schedule(top.id);
                continue;
            }
            self.emitted = top.time;
            self.prev[top.id] = top.time;
            let seq = self.seq[top.id];
            self.seq[top.id] += 1;
            self.schedule(top.id);
            return Some(Event { time: top.time, clock: Clock::from_id(top.id, self.num_edges), seq });
        }
    }
}

/// Fully materialised timeline, shared by coupled trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphicalTimeline {
    pub p: f64,
    pub horizon: f64,
    pub seed: u64,
    pub num_edges: usize,
    pub events: Vec<Event>,
}

impl GraphicalTimeline {
    pub fn build(graph: &Graph, p: f64, horizon: f64, seed: u64) -> Result<Self> {
        let events = EventStream::new(graph, p, horizon, seed)?.collect();
        Ok(GraphicalTimeline { p, horizon, seed, num_edges: graph.num_edges(), events })
    }

    /// Number of arrivals per clock id.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0; 3 * self.num_edges];
        for ev in &self.events {
            c[ev.clock.id(self.num_edges)] += 1;
        }
        c
    }

    /// Largest deviation of a clock count from its Poisson mean, in standard
    /// deviations.
    pub fn max_count_zscore(&self) -> f64 {
        let (r_edge, r_oriented) = clock_rates(self.p);
        self.counts()
            .iter()
            .enumerate()
            .map(|(id, &c)| {
                let mean = self.horizon * if id < self.num_edges { r_edge } else { r_oriented };
                if mean == 0.0 {
                    0.0
                } else {
                    (c as f64 - mean).abs() / mean.sqrt()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Strictly increasing times, consecutive `seq` per clock.
    pub fn is_well_ordered(&self) -> bool {
        let mut next_seq = vec![0u64; 3 * self.num_edges];
        let mut prev = f64::NEG_INFINITY;
        for ev in &self.events {
            let id = ev.clock.id(self.num_edges);
            if ev.time <= prev || ev.seq != next_seq[id] || ev.time > self.horizon {
                return false;
            }
            next_seq[id] += 1;
            prev = ev.time;
        }
        true
    }
}
