//! Finite simple connected graphs, the standard families used in the
//! experiments, degree statistics and the combinatorial Laplacian.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RANDOM_REGULAR_RETRIES: usize = 10_000;

/// Undirected simple connected graph on vertices `0..n`.
///
/// Edges are stored once, smaller endpoint first, sorted. Oriented edges are
/// derived: edge `e = (a, b)` yields oriented ids `2e` for `(a, b)` and
/// `2e + 1` for `(b, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list, normalising orientation and order.
    ///
    /// Rejects loops, repeated edges, out-of-range endpoints and
    /// disconnected inputs.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::Parameter(format!("loop at vertex {u}")));
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::Parameter(format!("repeated edge ({u},{v})")));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        let g = Graph { n, edges, adjacency };
        if !g.is_connected() {
            return Err(Error::Parameter("graph is not connected".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// Oriented edge with id `id` (see the type-level docs for the labelling).
    pub fn oriented_edge(&self, id: usize) -> (usize, usize) {
        let (a, b) = self.edges[id / 2];
        if id % 2 == 0 {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn oriented_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..2 * self.edges.len()).map(move |id| self.oriented_edge(id))
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).ok()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_index(u, v).is_some()
    }

    /// Breadth-first distances from `source`.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].unwrap();
            for &y in &self.adjacency[x] {
                if dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    fn is_connected(&self) -> bool {
        self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// Copy of the graph with one edge deleted, if it stays connected.
    pub fn without_edge(&self, u: usize, v: usize) -> Result<Graph> {
        let key = (u.min(v), u.max(v));
        let edges: Vec<_> = self.edges.iter().copied().filter(|&e| e != key).collect();
        if edges.len() == self.edges.len() {
            return Err(Error::Parameter(format!("no edge ({u},{v})")));
        }
        Graph::from_edges(self.n, &edges)
    }

    /// Copy of the graph with one extra edge.
    pub fn with_edge(&self, u: usize, v: usize) -> Result<Graph> {
        let mut edges = self.edges.clone();
        edges.push((u, v));
        Graph::from_edges(self.n, &edges)
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees = (0..self.n).map(|x| self.degree(x));
        DegreeStats {
            d_min: degrees.clone().min().unwrap_or(0),
            d_max: degrees.max().unwrap_or(0),
            degree_sum: 2 * self.edges.len(),
            n: self.n,
        }
    }

    /// Dense combinatorial Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(a, b) in &self.edges {
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
            l[(a, b)] -= 1.0;
            l[(b, a)] -= 1.0;
        }
        l
    }

    /// Parses the edge-list text format: a header line `n m` followed by
    /// `m` lines `u v`.
    pub fn from_edge_list(text: &str) -> Result<Graph> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            edges.push(parse_pair(line)?);
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header announces {m} edges, found {}", edges.len())));
        }
        Graph::from_edges(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(|t| {
        t.parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad integer {t:?}: {e}")))
    });
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a?, b?)),
        _ => Err(Error::Parse(format!("expected two integers, got {line:?}"))),
    }
}

/// Minimum, maximum and average degree. The average is kept exact as the
/// fraction `degree_sum / n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub d_min: usize,
    pub d_max: usize,
    pub degree_sum: usize,
    pub n: usize,
}

impl DegreeStats {
    pub fn d_avg(&self) -> f64 {
        self.degree_sum as f64 / self.n as f64
    }

    /// `d_avg` as a reduced fraction `(numerator, denominator)`.
    pub fn d_avg_ratio(&self) -> (usize, usize) {
        let g = gcd(self.degree_sum, self.n).max(1);
        (self.degree_sum / g, self.n / g)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// The graph families used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cycle { n: usize },
    Path { n: usize },
    Torus { side: usize, dim: usize },
    Hypercube { dim: usize },
    Complete { n: usize },
    BaryTree { branching: usize, depth: usize },
    RandomRegular { degree: usize, n: usize, seed: u64 },
}

impl Family {
    pub fn build(&self) -> Result<Graph> {
        match *self {
            Family::Cycle { n } => cycle(n),
            Family::Path { n } => path(n),
            Family::Torus { side, dim } => torus(side, dim),
            Family::Hypercube { dim } => hypercube(dim),
            Family::Complete { n } => complete(n),
            Family::BaryTree { branching, depth } => bary_tree(branching, depth),
            Family::RandomRegular { degree, n, seed } => random_regular(degree, n, seed),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Cycle { n } => write!(f, "cycle:{n}"),
            Family::Path { n } => write!(f, "path:{n}"),
            Family::Torus { side, dim } => write!(f, "torus:{side},{dim}"),
            Family::Hypercube { dim } => write!(f, "hypercube:{dim}"),
            Family::Complete { n } => write!(f, "complete:{n}"),
            Family::BaryTree { branching, depth } => write!(f, "tree:{branching},{depth}"),
            Family::RandomRegular { degree, n, seed } => write!(f, "regular:{degree},{n},{seed}"),
        }
    }
}

/// Parses `name:a,b,...`, e.g. `cycle:6`, `torus:4,2`, `tree:2,3`,
/// `regular:3,10,42`.
impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<u64> = args
            .split(',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("bad graph parameter {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("{name} expects {k} parameter(s), got {}", nums.len())))
            }
        };
        let u = |i: usize| nums[i] as usize;
        Ok(match name {
            "cycle" => {
                want(1)?;
                Family::Cycle { n: u(0) }
            }
            "path" => {
                want(1)?;
                Family::Path { n: u(0) }
            }
            "torus" => {
                want(2)?;
                Family::Torus { side: u(0), dim: u(1) }
            }
            "hypercube" => {
                want(1)?;
                Family::Hypercube { dim: u(0) }
            }
            "complete" => {
                want(1)?;
                Family::Complete { n: u(0) }
            }
            "tree" | "bary_tree" => {
                want(2)?;
                Family::BaryTree { branching: u(0), depth: u(1) }
            }
            "regular" | "random_regular" => {
                want(3)?;
                Family::RandomRegular { degree: u(0), n: u(1), seed: nums[2] }
            }
            other => return Err(Error::Parse(format!("unknown graph family {other:?}"))),
        })
    }
}

pub fn cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::Parameter(format!("cycle needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges)
}

pub fn path(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Parameter("path needs n >= 1".into()));
    }
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edges(n, &edges)
}

pub fn complete(n: usize) -> Result<Graph> {
    if n == 0 {
        return Err(Error::Parameter("complete graph needs n >= 1".into()));
    }
    let edges: Vec<_> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    Graph::from_edges(n, &edges)
}

/// Discrete torus `Z_side^dim`. For `side == 2` the two neighbours along an
/// axis coincide and the edge is kept once.
pub fn torus(side: usize, dim: usize) -> Result<Graph> {
    if side < 2 || dim == 0 {
        return Err(Error::Parameter(format!("torus needs side >= 2 and dim >= 1, got ({side},{dim})")));
    }
    let n = side
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::Parameter("torus too large".into()))?;
    let mut set = BTreeSet::new();
    for x in 0..n {
        let mut stride = 1;
        for _ in 0..dim {
            let coord = (x / stride) % side;
            let y = x - coord * stride + ((coord + 1) % side) * stride;
            set.insert((x.min(y), x.max(y)));
            stride *= side;
        }
    }
    let edges: Vec<_> = set.into_iter().collect();
    Graph::from_edges(n, &edges)
}

pub fn hypercube(dim: usize) -> Result<Graph> {
    if dim == 0 || dim > 24 {
        return Err(Error::Parameter(format!("hypercube dimension must be in 1..=24, got {dim}")));
    }
    let n = 1usize << dim;
    let edges: Vec<_> = (0..n)
        .flat_map(|x| (0..dim).map(move |i| (x, x ^ (1 << i))))
        .filter(|&(x, y)| x < y)
        .collect();
    Graph::from_edges(n, &edges)
}

/// Rooted tree in which every internal vertex has `branching` children and
/// all leaves sit at distance `depth` from the root.
pub fn bary_tree(branching: usize, depth: usize) -> Result<Graph> {
    if branching < 1 {
        return Err(Error::Parameter("tree branching must be >= 1".into()));
    }
    let mut edges = Vec::new();
    let mut level = vec![0usize];
    let mut next_id = 1;
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * branching);
        for &parent in &level {
            for _ in 0..branching {
                edges.push((parent, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    Graph::from_edges(next_id, &edges)
}

/// Uniform-ish random `degree`-regular graph from the pairing model, with
/// rejection of loops, multi-edges and disconnected outcomes.
pub fn random_regular(degree: usize, n: usize, seed: u64) -> Result<Graph> {
    if degree == 0 || degree >= n || (degree * n) % 2 != 0 {
        return Err(Error::Parameter(format!(
            "no simple connected {degree}-regular graph on {n} vertices (need 0 < d < n, d*n even)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat_n(x, degree)).collect();
    'attempt: for _ in 0..RANDOM_REGULAR_RETRIES {
        stubs.shuffle(&mut rng);
        let mut set = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if a == b || !set.insert((a.min(b), a.max(b))) {
                continue 'attempt;
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        if let Ok(g) = Graph::from_edges(n, &edges) {
            return Ok(g);
        }
    }
    Err(Error::Parameter(format!(
        "random_regular({degree},{n}) failed after {RANDOM_REGULAR_RETRIES} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_sizes() {
        let t = torus(4, 2).unwrap();
        assert_eq!((t.n(), t.num_edges()), (16, 32));
        assert!((0..16).all(|x| t.degree(x) == 4));

        let h = hypercube(3).unwrap();
        assert_eq!((h.n(), h.num_edges()), (8, 12));
        assert!((0..8).all(|x| h.degree(x) == 3));

        let p = path(4).unwrap();
        let s = p.degree_stats();
        assert_eq!((p.num_edges(), s.d_min, s.d_max), (3, 1, 2));
    }

    #[test]
    fn degree_statistics() {
        let s = complete(4).unwrap().degree_stats();
        assert_eq!((s.d_min, s.d_max, s.d_avg_ratio()), (3, 3, (3, 1)));
        let s = path(4).unwrap().degree_stats();
        assert_eq!((s.d_min, s.d_max, s.d_avg_ratio()), (1, 2, (3, 2)));
        let s = bary_tree(2, 2).unwrap().degree_stats();
        assert_eq!((s.d_min, s.d_max), (1, 3));
    }

    #[test]
    fn laplacian_small() {
        let l = path(2).unwrap().laplacian();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let l = cycle(3).unwrap().laplacian();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn torus_side_three_dim_one_is_cycle() {
        assert_eq!(torus(3, 1).unwrap(), cycle(3).unwrap());
        assert_eq!(torus(2, 3).unwrap(), hypercube(3).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 1)]).is_err());
        assert!(random_regular(3, 7, 1).is_err());
        assert!(cycle(2).is_err());
    }

    #[test]
    fn random_regular_is_reproducible() {
        let a = random_regular(3, 12, 7).unwrap();
        let b = random_regular(3, 12, 7).unwrap();
        assert_eq!(a, b);
        assert!((0..12).all(|x| a.degree(x) == 3));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = bary_tree(3, 2).unwrap();
        let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(g, back);
        assert!(Graph::from_edge_list("3 2\n0 1\n").is_err());
    }

    #[test]
    fn family_parse() {
        let f: Family = "torus:4,2".parse().unwrap();
        assert_eq!(f, Family::Torus { side: 4, dim: 2 });
        assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        assert!("moebius:3".parse::<Family>().is_err());
        assert!("cycle:3,4".parse::<Family>().is_err());
    }
}
