//! Unit-conductance electrical networks: effective resistance, current
//! flows, the resistance profile and the commute-time identity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{conjugate_gradient, CsrMatrix};

/// Above this vertex count resistances use conjugate gradients.
pub const DENSE_VERTEX_CAP: usize = 2000;

/// Antisymmetric edge function; `theta[e]` is the flow along `edges[e]` in
/// the direction `a -> b` with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub edges: Vec<(usize, usize)>,
    pub theta: Vec<f64>,
    pub source: usize,
    pub sink: usize,
}

impl Flow {
    pub fn zero(graph: &Graph, source: usize, sink: usize) -> Flow {
        Flow { edges: graph.edges().to_vec(), theta: vec![0.0; graph.num_edges()], source, sink }
    }

    /// Flow along the oriented edge `(u, v)`; zero if not an edge.
    pub fn along(&self, u: usize, v: usize) -> f64 {
        let key = if u < v { (u, v) } else { (v, u) };
        match self.edges.binary_search(&key) {
            Ok(e) if u < v => self.theta[e],
            Ok(e) => -self.theta[e],
            Err(_) => 0.0,
        }
    }

    /// Net outflow at every vertex.
    pub fn divergence(&self, n: usize) -> Vec<f64> {
        let mut div = vec![0.0; n];
        for (&(a, b), &t) in self.edges.iter().zip(&self.theta) {
            div[a] += t;
            div[b] -= t;
        }
        div
    }

    /// Largest violation of the unit-flow conditions.
    pub fn unit_flow_defect(&self, n: usize) -> f64 {
        self.divergence(n)
            .iter()
            .enumerate()
            .map(|(x, d)| {
                let target = if self.source == self.sink {
                    0.0
                } else if x == self.source {
                    1.0
                } else if x == self.sink {
                    -1.0
                } else {
                    0.0
                };
                (d - target).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `1/2 sum over oriented edges of theta^2`, i.e. the sum over edges.
pub fn flow_energy(flow: &Flow) -> f64 {
    flow.theta.iter().map(|t| t * t).sum()
}

fn check_vertex(graph: &Graph, x: usize) -> Result<()> {
    if x < graph.n() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("vertex {x} out of range for n = {}", graph.n())))
    }
}

/// Laplacian with vertex `n - 1` grounded, factorised once.
pub struct GroundedLaplacian {
    n: usize,
    solver: Solver,
}

enum Solver {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse(CsrMatrix),
}

impl GroundedLaplacian {
    pub fn new(graph: &Graph) -> Result<Self> {
        let n = graph.n();
        if n < 2 {
            return Ok(GroundedLaplacian { n, solver: Solver::Sparse(CsrMatrix::from_triplets(0, 0, Vec::new())) });
        }
        let m = n - 1;
        if n <= DENSE_VERTEX_CAP {
            let mut l = DMatrix::zeros(m, m);
            for &(a, b) in graph.edges() {
                for (u, v) in [(a, b), (b, a)] {
                    if u < m {
                        l[(u, u)] += 1.0;
                        if v < m {
                            l[(u, v)] -= 1.0;
                        }
                    }
                }
            }
            let chol = l.cholesky().ok_or_else(|| Error::Domain("grounded Laplacian is singular".into()))?;
            Ok(GroundedLaplacian { n, solver: Solver::Dense(chol) })
        } else {
            let mut trip = Vec::new();
            for &(a, b) in graph.edges() {
                for (u, v) in [(a, b), (b, a)] {
                    if u < m {
                        trip.push((u, u, 1.0));
                        if v < m {
                            trip.push((u, v, -1.0));
                        }
                    }
                }
            }
            Ok(GroundedLaplacian { n, solver: Solver::Sparse(CsrMatrix::from_triplets(m, m, trip)) })
        }
    }

    /// Potential (zero at the ground) for the current vector `current`.
    pub fn potential(&self, current: &[f64]) -> Result<Vec<f64>> {
        let m = self.n.saturating_sub(1);
        let rhs = &current[..m];
        let mut v = match &self.solver {
            Solver::Dense(chol) => chol.solve(&DVector::from_column_slice(rhs)).iter().copied().collect(),
            Solver::Sparse(l) => conjugate_gradient(|x, y| l.mul_vec_into(x, y), rhs, 1e-13, 20 * m.max(10))?,
        };
        v.push(0.0);
        Ok(v)
    }

    fn unit_potential(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        let mut current = vec![0.0; self.n];
        current[x] += 1.0;
        current[y] -= 1.0;
        self.potential(&current)
    }
}

pub fn effective_resistance(graph: &Graph, x: usize, y: usize) -> Result<f64> {
    check_vertex(graph, x)?;
    check_vertex(graph, y)?;
    if x == y {
        return Ok(0.0);
    }
    let v = GroundedLaplacian::new(graph)?.unit_potential(x, y)?;
    Ok(v[x] - v[y])
}

/// The current flow: the unique energy-minimising unit flow from `x` to `y`.
pub fn optimal_flow(graph: &Graph, x: usize, y: usize) -> Result<Flow> {
    check_vertex(graph, x)?;
    check_vertex(graph, y)?;
    if x == y {
        return Ok(Flow::zero(graph, x, y));
    }
    let v = GroundedLaplacian::new(graph)?.unit_potential(x, y)?;
    let theta = graph.edges().iter().map(|&(a, b)| v[a] - v[b]).collect();
    Ok(Flow { edges: graph.edges().to_vec(), theta, source: x, sink: y })
}

/// Unit flow along one BFS shortest path.
pub fn shortest_path_flow(graph: &Graph, x: usize, y: usize) -> Result<Flow> {
    check_vertex(graph, x)?;
    check_vertex(graph, y)?;
    let mut flow = Flow::zero(graph, x, y);
    let dist = graph.bfs_distances(y);
    let mut at = x;
    while at != y {
        let d = dist[at].expect("connected graph");
        let next = *graph
            .neighbors(at)
            .iter()
            .find(|&&z| dist[z] == Some(d - 1))
            .expect("BFS predecessor exists");
        let e = graph.edge_index(at, next).expect("adjacent");
        flow.theta[e] += if at < next { 1.0 } else { -1.0 };
        at = next;
    }
    Ok(flow)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceProfile {
    pub n: usize,
    /// Row-major `n x n` matrix of pairwise resistances.
    pub r: Vec<f64>,
    pub rbar: Vec<f64>,
    pub rbar_max: f64,
}

impl ResistanceProfile {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.r[x * self.n + y]
    }
}

/// All pairwise resistances through the pseudoinverse of the Laplacian:
/// `R(x,y) = G(x,x) + G(y,y) - 2 G(x,y)` with `G` the inverse of the
/// grounded Laplacian padded by zeros.
pub fn resistance_profile(graph: &Graph) -> Result<ResistanceProfile> {
    let n = graph.n();
    if n > DENSE_VERTEX_CAP {
        return Err(Error::Size { what: "vertices for resistance profile", got: n as u64, cap: DENSE_VERTEX_CAP as u64 });
    }
    let grounded = GroundedLaplacian::new(graph)?;
    let mut green = DMatrix::zeros(n, n);
    if n > 1 {
        if let Solver::Dense(chol) = &grounded.solver {
            let inv = chol.inverse();
            green.view_mut((0, 0), (n - 1, n - 1)).copy_from(&inv);
        }
    }
    let mut r = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            if x != y {
                r[x * n + y] = green[(x, x)] + green[(y, y)] - 2.0 * green[(x, y)];
            }
        }
    }
    let rbar: Vec<f64> = (0..n).map(|y| (0..n).map(|x| r[x * n + y]).sum::<f64>() / n as f64).collect();
    let rbar_max = rbar.iter().copied().fold(0.0, f64::max);
    Ok(ResistanceProfile { n, r, rbar, rbar_max })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CommuteCheck {
    pub exact: f64,
    pub estimate: f64,
    pub stderr: f64,
}

impl CommuteCheck {
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            (self.estimate - self.exact).abs() / self.stderr
        } else if self.estimate == self.exact {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `2|E| R(x,y)` against a Monte Carlo estimate of the expected commute
/// time of the discrete-time simple random walk.
pub fn commute_time_check(graph: &Graph, x: usize, y: usize, samples: usize, seed: u64) -> Result<CommuteCheck> {
    if x == y {
        return Err(Error::Parameter("commute time needs distinct endpoints".into()));
    }
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    let exact = 2.0 * graph.num_edges() as f64 * effective_resistance(graph, x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk_until = |rng: &mut ChaCha8Rng, from: usize, to: usize| -> u64 {
        let mut at = from;
        let mut steps = 0u64;
        while at != to {
            let nb = graph.neighbors(at);
            at = nb[rng.random_range(0..nb.len())];
            steps += 1;
        }
        steps
    };
    let times: Vec<f64> = (0..samples)
        .map(|_| (walk_until(&mut rng, x, y) + walk_until(&mut rng, y, x)) as f64)
        .collect();
    let mean = times.iter().sum::<f64>() / samples as f64;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok(CommuteCheck { exact, estimate: mean, stderr: (var / samples as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;

    #[test]
    fn path_endpoints() {
        let g = graph::path(4).unwrap();
        assert!((effective_resistance(&g, 0, 3).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(effective_resistance(&g, 2, 2).unwrap(), 0.0);
    }

    #[test]
    fn single_edge_flow() {
        let g = graph::path(2).unwrap();
        let f = optimal_flow(&g, 0, 1).unwrap();
        assert!((f.theta[0] - 1.0).abs() < 1e-14);
        assert!((flow_energy(&f) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shortest_path_flow_is_unit() {
        let g = graph::torus(4, 2).unwrap();
        let f = shortest_path_flow(&g, 0, 10).unwrap();
        assert!(f.unit_flow_defect(g.n()) < 1e-14);
        assert_eq!(flow_energy(&f), g.bfs_distances(0)[10].unwrap() as f64);
    }
}
