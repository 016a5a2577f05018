//! Enumerated configuration spaces `{0,1}^V` (with constraints) and `S^V`,
//! and product measures on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of vertices for exact enumeration of `{0,1}^V`.
pub const MAX_ENUM_VERTICES: usize = 24;

/// Cap on `|S|^n` for the general state space.
pub const MAX_GENERAL_STATES: u64 = 1_000_000;

/// Occupation configuration, one flag per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleConfig {
    occupancy: Vec<bool>,
}

impl ParticleConfig {
    pub fn new(occupancy: Vec<bool>) -> Self {
        ParticleConfig { occupancy }
    }

    pub fn empty(n: usize) -> Self {
        ParticleConfig { occupancy: vec![false; n] }
    }

    pub fn full(n: usize) -> Self {
        ParticleConfig { occupancy: vec![true; n] }
    }

    pub fn from_mask(mask: u64, n: usize) -> Self {
        ParticleConfig { occupancy: (0..n).map(|x| mask >> x & 1 == 1).collect() }
    }

    pub fn from_sites(n: usize, sites: &[usize]) -> Self {
        let mut c = Self::empty(n);
        for &x in sites {
            c.occupancy[x] = true;
        }
        c
    }

    /// Bit mask; only meaningful for `n <= 64`.
    pub fn mask(&self) -> u64 {
        self.occupancy
            .iter()
            .enumerate()
            .fold(0u64, |m, (x, &b)| if b { m | 1 << x } else { m })
    }

    pub fn n(&self) -> usize {
        self.occupancy.len()
    }

    pub fn get(&self, x: usize) -> bool {
        self.occupancy[x]
    }

    pub fn set(&mut self, x: usize, value: bool) {
        self.occupancy[x] = value;
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupancy.iter().any(|&b| b)
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    /// Coordinatewise order `self <= other`.
    pub fn is_below(&self, other: &ParticleConfig) -> bool {
        self.occupancy.iter().zip(&other.occupancy).all(|(&a, &b)| !a || b)
    }
}

/// Which subset of `{0,1}^V` to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// At least one particle.
    OmegaPlus,
    All,
    AtLeastTwo,
    FixedCount(usize),
}

/// Bijection between enumerated configurations (as bit masks) and indices.
/// States are listed in increasing mask order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    n: usize,
    constraint: Constraint,
    states: Vec<u32>,
}

impl StateSpace {
    pub fn enumerate(n: usize, constraint: Constraint) -> Result<Self> {
        if n > MAX_ENUM_VERTICES {
            return Err(Error::Size { what: "vertices", got: n as u64, cap: MAX_ENUM_VERTICES as u64 });
        }
        if n == 0 {
            return Err(Error::Parameter("state space needs n >= 1".into()));
        }
        let total = 1u32 << n;
        let states: Vec<u32> = match constraint {
            Constraint::OmegaPlus => (1..total).collect(),
            Constraint::All => (0..total).collect(),
            Constraint::AtLeastTwo => (0..total).filter(|m| m.count_ones() >= 2).collect(),
            Constraint::FixedCount(k) => (0..total).filter(|m| m.count_ones() as usize == k).collect(),
        };
        Ok(StateSpace { n, constraint, states })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, i: usize) -> u32 {
        self.states[i]
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        match self.constraint {
            Constraint::OmegaPlus => {
                (mask != 0 && (mask as u64) < (1u64 << self.n)).then(|| mask as usize - 1)
            }
            Constraint::All => ((mask as u64) < (1u64 << self.n)).then_some(mask as usize),
            _ => self.states.binary_search(&mask).ok(),
        }
    }

    pub fn config(&self, i: usize) -> ParticleConfig {
        ParticleConfig::from_mask(self.states[i] as u64, self.n)
    }

    pub fn particle_count(&self, i: usize) -> usize {
        self.states[i].count_ones() as usize
    }

    /// Product Bernoulli(`p`) measure conditioned on this state space.
    pub fn bernoulli_measure(&self, p: f64) -> Measure {
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        let raw: Vec<f64> = self
            .states
            .iter()
            .map(|&m| {
                let k = m.count_ones() as f64;
                (k * lp + (self.n as f64 - k) * lq).exp()
            })
            .collect();
        Measure::normalized(raw)
    }
}

/// Probability vector indexed by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    /// Normalises nonnegative weights (compensated summation).
    pub fn normalized(raw: Vec<f64>) -> Self {
        let total = kahan_sum(raw.iter().copied());
        Measure { weights: raw.into_iter().map(|w| w / total).collect() }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn expect(&self, f: &[f64]) -> f64 {
        kahan_sum(self.weights.iter().zip(f).map(|(w, x)| w * x))
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.expect(f);
        kahan_sum(self.weights.iter().zip(f).map(|(w, x)| w * (x - m) * (x - m)))
    }

    /// `Ent(g) = mu(g log(g / mu(g)))` for `g >= 0`, with `0 log 0 = 0`.
    /// Evaluated as `mu(g) mu(phi(g / mu(g)))` with `phi(u) = u log u - u + 1`
    /// so every term is nonnegative.
    pub fn entropy(&self, g: &[f64]) -> f64 {
        let m = self.expect(g);
        if m <= 0.0 {
            return 0.0;
        }
        m * kahan_sum(self.weights.iter().zip(g).map(|(w, &x)| w * entropy_kernel(x / m)))
    }

    /// Probability of the event `{i : keep(i)}`.
    pub fn prob(&self, keep: impl Fn(usize) -> bool) -> f64 {
        kahan_sum(self.weights.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, w)| *w))
    }

    /// Total variation distance to another probability vector.
    pub fn tv_distance(&self, other: &[f64]) -> f64 {
        0.5 * self.weights.iter().zip(other).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// `u log u - u + 1`, accurate near `u = 1`.
pub(crate) fn entropy_kernel(u: f64) -> f64 {
    let d = u - 1.0;
    if d.abs() < 1e-3 {
        // sum_{k >= 2} (-d)^k / (k (k - 1))
        let mut term = d * d;
        let mut total = 0.0;
        for k in 2..12 {
            total += term / (k * (k - 1)) as f64;
            term *= -d;
        }
        total
    } else if u > 0.0 {
        u * u.ln() - d
    } else {
        1.0
    }
}

pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Finite single-site space `S` with product law `rho` and the bipartition
/// into particle states `S1` and hole states `S0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpace {
    rho: Vec<f64>,
    in_s1: Vec<bool>,
}

impl SiteSpace {
    pub fn new(rho: Vec<f64>, in_s1: Vec<bool>) -> Result<Self> {
        if rho.len() != in_s1.len() || rho.is_empty() {
            return Err(Error::Parameter("rho and partition must have equal, nonzero length".into()));
        }
        if rho.iter().any(|&r| r.is_nan() || r <= 0.0) {
            return Err(Error::Parameter("rho must be strictly positive".into()));
        }
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("rho must sum to 1, got {total}")));
        }
        if in_s1.iter().all(|&b| b) || in_s1.iter().all(|&b| !b) {
            return Err(Error::Parameter("both partition classes S0 and S1 must be nonempty".into()));
        }
        Ok(SiteSpace { rho, in_s1 })
    }

    /// `S = {0,1}` with `S1 = {1}` and `rho = Bernoulli(p)`.
    pub fn binary(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p], vec![false, true])
    }

    /// `S = {0,1,2}`, `S1 = {1}`, `rho(1) = p`, `rho(0) = rho(2) = (1-p)/2`.
    pub fn strip_example(p: f64) -> Result<Self> {
        Self::new(vec![(1.0 - p) / 2.0, p, (1.0 - p) / 2.0], vec![false, true, false])
    }

    pub fn size(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn is_particle(&self, s: usize) -> bool {
        self.in_s1[s]
    }

    /// `p = rho(S1)`.
    pub fn p(&self) -> f64 {
        (0..self.size()).filter(|&s| self.in_s1[s]).map(|s| self.rho[s]).sum()
    }

    /// `rho(. | S1)` if `particle`, else `rho(. | S0)`.
    pub fn conditional(&self, particle: bool) -> Vec<f64> {
        let mass: f64 = (0..self.size()).filter(|&s| self.in_s1[s] == particle).map(|s| self.rho[s]).sum();
        (0..self.size())
            .map(|s| if self.in_s1[s] == particle { self.rho[s] / mass } else { 0.0 })
            .collect()
    }
}

/// Enumeration of `S^V` restricted to configurations with at least one
/// site in `S1`. Configurations are coded base `|S|`, vertex 0 least
/// significant.
#[derive(Debug, Clone)]
pub struct GeneralSpace {
    n: usize,
    site: SiteSpace,
    codes: Vec<u32>,
    index: Vec<u32>,
}

impl GeneralSpace {
    pub fn enumerate(n: usize, site: SiteSpace) -> Result<Self> {
        let s = site.size() as u64;
        let total = s
            .checked_pow(n as u32)
            .filter(|&t| t <= MAX_GENERAL_STATES)
            .ok_or(Error::Size { what: "|S|^n", got: s.saturating_pow(n as u32), cap: MAX_GENERAL_STATES })?;
        let mut codes = Vec::new();
        let mut index = vec![u32::MAX; total as usize];
        let mut digits = vec![0usize; n];
        for code in 0..total as u32 {
            if digits.iter().any(|&d| site.is_particle(d)) {
                index[code as usize] = codes.len() as u32;
                codes.push(code);
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < site.size() {
                    break;
                }
                *d = 0;
            }
        }
        Ok(GeneralSpace { n, site, codes, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn site(&self) -> &SiteSpace {
        &self.site
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn config(&self, i: usize) -> Vec<usize> {
        self.decode(self.codes[i])
    }

    pub fn decode(&self, mut code: u32) -> Vec<usize> {
        let s = self.site.size() as u32;
        (0..self.n)
            .map(|_| {
                let d = code % s;
                code /= s;
                d as usize
            })
            .collect()
    }

    pub fn encode(&self, config: &[usize]) -> u32 {
        let s = self.site.size() as u32;
        config.iter().rev().fold(0u32, |acc, &d| acc * s + d as u32)
    }

    pub fn index_of(&self, config: &[usize]) -> Option<usize> {
        let code = self.encode(config) as usize;
        self.index.get(code).copied().filter(|&i| i != u32::MAX).map(|i| i as usize)
    }

    /// Projection onto `{0,1}^V` as a bit mask.
    pub fn projection(&self, i: usize) -> u32 {
        self.config(i)
            .iter()
            .enumerate()
            .fold(0u32, |m, (x, &s)| if self.site.is_particle(s) { m | 1 << x } else { m })
    }

    /// `rho` conditioned on at least one site in `S1`.
    pub fn product_measure(&self) -> Measure {
        let raw = (0..self.len())
            .map(|i| self.config(i).iter().map(|&s| self.site.rho()[s]).product())
            .collect();
        Measure::normalized(raw)
    }

    /// `nu^eta`: product of `rho(. | S_{eta_x})` over sites, as a vector
    /// over this space.
    pub fn conditional_product(&self, eta: u32) -> Vec<f64> {
        let cond = [self.site.conditional(false), self.site.conditional(true)];
        (0..self.len())
            .map(|i| {
                self.config(i)
                    .iter()
                    .enumerate()
                    .map(|(x, &s)| cond[(eta >> x & 1) as usize][s])
                    .product()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_sizes() {
        assert_eq!(StateSpace::enumerate(2, Constraint::OmegaPlus).unwrap().len(), 3);
        assert_eq!(StateSpace::enumerate(3, Constraint::AtLeastTwo).unwrap().len(), 4);
        assert_eq!(StateSpace::enumerate(4, Constraint::FixedCount(2)).unwrap().len(), 6);
        assert_eq!(StateSpace::enumerate(5, Constraint::All).unwrap().len(), 32);
        assert!(matches!(StateSpace::enumerate(25, Constraint::All), Err(Error::Size { .. })));
    }

    #[test]
    fn index_bijection() {
        for c in [Constraint::OmegaPlus, Constraint::All, Constraint::AtLeastTwo, Constraint::FixedCount(3)] {
            let s = StateSpace::enumerate(6, c).unwrap();
            for i in 0..s.len() {
                assert_eq!(s.index_of(s.state(i)), Some(i));
            }
        }
        let s = StateSpace::enumerate(4, Constraint::OmegaPlus).unwrap();
        assert_eq!(s.index_of(0), None);
    }

    #[test]
    fn bernoulli_measure_normalised() {
        let s = StateSpace::enumerate(10, Constraint::OmegaPlus).unwrap();
        let mu = s.bernoulli_measure(0.1);
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let z = 1.0 - 0.9f64.powi(10);
        let single = 0.1 * 0.9f64.powi(9) / z;
        assert!((mu.weights()[0] - single).abs() < 1e-15);
    }

    #[test]
    fn general_space_counts() {
        let site = SiteSpace::strip_example(1.0 / 3.0).unwrap();
        let g = GeneralSpace::enumerate(3, site).unwrap();
        assert_eq!(g.len(), 27 - 8);
        for i in 0..g.len() {
            assert_eq!(g.index_of(&g.config(i)), Some(i));
            assert_ne!(g.projection(i), 0);
        }
    }

    #[test]
    fn site_space_validation() {
        assert!(SiteSpace::new(vec![0.5, 0.5], vec![true, true]).is_err());
        assert!(SiteSpace::new(vec![0.4, 0.5], vec![false, true]).is_err());
        assert!((SiteSpace::strip_example(0.2).unwrap().p() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn entropy_convention() {
        let mu = Measure::normalized(vec![1.0, 1.0]);
        assert_eq!(mu.entropy(&[1.0, 1.0]), 0.0);
        assert!((mu.entropy(&[2.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
