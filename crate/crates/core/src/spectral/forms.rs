//! Dirichlet forms on `Omega_+` assembled directly from their defining sums,
//! and the generalised eigenvalue `sup A(f)/B(f)` used for form comparisons.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::Graph;
use crate::linalg::{sorted_symmetric_eigen, CsrMatrix};

use super::generator::SparseGenerator;
use super::states::{Constraint, StateSpace};

/// Symmetric positive semidefinite form `f -> f^T M f`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    matrix: CsrMatrix,
}

impl QuadraticForm {
    pub fn from_matrix(matrix: CsrMatrix) -> Self {
        QuadraticForm { matrix }
    }

    /// The generator pairing `<f, -Q f>_mu` as a matrix `diag(mu) (-Q)`.
    pub fn from_generator(gen: &SparseGenerator) -> Self {
        let mu = gen.measure().weights();
        let m = gen.rates().map_entries(|i, _, q| -mu[i] * q);
        // symmetrise away rounding so the matrix is exactly symmetric
        let t = m.to_dense();
        let sym = (&t + t.transpose()) * 0.5;
        QuadraticForm { matrix: dense_to_csr(&sym) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn eval(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: f.len() });
        }
        Ok(self.matrix.quadratic(f))
    }

    /// Restriction to a subset of states.
    pub fn restrict(&self, keep: &[usize]) -> QuadraticForm {
        QuadraticForm { matrix: self.matrix.principal_submatrix(keep) }
    }

    pub fn scaled(&self, c: f64) -> QuadraticForm {
        QuadraticForm { matrix: self.matrix.map_entries(|_, _, v| c * v) }
    }
}

fn dense_to_csr(m: &DMatrix<f64>) -> CsrMatrix {
    let rows = (0..m.nrows()).map(|i| {
        (0..m.ncols())
            .filter(|&j| m[(i, j)] != 0.0)
            .map(|j| (j, m[(i, j)]))
            .collect::<Vec<_>>()
    });
    CsrMatrix::from_rows(m.ncols(), rows.collect::<Vec<_>>())
}

/// Accumulates terms `w (f_a - f_b)^2`.
struct FormBuilder {
    dim: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl FormBuilder {
    fn new(dim: usize) -> Self {
        FormBuilder { dim, triplets: Vec::new() }
    }

    fn add_pair(&mut self, a: usize, b: usize, w: f64) {
        if a == b || w == 0.0 {
            return;
        }
        self.triplets.extend([(a, a, w), (b, b, w), (a, b, -w), (b, a, -w)]);
    }

    fn finish(self) -> QuadraticForm {
        QuadraticForm { matrix: CsrMatrix::from_triplets(self.dim, self.dim, self.triplets) }
    }
}

/// The quadratic forms compared in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    /// `sum_e mu(1_{E_e} Var_e(f | E_e))`.
    Cbsep,
    /// `sum_x mu(1{x has an occupied neighbour} p(1-p) (f(w^x) - f(w))^2)`.
    Fa1f,
    /// Exclusion process on `G`: `1/2 sum_e mu((f(w^e) - f(w))^2)`.
    SepG,
    /// Bernoulli-Laplace on the complete graph: `1/(2n) sum_{x<y} mu((f(w^{xy}) - f(w))^2)`.
    BlKn,
    /// `p sum_y mu((f(w^y) - f(w))^2 (1 - w_y))`.
    SingleFlip,
}

/// Assembles the form of the given kind on `Omega_+` from its defining sum.
pub fn dirichlet_form(kind: FormKind, graph: &Graph, p: f64) -> Result<(QuadraticForm, StateSpace)> {
    check_probability(p)?;
    let n = graph.n();
    let space = StateSpace::enumerate(n, Constraint::OmegaPlus)?;
    let mu = space.bernoulli_measure(p);
    let w = mu.weights();
    let idx = |m: u32| space.index_of(m).expect("state in Omega_+");
    let mut b = FormBuilder::new(space.len());
    match kind {
        FormKind::Cbsep => {
            let one = (1.0 - p) / (2.0 - p);
            let two = p / (2.0 - p);
            for &(x, y) in graph.edges() {
                let (bx, by) = (1u32 << x, 1u32 << y);
                for outside in 0..(1u32 << n) {
                    if outside & (bx | by) != 0 {
                        continue;
                    }
                    let s = [idx(outside | bx), idx(outside | by), idx(outside | bx | by)];
                    let cond = [one, one, two];
                    let mass = w[s[0]] + w[s[1]] + w[s[2]];
                    for i in 0..3 {
                        for j in i + 1..3 {
                            b.add_pair(s[i], s[j], mass * cond[i] * cond[j]);
                        }
                    }
                }
            }
        }
        FormKind::Fa1f => {
            for (i, &m) in space.states().iter().enumerate() {
                for x in 0..n {
                    if graph.neighbors(x).iter().any(|&y| m >> y & 1 == 1) {
                        b.add_pair(i, idx(m ^ 1 << x), w[i] * p * (1.0 - p));
                    }
                }
            }
        }
        FormKind::SepG => {
            for (i, &m) in space.states().iter().enumerate() {
                for &(x, y) in graph.edges() {
                    if (m >> x & 1) != (m >> y & 1) {
                        b.add_pair(i, idx(m ^ (1 << x) ^ (1 << y)), 0.5 * w[i]);
                    }
                }
            }
        }
        FormKind::BlKn => {
            let c = 1.0 / (2.0 * n as f64);
            for (i, &m) in space.states().iter().enumerate() {
                for x in 0..n {
                    for y in x + 1..n {
                        if (m >> x & 1) != (m >> y & 1) {
                            b.add_pair(i, idx(m ^ (1 << x) ^ (1 << y)), c * w[i]);
                        }
                    }
                }
            }
        }
        FormKind::SingleFlip => {
            for (i, &m) in space.states().iter().enumerate() {
                for y in 0..n {
                    if m >> y & 1 == 0 {
                        b.add_pair(i, idx(m | 1 << y), p * w[i]);
                    }
                }
            }
        }
    }
    Ok((b.finish(), space))
}

/// Number of eigenvalues of the form's matrix below `tol * max eigenvalue`.
pub fn kernel_dimension(form: &QuadraticForm, tol: f64) -> usize {
    let (values, _) = sorted_symmetric_eigen(form.matrix().to_dense());
    let top = values.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    values.iter().filter(|&&v| v.abs() <= tol * top).count()
}

/// `sup A(f) / B(f)` over `f` orthogonal to `ker(B)`, by a dense generalised
/// eigensolve. Fails when `A` does not vanish on `ker(B)`.
pub fn form_ratio_max(a: &QuadraticForm, b: &QuadraticForm) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: b.dim(), got: a.dim() });
    }
    let am = a.matrix().to_dense();
    let (bvals, bvecs) = sorted_symmetric_eigen(b.matrix().to_dense());
    let top = bvals.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let a_scale = am.amax().max(f64::MIN_POSITIVE);
    let cut = 1e-10 * top;
    let range: Vec<usize> = (0..bvals.len()).filter(|&k| bvals[k] > cut).collect();
    for k in (0..bvals.len()).filter(|&k| bvals[k] <= cut) {
        let v = bvecs.column(k);
        let av = &am * v;
        if av.amax() > 1e-8 * a_scale {
            return Err(Error::Infeasible(format!(
                "kernel vector of B (eigenvalue {:e}) is not in the kernel of A (|Av| = {:e})",
                bvals[k],
                av.amax()
            )));
        }
    }
    if range.is_empty() {
        return Err(Error::Infeasible("B vanishes identically".into()));
    }
    let r = range.len();
    let mut scaled = DMatrix::zeros(a.dim(), r);
    for (c, &k) in range.iter().enumerate() {
        scaled.set_column(c, &(bvecs.column(k) / bvals[k].sqrt()));
    }
    let reduced = scaled.transpose() * &am * &scaled;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let (vals, _) = sorted_symmetric_eigen(reduced);
    Ok(*vals.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph;
    use crate::spectral::generator::{cbsep_generator, fa1f_generator};

    #[test]
    fn constants_are_annihilated() {
        let g = graph::cycle(4).unwrap();
        for kind in [FormKind::Cbsep, FormKind::Fa1f, FormKind::SepG, FormKind::BlKn, FormKind::SingleFlip] {
            let (form, space) = dirichlet_form(kind, &g, 0.3).unwrap();
            let ones = vec![1.0; space.len()];
            assert!(form.eval(&ones).unwrap().abs() < 1e-14, "{kind:?}");
        }
    }

    #[test]
    fn definition_matches_generator_pairing() {
        let g = graph::path(4).unwrap();
        let p = 0.3;
        let (gen, _) = cbsep_generator(&g, p).unwrap();
        let (form, _) = dirichlet_form(FormKind::Cbsep, &g, p).unwrap();
        let (fgen, _) = fa1f_generator(&g, p).unwrap();
        let (fform, _) = dirichlet_form(FormKind::Fa1f, &g, p).unwrap();
        let f: Vec<f64> = (0..gen.dim()).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        assert!((form.eval(&f).unwrap() - gen.dirichlet(&f)).abs() < 1e-14);
        assert!((fform.eval(&f).unwrap() - fgen.dirichlet(&f)).abs() < 1e-14);
    }

    #[test]
    fn ratio_of_scaled_forms() {
        let g = graph::cycle(4).unwrap();
        let (form, _) = dirichlet_form(FormKind::Cbsep, &g, 0.25).unwrap();
        assert!((form_ratio_max(&form, &form).unwrap() - 1.0).abs() < 1e-10);
        assert!((form_ratio_max(&form.scaled(2.0), &form).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_mismatch_is_infeasible() {
        let g = graph::cycle(4).unwrap();
        let (sep, _) = dirichlet_form(FormKind::SepG, &g, 0.25).unwrap();
        let (cb, _) = dirichlet_form(FormKind::Cbsep, &g, 0.25).unwrap();
        // SEP conserves N, so its kernel contains functions of N that CBSEP moves
        assert!(matches!(form_ratio_max(&cb, &sep), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bernoulli_laplace_sector_kernel() {
        let g = graph::cycle(5).unwrap();
        let (bl, space) = dirichlet_form(FormKind::BlKn, &g, 0.3).unwrap();
        for k in 1..=5 {
            let keep: Vec<usize> = (0..space.len()).filter(|&i| space.particle_count(i) == k).collect();
            assert_eq!(kernel_dimension(&bl.restrict(&keep), 1e-10), 1, "sector {k}");
        }
    }
}
