//! Sparse matrices and the iterative solvers used by the exact analyses:
//! conjugate gradients and a thick-restart Lanczos eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed
    /// and exact zeros dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c as u32);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix { n_rows, n_cols, indptr, indices, values };
        m.drop_zeros();
        m
    }

    /// Assembles row by row from already sorted, duplicate-free rows.
    pub fn from_rows<I>(n_cols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut indptr = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            for (c, v) in row {
                indices.push(c as u32);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n_rows: indptr.len() - 1, n_cols, indptr, indices, values }
    }

    fn drop_zeros(&mut self) {
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.n_rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k] as usize, self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&(c as u32)) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k] as usize];
            }
            *out = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `y = x^T A` (row vector times matrix).
    pub fn vec_mul_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k] as usize] += xr * self.values[k];
            }
        }
    }

    /// Quadratic form `x^T A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k] as usize];
            }
            total += x[r] * acc;
        }
        total
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[(r, c)] += v;
            }
        }
        d
    }

    /// Submatrix on the given rows and columns (same index list for both).
    pub fn principal_submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let rows = keep.iter().map(|&r| {
            self.row(r)
                .filter_map(|(c, v)| (map[c] != usize::MAX).then_some((map[c], v)))
                .collect::<Vec<_>>()
        });
        let mut m = CsrMatrix::from_rows(keep.len(), rows);
        // column order may be permuted by the map
        for r in 0..m.n_rows {
            let (a, b) = (m.indptr[r], m.indptr[r + 1]);
            let mut pairs: Vec<_> = (a..b).map(|k| (m.indices[k], m.values[k])).collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (k, (c, v)) in (a..b).zip(pairs) {
                m.indices[k] = c;
                m.values[k] = v;
            }
        }
        m
    }

    /// Applies `f(row, col, value)` to every stored entry.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> CsrMatrix {
        let mut m = self.clone();
        for r in 0..m.n_rows {
            for k in m.indptr[r]..m.indptr[r + 1] {
                m.values[k] = f(r, m.indices[k] as usize, m.values[k]);
            }
        }
        m
    }

    /// Largest absolute asymmetry `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &eig.eigenvectors.column(old));
    }
    (values, vectors)
}

/// Conjugate gradients for a symmetric positive definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * b_norm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    if rr.sqrt() <= rel_tol * b_norm {
        return Ok(x);
    }
    Err(Error::Convergence {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

/// Smallest eigenpair found by [`lanczos_smallest`].
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Options for [`lanczos_smallest`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub basis_size: usize,
    pub keep: usize,
    pub tol: f64,
    pub max_matvecs: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { basis_size: 64, keep: 16, tol: 1e-10, max_matvecs: 200_000, seed: 0x5eed }
    }
}

/// Smallest eigenpair of a symmetric operator on the orthogonal complement
/// of `deflate` (an orthonormal set), by thick-restart Lanczos with full
/// reorthogonalisation inside the basis.
///
/// Convergence is declared when the Ritz residual drops below
/// `tol * max(1, |theta|_max)`.
pub fn lanczos_smallest(
    apply: impl Fn(&[f64], &mut [f64]),
    dim: usize,
    deflate: &[Vec<f64>],
    opts: LanczosOptions,
) -> Result<EigenPair> {
    let free = dim.saturating_sub(deflate.len());
    if free == 0 {
        return Err(Error::Parameter("operator has no room left after deflation".into()));
    }
    let m = opts.basis_size.clamp(1, free);
    let keep = opts.keep.clamp(1, m.saturating_sub(1).max(1));

    let project = |v: &mut [f64]| {
        for d in deflate {
            let c = dot(d, v);
            axpy(-c, d, v);
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut v0);
    project(&mut v0);
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut h = DMatrix::<f64>::zeros(m, m);
    let mut start = 0usize;
    let mut matvecs = 0usize;
    let mut w = vec![0.0; dim];
    let mut best_residual = f64::INFINITY;

    loop {
        let mut beta = 0.0;
        let mut residual_vec: Option<Vec<f64>> = None;
        let mut filled = m;
        for j in start..m {
            apply(&basis[j], &mut w);
            matvecs += 1;
            project(&mut w);
            let mut coeffs = vec![0.0; j + 1];
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(vi, &w);
                    coeffs[i] += c;
                    axpy(-c, vi, &mut w);
                }
                project(&mut w);
            }
            for (i, &c) in coeffs.iter().enumerate() {
                h[(i, j)] = c;
                h[(j, i)] = c;
            }
            beta = norm(&w);
            let scale = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
            if beta <= 1e-13 * scale {
                // invariant subspace found
                filled = j + 1;
                beta = 0.0;
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
            if j + 1 < m {
                h[(j + 1, j)] = beta;
                h[(j, j + 1)] = beta;
                basis.push(next);
            } else {
                residual_vec = Some(next);
            }
        }

        let sub = h.view((0, 0), (filled, filled)).clone_owned();
        let (theta, y) = sorted_symmetric_eigen(sub);
        let scale = theta.iter().fold(1.0f64, |a, t| a.max(t.abs()));
        let res0 = beta * y[(filled - 1, 0)].abs();
        best_residual = best_residual.min(res0);

        if res0 <= opts.tol * scale || beta == 0.0 {
            let mut vector = vec![0.0; dim];
            for (i, vi) in basis.iter().enumerate().take(filled) {
                axpy(y[(i, 0)], vi, &mut vector);
            }
            let nv = norm(&vector);
            vector.iter_mut().for_each(|x| *x /= nv);
            return Ok(EigenPair { value: theta[0], vector, residual: res0, matvecs });
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::Convergence { method: "lanczos", iterations: matvecs, residual: best_residual });
        }

        // thick restart: keep the `keep` smallest Ritz vectors
        let k = keep.min(filled - 1).max(1);
        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        for c in 0..k {
            let mut v = vec![0.0; dim];
            for (i, vi) in basis.iter().enumerate().take(filled) {
                axpy(y[(i, c)], vi, &mut v);
            }
            new_basis.push(v);
        }
        h.fill(0.0);
        for c in 0..k {
            h[(c, c)] = theta[c];
            let coupling = beta * y[(filled - 1, c)];
            h[(c, k)] = coupling;
            h[(k, c)] = coupling;
        }
        new_basis.push(residual_vec.expect("restart requires a residual vector"));
        basis = new_basis;
        start = k;
    }
}

/// Dense matrix-vector helper used by small problems.
pub fn dense_mul(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(x)).as_slice().to_vec()
}
