//! Truncated SVD of sparse non-negative matrices by block subspace iteration
//! with Rayleigh-Ritz extraction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::scalar::Scalar;

pub const DEFAULT_SEED: u64 = 42;

/// Compressed sparse matrix kept in both row and column order.
#[derive(Clone, Debug)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_off: Vec<usize>,
    row_idx: Vec<u32>,
    row_val: Vec<T>,
    col_off: Vec<usize>,
    col_idx: Vec<u32>,
    col_val: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut t: Vec<(usize, usize, T)> = Vec::with_capacity(triplets.len());
        for &(i, j, x) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !x.is_finite() {
                return Err(Error::InvalidParameter("non-finite matrix entry".into()));
            }
            t.push((i, j, x));
        }
        t.sort_by_key(|e| (e.0, e.1));
        let mut coalesced: Vec<(usize, usize, T)> = Vec::with_capacity(t.len());
        for (i, j, x) in t {
            match coalesced.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 = last.2 + x,
                _ => coalesced.push((i, j, x)),
            }
        }

        let mut row_off = vec![0usize; rows + 1];
        let mut col_off = vec![0usize; cols + 1];
        for &(i, j, _) in &coalesced {
            row_off[i + 1] += 1;
            col_off[j + 1] += 1;
        }
        for i in 0..rows {
            row_off[i + 1] += row_off[i];
        }
        for j in 0..cols {
            col_off[j + 1] += col_off[j];
        }
        let row_idx = coalesced.iter().map(|e| e.1 as u32).collect();
        let row_val = coalesced.iter().map(|e| e.2).collect();
        let mut fill = col_off.clone();
        let mut col_idx = vec![0u32; coalesced.len()];
        let mut col_val = vec![T::zero(); coalesced.len()];
        for &(i, j, x) in &coalesced {
            col_idx[fill[j]] = i as u32;
            col_val[fill[j]] = x;
            fill[j] += 1;
        }
        Ok(Self {
            rows,
            cols,
            row_off,
            row_idx,
            row_val,
            col_off,
            col_idx,
            col_val,
        })
    }

    /// Weighted adjacency: users as rows, objects as columns, entry `sigma * e`.
    pub fn from_graph(g: &BipartiteGraph<T>) -> Self {
        let triplets: Vec<(usize, usize, T)> = (0..g.n_pairs())
            .map(|p| {
                let pair = g.pair(p);
                (pair.user.index(), pair.object.index(), g.weight(p))
            })
            .collect();
        Self::from_triplets(g.n_users(), g.n_objects(), &triplets).expect("graph indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_val.len()
    }

    /// Entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_off[i]..self.row_off[i + 1];
        self.row_idx[r.clone()]
            .iter()
            .zip(&self.row_val[r])
            .map(|(&j, &x)| (j as usize, x))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, x)| x)
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<T> {
        (0..self.cols)
            .map(|j| self.col_val[self.col_off[j]..self.col_off[j + 1]].iter().copied().sum())
            .collect()
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).map(|(j, a)| a * x[j]).sum())
            .collect()
    }

    /// `M^T y`.
    pub fn tmul_vec(&self, y: &[T]) -> Vec<T> {
        (0..self.cols)
            .map(|j| {
                let r = self.col_off[j]..self.col_off[j + 1];
                self.col_idx[r.clone()]
                    .iter()
                    .zip(&self.col_val[r])
                    .map(|(&i, &a)| a * y[i as usize])
                    .sum()
            })
            .collect()
    }

    fn mul_block(&self, x: &Block<T>) -> Block<T> {
        let r = x.cols;
        let mut out = Block::zeros(self.rows, r);
        for i in 0..self.rows {
            let dst = &mut out.data[i * r..(i + 1) * r];
            for (j, a) in self.row(i) {
                let src = &x.data[j * r..(j + 1) * r];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + a * s;
                }
            }
        }
        out
    }

    fn tmul_block(&self, y: &Block<T>) -> Block<T> {
        let r = y.cols;
        let mut out = Block::zeros(self.cols, r);
        for j in 0..self.cols {
            let dst = &mut out.data[j * r..(j + 1) * r];
            for k in self.col_off[j]..self.col_off[j + 1] {
                let i = self.col_idx[k] as usize;
                let a = self.col_val[k];
                let src = &y.data[i * r..(i + 1) * r];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + a * s;
                }
            }
        }
        out
    }
}

/// Dense row-major tall block.
#[derive(Clone, Debug)]
struct Block<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Block<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    fn col(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.data[i * self.cols + c]).collect()
    }

    fn from_cols(rows: usize, cols: &[Vec<T>]) -> Self {
        let r = cols.len();
        let mut b = Self::zeros(rows, r);
        for (c, col) in cols.iter().enumerate() {
            for i in 0..rows {
                b.data[i * r + c] = col[i];
            }
        }
        b
    }

    /// Orthonormal basis of the column span (two-pass Gram-Schmidt); columns
    /// that are numerically dependent are dropped.
    fn orthonormalize(&self) -> Self {
        let drop_tol = T::epsilon().sqrt();
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(self.cols);
        for c in 0..self.cols {
            let mut v = self.col(c);
            let before = norm(&v);
            if !(before > T::zero()) {
                continue;
            }
            for _ in 0..2 {
                for q in &basis {
                    let d = dot(&v, q);
                    for (x, &y) in v.iter_mut().zip(q) {
                        *x = *x - d * y;
                    }
                }
            }
            let after = norm(&v);
            if after > drop_tol * before {
                v.iter_mut().for_each(|x| *x = *x / after);
                basis.push(v);
            }
        }
        Self::from_cols(self.rows, &basis)
    }

    /// `self^T other`, a small `cols x other.cols` matrix (row-major).
    fn gram(&self, other: &Block<T>) -> Vec<T> {
        let (a, b) = (self.cols, other.cols);
        let mut g = vec![T::zero(); a * b];
        for i in 0..self.rows {
            let x = &self.data[i * a..(i + 1) * a];
            let y = &other.data[i * b..(i + 1) * b];
            for (p, &xp) in x.iter().enumerate() {
                for (q, &yq) in y.iter().enumerate() {
                    g[p * b + q] = g[p * b + q] + xp * yq;
                }
            }
        }
        g
    }

    /// `self * w[:, c]` for a small row-major `w` with `self.cols` rows.
    fn times_col(&self, w: &[T], wcols: usize, c: usize) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter()
                    .enumerate()
                    .map(|(p, &x)| x * w[p * wcols + c])
                    .sum()
            })
            .collect()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order and the matching
/// eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let total: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= T::epsilon() * total || total == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp_s(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (c, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + c] = v[r * n + src];
        }
    }
    (values, vectors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdConfig {
    pub k: usize,
    /// Residual tolerance relative to the largest singular value.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Extra subspace columns beyond `k`.
    pub oversample: usize,
}

impl SvdConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            tol: 1e-6,
            max_iter: 300,
            seed: DEFAULT_SEED,
            oversample: 10,
        }
    }
}

/// Leading singular triplets, largest first.
#[derive(Clone, Debug)]
pub struct TruncatedSvd<T> {
    pub sigma: Vec<T>,
    /// Left singular vectors, one per triplet, each of length `rows`.
    pub u: Vec<Vec<T>>,
    /// Right singular vectors, each of length `cols`.
    pub v: Vec<Vec<T>>,
    /// `||M v_i - sigma_i u_i||` per triplet.
    pub residuals: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> TruncatedSvd<T> {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Top-`k` singular triplets; fails with the best-so-far residuals when the
/// tolerance is not met within `max_iter` iterations.
pub fn truncated_svd<T: Scalar>(m: &SparseMatrix<T>, cfg: &SvdConfig) -> Result<TruncatedSvd<T>> {
    let out = truncated_svd_best_effort(m, cfg)?;
    if out.converged {
        Ok(out)
    } else {
        let residuals: Vec<f64> = out.residuals.iter().map(|r| r.as_f64()).collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        Err(Error::NotConverged {
            iterations: out.iterations,
            residuals,
            worst_residual: worst,
        })
    }
}

/// Same iteration as [`truncated_svd`] but always returns the last iterate,
/// with `converged` telling whether the tolerance was met. When the matrix
/// rank is below `k`, fewer triplets come back.
pub fn truncated_svd_best_effort<T: Scalar>(m: &SparseMatrix<T>, cfg: &SvdConfig) -> Result<TruncatedSvd<T>> {
    let small = m.rows.min(m.cols);
    if cfg.k == 0 || cfg.k > small {
        return Err(Error::InvalidParameter(format!(
            "rank {} must lie in 1..={small}",
            cfg.k
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let tol = T::lit(cfg.tol.max(64.0 * T::epsilon().as_f64()));
    let width = (cfg.k + cfg.oversample).min(small);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut omega = Block::zeros(m.cols, width);
    for x in omega.data.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = T::lit(z);
    }
    let mut q = m.mul_block(&omega).orthonormalize();

    let mut best = TruncatedSvd {
        sigma: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        residuals: Vec::new(),
        iterations: 0,
        converged: false,
    };
    if q.cols == 0 {
        return Err(Error::InvalidParameter("matrix is zero".into()));
    }
    for iter in 1..=cfg.max_iter.max(1) {
        let z = m.tmul_block(&q).orthonormalize();
        q = m.mul_block(&z).orthonormalize();
        if q.cols == 0 {
            return Err(Error::InvalidParameter("matrix is zero".into()));
        }
        let current = rayleigh_ritz(m, &q, cfg.k);
        let s1 = current.sigma.first().copied().unwrap_or(T::zero());
        let ok = current.residuals.iter().all(|&r| r <= tol * s1);
        best = TruncatedSvd {
            iterations: iter,
            converged: ok,
            ..current
        };
        if ok {
            break;
        }
    }
    if best.len() < cfg.k {
        log::warn!(
            "matrix rank {} below requested {}: returning fewer singular triplets",
            best.len(),
            cfg.k
        );
    }
    if !best.converged {
        log::warn!("truncated SVD not converged after {} iterations", best.iterations);
    }
    Ok(best)
}

fn rayleigh_ritz<T: Scalar>(m: &SparseMatrix<T>, q: &Block<T>, k: usize) -> TruncatedSvd<T> {
    let z = m.tmul_block(q);
    let r = q.cols;
    let g = z.gram(&z);
    let (lambda, w) = symmetric_eigen(&g, r);
    let top = lambda.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt();
    let floor = top * T::epsilon().sqrt();
    let mut out = TruncatedSvd {
        sigma: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        residuals: Vec::new(),
        iterations: 0,
        converged: false,
    };
    for c in 0..r.min(k) {
        let s = lambda[c].max(T::zero()).sqrt();
        if !(s > floor) {
            break;
        }
        let mut u = q.times_col(&w, r, c);
        let mut v: Vec<T> = z.times_col(&w, r, c).into_iter().map(|x| x / s).collect();
        // sign: largest-magnitude entry of u positive
        let pivot = u
            .iter()
            .copied()
            .fold(T::zero(), |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < T::zero() {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let mv = m.mul_vec(&v);
        let res = mv
            .iter()
            .zip(&u)
            .map(|(&a, &b)| (a - s * b) * (a - s * b))
            .sum::<T>()
            .sqrt();
        out.sigma.push(s);
        out.u.push(u);
        out.v.push(v);
        out.residuals.push(res);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rank_one_outer_product() {
        let x = [1.0, 2.0, 0.0, 3.0];
        let y = [2.0, 0.0, 1.0];
        let mut t = Vec::new();
        for (i, &a) in x.iter().enumerate() {
            for (j, &b) in y.iter().enumerate() {
                if a * b != 0.0 {
                    t.push((i, j, a * b));
                }
            }
        }
        let m = SparseMatrix::<f64>::from_triplets(4, 3, &t).unwrap();
        let svd = truncated_svd(&m, &SvdConfig::new(2)).unwrap();
        assert_eq!(svd.len(), 1);
        let nx = 14f64.sqrt();
        let ny = 5f64.sqrt();
        assert_relative_eq!(svd.sigma[0], nx * ny, max_relative = 1e-10);
        for i in 0..4 {
            assert_relative_eq!(svd.u[0][i], x[i] / nx, epsilon = 1e-10);
        }
    }

    #[test]
    fn diagonal_singular_values() {
        let d = [5.0, 4.0, 3.0, 2.0, 1.0];
        let t: Vec<_> = d.iter().enumerate().map(|(i, &x)| (i, i, x)).collect();
        let m = SparseMatrix::<f64>::from_triplets(5, 5, &t).unwrap();
        let svd = truncated_svd(&m, &SvdConfig::new(3)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(svd.sigma[i], d[i], max_relative = 1e-9);
        }
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::<f64>::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 0, 1.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.5, 1.0]);
        assert_eq!(m.tmul_vec(&[1.0, 1.0]), vec![1.0, 3.5]);
        assert!(SparseMatrix::<f64>::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn jacobi_on_known_matrix() {
        let a = [2.0f64, 1.0, 1.0, 2.0];
        let (vals, vecs) = symmetric_eigen(&a, 2);
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vecs[0].abs(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rank_out_of_range() {
        let m = SparseMatrix::<f64>::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(truncated_svd(&m, &SvdConfig::new(3)).is_err());
        assert!(truncated_svd(&m, &SvdConfig::new(0)).is_err());
    }

    #[test]
    fn iteration_cap_reports_residuals() {
        // close singular values converge slowly
        let d: Vec<f64> = (0..40).map(|i| 10.0 - i as f64 * 1e-3).collect();
        let t: Vec<_> = d.iter().enumerate().map(|(i, &x)| (i, i, x)).collect();
        let mut t2 = t.clone();
        t2.push((0, 1, 0.7));
        t2.push((5, 3, 0.9));
        let m = SparseMatrix::<f64>::from_triplets(40, 40, &t2).unwrap();
        let cfg = SvdConfig {
            max_iter: 1,
            oversample: 0,
            tol: 1e-14,
            ..SvdConfig::new(3)
        };
        match truncated_svd(&m, &cfg) {
            Err(Error::NotConverged { residuals, .. }) => assert_eq!(residuals.len(), 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
