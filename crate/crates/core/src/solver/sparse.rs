//! CSR matrices, Jacobi-preconditioned BiCGStab and a dense LU fallback.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates. Entries
    /// are accumulated in triplet order, so the result is deterministic.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // Stable sort keeps the original accumulation order within an entry.
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    BiCgStab,
    DenseLu,
}

#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||Ax - b|| / ||b||`.
    pub residual: f64,
    pub kind: SolverKind,
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Right-preconditioned BiCGStab with the Jacobi preconditioner.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<LinearSolution> {
    let n = a.n;
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok(LinearSolution { x, iterations: 0, residual: 0.0, kind: SolverKind::BiCgStab });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(a, d)| a * d).collect() };

    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        a.mul_vec_into(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / nb <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            let residual = relative_residual(a, &x, b);
            if residual <= tol {
                return Ok(LinearSolution { x, iterations: it, residual, kind: SolverKind::BiCgStab });
            }
            r = b.iter().zip(a.mul_vec(&x)).map(|(bi, ai)| bi - ai).collect();
            continue;
        }
        let s_hat = precond(&s);
        a.mul_vec_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) / nb <= tol {
            let residual = relative_residual(a, &x, b);
            if residual <= tol {
                return Ok(LinearSolution { x, iterations: it, residual, kind: SolverKind::BiCgStab });
            }
        }
        if omega == 0.0 {
            break;
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual: relative_residual(a, &x, b) })
}

pub fn dense_lu(a: &CsrMatrix, b: &[f64]) -> Result<LinearSolution> {
    let lu = a.to_dense().lu();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Classification("assembled matrix is singular".into()))?;
    let x: Vec<f64> = x.iter().copied().collect();
    let residual = relative_residual(a, &x, b);
    Ok(LinearSolution { x, iterations: 1, residual, kind: SolverKind::DenseLu })
}

/// Largest system handed to the dense fallback.
pub const DENSE_FALLBACK_MAX: usize = 5000;

/// BiCGStab; systems with at most [`DENSE_FALLBACK_MAX`] unknowns fall back
/// to dense LU if the iteration fails.
pub fn solve_linear(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<LinearSolution> {
    match bicgstab(a, b, tol, max_iter) {
        Ok(sol) => Ok(sol),
        Err(e) if a.n <= DENSE_FALLBACK_MAX => {
            let sol = dense_lu(a, b)?;
            if sol.residual <= tol.max(1e-12) {
                Ok(sol)
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}
