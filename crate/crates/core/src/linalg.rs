//! Direct solvers for the per-level systems of the implicit sweeps.
//!
//! 1D systems are tridiagonal (with two corner entries when periodic) and are
//! solved by the Thomas algorithm, using a Sherman–Morrison correction for the
//! corners. 2D systems are stored row-compressed and solved by banded LU
//! without pivoting, which is stable for the diagonally dominant M-matrices
//! produced by the upwind scheme. Wide-band matrices (periodic 2D) fall back to
//! Jacobi-preconditioned BiCGStab.

use crate::error::{Error, Result};

/// Tridiagonal system where `lower[i]` multiplies `x[i-1]` and `upper[i]`
/// multiplies `x[i+1]`. When `cyclic`, `lower[0]` multiplies `x[n-1]` and
/// `upper[n-1]` multiplies `x[0]`; otherwise both are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub cyclic: bool,
}

impl TridiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, cyclic: bool) -> Result<Self> {
        let n = diag.len();
        for len in [lower.len(), upper.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        Ok(TridiagonalSystem {
            lower,
            diag,
            upper,
            cyclic,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i] * x[i - 1];
                } else if self.cyclic {
                    v += self.lower[0] * x[n - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                } else if self.cyclic {
                    v += self.upper[n - 1] * x[0];
                }
                v
            })
            .collect()
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = if n > 1 { upper[0] / pivot } else { 0.0 };
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(Error::SingularSystem { row: i });
        }
        if i + 1 < n {
            c[i] = upper[i] / pivot;
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn check_rhs(n: usize, rhs: &[f64]) -> Result<()> {
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    Ok(())
}

/// Thomas algorithm; corner entries are ignored.
pub fn solve_tridiagonal(system: &TridiagonalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    check_rhs(system.len(), rhs)?;
    thomas(&system.lower, &system.diag, &system.upper, rhs)
}

/// Thomas algorithm with a Sherman–Morrison rank-one correction for the corners.
pub fn solve_cyclic_tridiagonal(system: &TridiagonalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = system.len();
    check_rhs(n, rhs)?;
    if n < 3 {
        return Err(Error::InvalidGrid(format!(
            "cyclic tridiagonal system needs n >= 3, got {n}"
        )));
    }
    // A = T + u vᵀ with u = (γ, 0, .., 0, c_{n-1}), v = (1, 0, .., 0, a_0/γ)
    let a0 = system.lower[0];
    let cn = system.upper[n - 1];
    let gamma = -system.diag[0];
    let mut diag = system.diag.clone();
    diag[0] -= gamma;
    diag[n - 1] -= a0 * cn / gamma;

    let y = thomas(&system.lower, &diag, &system.upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = cn;
    let z = thomas(&system.lower, &diag, &system.upper, &u)?;

    let vy = y[0] + a0 / gamma * y[n - 1];
    let vz = z[0] + a0 / gamma * z[n - 1];
    let denom = 1.0 + vz;
    if denom == 0.0 {
        return Err(Error::SingularSystem { row: n - 1 });
    }
    let factor = vy / denom;
    Ok(y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect())
}

/// Dispatches on `system.cyclic`.
pub fn solve_banded_1d(system: &TridiagonalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    if system.cyclic {
        solve_cyclic_tridiagonal(system, rhs)
    } else {
        solve_tridiagonal(system, rhs)
    }
}

/// Square matrix in compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.max(c) + 1,
                });
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            cols,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut up = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    lo = lo.max(i - j);
                } else {
                    up = up.max(j - i);
                }
            }
        }
        (lo, up)
    }
}

const SPARSE_TOLERANCE: f64 = 1e-10;
const BAND_WORK_LIMIT: f64 = 2e9;

/// Solves a 5-point-stencil system to relative residual `1e-10`.
pub fn solve_sparse_5point(system: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    check_rhs(system.dim(), rhs)?;
    let (lo, up) = system.bandwidths();
    let work = system.dim() as f64 * (lo as f64 + 1.0) * (up as f64 + 1.0);
    if work <= BAND_WORK_LIMIT {
        banded_lu_solve(system, lo, up, rhs)
    } else {
        bicgstab(system, rhs, SPARSE_TOLERANCE * 1e-2, 20 * system.dim().max(100))
    }
}

fn banded_lu_solve(a: &CsrMatrix, lo: usize, up: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    let width = lo + up + 1;
    // band[i * width + (j + lo - i)] holds A[i][j]
    let mut band = vec![0.0; n * width];
    for i in 0..n {
        for (j, v) in a.row(i) {
            band[i * width + j + lo - i] += v;
        }
    }
    let at = |i: usize, j: usize| i * width + j + lo - i;
    let mut x = rhs.to_vec();
    for k in 0..n {
        let pivot = band[at(k, k)];
        if pivot == 0.0 {
            return Err(Error::SingularSystem { row: k });
        }
        let last_col = (k + up).min(n - 1);
        for i in k + 1..=(k + lo).min(n - 1) {
            let l = band[at(i, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            band[at(i, k)] = l;
            let len = last_col - k;
            // row i's segment lies after row k's in the band storage
            let (head, tail) = band.split_at_mut(at(i, k + 1));
            let src = &head[at(k, k + 1)..at(k, k + 1) + len];
            for (dst, s) in tail[..len].iter_mut().zip(src) {
                *dst -= l * s;
            }
            x[i] -= l * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..=(i + up).min(n - 1) {
            s -= band[at(i, j)] * x[j];
        }
        x[i] = s / band[at(i, i)];
    }
    Ok(x)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.dim();
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };

    let b_norm = norm_inf(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut residual = 1.0;
    for iter in 0..max_iter {
        let rho_next = dot(&r0, &r);
        if rho_next == 0.0 {
            return Err(Error::SolverFailure {
                iterations: iter,
                residual,
            });
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let phat = precond(&p);
        v = a.matvec(&phat);
        alpha = rho / dot(&r0, &v);
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let shat = precond(&s);
        let t = a.matvec(&shat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        residual = norm_inf(&r) / b_norm;
        if residual <= tol {
            let true_res = a
                .matvec(&x)
                .iter()
                .zip(b)
                .map(|(ax, bi)| (ax - bi).abs())
                .fold(0.0, f64::max)
                / b_norm;
            if true_res <= SPARSE_TOLERANCE {
                return Ok(x);
            }
            r = b.iter().zip(a.matvec(&x)).map(|(bi, ax)| bi - ax).collect();
        }
        if omega == 0.0 {
            break;
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual,
    })
}
