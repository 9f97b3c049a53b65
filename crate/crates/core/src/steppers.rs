//! Implicit forward Fokker–Planck and backward linearized HJB sweeps for a
//! frozen two-sided policy.
//!
//! Per level the FPK system is `(I/Δt − σΔ♯ − div♯(·Q_τ)) M_{τ+1} = M_τ/Δt` and
//! the HJB system is `(I/Δt − σΔ♯ + Q_τ±·D♯) U_τ = U_{τ+1}/Δt + ½|Q_τ±|² + V + f_{τ+1}`.
//! The two transport blocks are exact negative adjoints of each other, so the
//! FPK matrix is the transpose of the HJB matrix.

use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, FieldRole, GridSpec, PolicyField, ScalarField, SidePair};
use crate::hamiltonian::running_cost;
use crate::linalg::{solve_banded_1d, solve_sparse_5point, CsrMatrix, TridiagonalSystem};
use crate::ops::{advection, divergence, laplacian};

/// Per-level matrix in stencil form: a diagonal plus one coefficient for the
/// left and right neighbour of each node along each axis (`node * dim + axis`).
/// Coefficients pointing through a Neumann wall are always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOperator {
    pub diag: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl LevelOperator {
    fn diffusion(grid: &GridSpec, sigma: f64) -> Self {
        let (n, dim) = (grid.nodes(), grid.dim());
        let mut op = LevelOperator {
            diag: vec![1.0 / grid.dt(); n],
            left: vec![0.0; n * dim],
            right: vec![0.0; n * dim],
        };
        for axis in 0..dim {
            let c = sigma / (grid.h(axis) * grid.h(axis));
            for node in 0..n {
                let k = node * dim + axis;
                if grid.left(node, axis).is_some() {
                    op.diag[node] += c;
                    op.left[k] -= c;
                }
                if grid.right(node, axis).is_some() {
                    op.diag[node] += c;
                    op.right[k] -= c;
                }
            }
        }
        op
    }

    pub fn matvec(&self, grid: &GridSpec, x: &[f64]) -> Vec<f64> {
        let dim = grid.dim();
        (0..grid.nodes())
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                for axis in 0..dim {
                    let k = i * dim + axis;
                    if let Some(j) = grid.left(i, axis) {
                        v += self.left[k] * x[j];
                    }
                    if let Some(j) = grid.right(i, axis) {
                        v += self.right[k] * x[j];
                    }
                }
                v
            })
            .collect()
    }

    pub fn transpose(&self, grid: &GridSpec) -> LevelOperator {
        let dim = grid.dim();
        let mut t = LevelOperator {
            diag: self.diag.clone(),
            left: vec![0.0; self.left.len()],
            right: vec![0.0; self.right.len()],
        };
        for i in 0..grid.nodes() {
            for axis in 0..dim {
                let k = i * dim + axis;
                // A[i][left(i)] becomes Aᵀ[left(i)][i], the right entry of left(i)
                if let Some(j) = grid.left(i, axis) {
                    t.right[j * dim + axis] = self.left[k];
                }
                if let Some(j) = grid.right(i, axis) {
                    t.left[j * dim + axis] = self.right[k];
                }
            }
        }
        t
    }

    /// Row-major dense copy, for tests and diagnostics.
    pub fn to_dense(&self, grid: &GridSpec) -> Vec<Vec<f64>> {
        let n = grid.nodes();
        let dim = grid.dim();
        let mut a = vec![vec![0.0; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += self.diag[i];
            for axis in 0..dim {
                let k = i * dim + axis;
                if let Some(j) = grid.left(i, axis) {
                    row[j] += self.left[k];
                }
                if let Some(j) = grid.right(i, axis) {
                    row[j] += self.right[k];
                }
            }
        }
        a
    }

    pub fn to_tridiagonal(&self, grid: &GridSpec) -> Result<TridiagonalSystem> {
        if grid.dim() != 1 {
            return Err(Error::Unsupported("tridiagonal form needs a 1D grid".into()));
        }
        TridiagonalSystem::new(
            self.left.clone(),
            self.diag.clone(),
            self.right.clone(),
            grid.bc() == BoundaryCondition::Periodic,
        )
    }

    pub fn to_csr(&self, grid: &GridSpec) -> Result<CsrMatrix> {
        let dim = grid.dim();
        let mut triplets = Vec::with_capacity(grid.nodes() * (1 + 2 * dim));
        for i in 0..grid.nodes() {
            triplets.push((i, i, self.diag[i]));
            for axis in 0..dim {
                let k = i * dim + axis;
                if let Some(j) = grid.left(i, axis) {
                    triplets.push((i, j, self.left[k]));
                }
                if let Some(j) = grid.right(i, axis) {
                    triplets.push((i, j, self.right[k]));
                }
            }
        }
        CsrMatrix::from_triplets(grid.nodes(), &triplets)
    }

    pub fn solve(&self, grid: &GridSpec, rhs: &[f64]) -> Result<Vec<f64>> {
        if grid.dim() == 1 {
            solve_banded_1d(&self.to_tridiagonal(grid)?, rhs)
        } else {
            solve_sparse_5point(&self.to_csr(grid)?, rhs)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportMatrices {
    pub hjb: LevelOperator,
    pub fpk: LevelOperator,
}

/// Advection block `U ↦ Q±·D♯U` of the HJB system.
pub fn hjb_advection_block(q: &[SidePair], grid: &GridSpec) -> Result<LevelOperator> {
    grid.check_policy_level(q.len())?;
    let (n, dim) = (grid.nodes(), grid.dim());
    let mut op = LevelOperator {
        diag: vec![0.0; n],
        left: vec![0.0; n * dim],
        right: vec![0.0; n * dim],
    };
    for node in 0..n {
        for axis in 0..dim {
            let k = node * dim + axis;
            let inv_h = 1.0 / grid.h(axis);
            let (ql, qr) = (q[k].left_eff() * inv_h, q[k].right_eff() * inv_h);
            if grid.left(node, axis).is_some() {
                op.diag[node] += ql;
                op.left[k] -= ql;
            }
            if grid.right(node, axis).is_some() {
                op.diag[node] -= qr;
                op.right[k] += qr;
            }
        }
    }
    Ok(op)
}

/// Divergence block `M ↦ div♯(M Q)` of the FPK system, assembled face by face.
pub fn fpk_divergence_block(q: &[SidePair], grid: &GridSpec) -> Result<LevelOperator> {
    grid.check_policy_level(q.len())?;
    let (n, dim) = (grid.nodes(), grid.dim());
    let mut op = LevelOperator {
        diag: vec![0.0; n],
        left: vec![0.0; n * dim],
        right: vec![0.0; n * dim],
    };
    for i in 0..n {
        for axis in 0..dim {
            let Some(j) = grid.right(i, axis) else { continue };
            let inv_h = 1.0 / grid.h(axis);
            let into_i = q[j * dim + axis].left_eff() * inv_h;
            let out_of_i = q[i * dim + axis].right_eff() * inv_h;
            // flux M_j Q⁺_{j,L} + M_i Q⁻_{i,R} is added to row i, removed from row j
            op.right[i * dim + axis] += into_i;
            op.diag[i] += out_of_i;
            op.diag[j] -= into_i;
            op.left[j * dim + axis] -= out_of_i;
        }
    }
    Ok(op)
}

/// Both per-level system matrices for one policy level.
pub fn assemble_transport_matrices(q: &[SidePair], sigma: f64, grid: &GridSpec) -> Result<TransportMatrices> {
    let base = LevelOperator::diffusion(grid, sigma);
    let adv = hjb_advection_block(q, grid)?;
    let div = fpk_divergence_block(q, grid)?;
    let combine = |block: &LevelOperator, sign: f64| LevelOperator {
        diag: base.diag.iter().zip(&block.diag).map(|(a, b)| a + sign * b).collect(),
        left: base.left.iter().zip(&block.left).map(|(a, b)| a + sign * b).collect(),
        right: base.right.iter().zip(&block.right).map(|(a, b)| a + sign * b).collect(),
    };
    Ok(TransportMatrices {
        hjb: combine(&adv, 1.0),
        fpk: combine(&div, -1.0),
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("diffusion σ must be positive, got {sigma}")));
    }
    Ok(())
}

/// Density levels `0..=T` generated by `policy` from `m0`. No renormalization.
pub fn fpk_forward_sweep(grid: &GridSpec, sigma: f64, policy: &PolicyField, m0: &[f64]) -> Result<ScalarField> {
    check_sigma(sigma)?;
    policy.check_grid(grid)?;
    grid.check_level(m0.len())?;
    let mut m = ScalarField::zeros(grid, FieldRole::Density);
    m.level_mut(0).copy_from_slice(m0);
    let inv_dt = 1.0 / grid.dt();
    for tau in 0..grid.time_steps() {
        let matrices = assemble_transport_matrices(policy.level(tau), sigma, grid)?;
        let rhs: Vec<f64> = m.level(tau).iter().map(|v| v * inv_dt).collect();
        let next = matrices.fpk.solve(grid, &rhs).map_err(|e| e.at_level(tau + 1))?;
        m.level_mut(tau + 1).copy_from_slice(&next);
    }
    Ok(m)
}

/// Value levels `0..=T` of `policy`, solved backward from `terminal`.
///
/// `coupling` holds `f_h[M_τ]` on levels `0..=T`; the step producing `U_τ`
/// reads level `τ + 1`.
pub fn hjb_backward_sweep(
    grid: &GridSpec,
    sigma: f64,
    policy: &PolicyField,
    terminal: &[f64],
    coupling: &ScalarField,
    potential: &[f64],
) -> Result<ScalarField> {
    check_sigma(sigma)?;
    policy.check_grid(grid)?;
    coupling.check_grid(grid)?;
    grid.check_level(terminal.len())?;
    grid.check_level(potential.len())?;
    let t = grid.time_steps();
    let dim = grid.dim();
    let mut u = ScalarField::zeros(grid, FieldRole::Value);
    u.level_mut(t).copy_from_slice(terminal);
    let inv_dt = 1.0 / grid.dt();
    for tau in (0..t).rev() {
        let q = policy.level(tau);
        let matrices = assemble_transport_matrices(q, sigma, grid)?;
        let f = coupling.level(tau + 1);
        let rhs: Vec<f64> = u
            .level(tau + 1)
            .iter()
            .enumerate()
            .map(|(i, ui)| ui * inv_dt + running_cost(&q[i * dim..(i + 1) * dim], potential[i]) + f[i])
            .collect();
        let level = matrices.hjb.solve(grid, &rhs).map_err(|e| e.at_level(tau))?;
        u.level_mut(tau).copy_from_slice(&level);
    }
    Ok(u)
}

/// `sup_{τ,i} |(M_{τ+1} − M_τ)/Δt − σΔ♯M_{τ+1} − div♯(M_{τ+1} Q_τ)|`, evaluated
/// with the grid operators rather than the assembled matrices.
pub fn fpk_scheme_residual(grid: &GridSpec, sigma: f64, m: &ScalarField, q: &PolicyField) -> Result<f64> {
    m.check_grid(grid)?;
    q.check_grid(grid)?;
    let mut worst: f64 = 0.0;
    for tau in 0..grid.time_steps() {
        let (prev, next) = (m.level(tau), m.level(tau + 1));
        let lap = laplacian(grid, next)?;
        let div = divergence(grid, next, q.level(tau))?;
        for i in 0..grid.nodes() {
            let r = (next[i] - prev[i]) / grid.dt() - sigma * lap[i] - div[i];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Sup of the linearized HJB scheme residual, including the terminal condition.
pub fn hjb_scheme_residual(
    grid: &GridSpec,
    sigma: f64,
    u: &ScalarField,
    q: &PolicyField,
    terminal: &[f64],
    coupling: &ScalarField,
    potential: &[f64],
) -> Result<f64> {
    u.check_grid(grid)?;
    q.check_grid(grid)?;
    coupling.check_grid(grid)?;
    let t = grid.time_steps();
    let dim = grid.dim();
    let mut worst = u
        .level(t)
        .iter()
        .zip(terminal)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    for tau in 0..t {
        let (cur, next) = (u.level(tau), u.level(tau + 1));
        let ql = q.level(tau);
        let lap = laplacian(grid, cur)?;
        let adv = advection(grid, ql, cur)?;
        let f = coupling.level(tau + 1);
        for i in 0..grid.nodes() {
            let r = (cur[i] - next[i]) / grid.dt() - sigma * lap[i] + adv[i]
                - running_cost(&ql[i * dim..(i + 1) * dim], potential[i])
                - f[i];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
