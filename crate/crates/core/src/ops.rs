//! Discrete differential operators on a single time level.
//!
//! In 2D every operator is the sum of the 1D stencils along each axis. On
//! Neumann walls the Laplacian and gradient use mirrored ghosts
//! (`U_{-1} = U_0`, `U_{I+1} = U_I`) and the divergence carries no flux
//! through the wall, so that `Σ_i div(MQ)_i = 0` on both boundary types.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolicyField, SidePair};

/// `(Δ♯U)_i = Σ_axes (U_[i-1] - 2U_i + U_[i+1]) / h²`
pub fn laplacian(grid: &GridSpec, u: &[f64]) -> Result<Vec<f64>> {
    grid.check_level(u.len())?;
    let dim = grid.dim();
    let mut out = vec![0.0; u.len()];
    for axis in 0..dim {
        let inv_h2 = 1.0 / (grid.h(axis) * grid.h(axis));
        for (node, o) in out.iter_mut().enumerate() {
            let ul = grid.left(node, axis).map_or(u[node], |j| u[j]);
            let ur = grid.right(node, axis).map_or(u[node], |j| u[j]);
            *o += (ul - 2.0 * u[node] + ur) * inv_h2;
        }
    }
    Ok(out)
}

/// `(D_L U, D_R U)` per node and axis, indexed `node * dim + axis`.
pub fn two_sided_gradient(grid: &GridSpec, u: &[f64]) -> Result<Vec<SidePair>> {
    grid.check_level(u.len())?;
    let dim = grid.dim();
    let mut out = vec![SidePair::ZERO; u.len() * dim];
    for node in 0..u.len() {
        for axis in 0..dim {
            let h = grid.h(axis);
            let dl = grid.left(node, axis).map_or(0.0, |j| (u[node] - u[j]) / h);
            let dr = grid.right(node, axis).map_or(0.0, |j| (u[j] - u[node]) / h);
            out[node * dim + axis] = SidePair::new(dl, dr);
        }
    }
    Ok(out)
}

/// Upwind transport `div♯(M Q)` in flux form.
///
/// The flux through the face between `i` and its right neighbour `j` is
/// `M_j Q⁺_{j,L} + M_i Q⁻_{i,R}`; it enters node `i` and leaves node `j`.
pub fn divergence(grid: &GridSpec, m: &[f64], q: &[SidePair]) -> Result<Vec<f64>> {
    grid.check_level(m.len())?;
    grid.check_policy_level(q.len())?;
    let dim = grid.dim();
    let mut out = vec![0.0; m.len()];
    for axis in 0..dim {
        let inv_h = 1.0 / grid.h(axis);
        for i in 0..m.len() {
            if let Some(j) = grid.right(i, axis) {
                let flux = (m[j] * q[j * dim + axis].left_eff()
                    + m[i] * q[i * dim + axis].right_eff())
                    * inv_h;
                out[i] += flux;
                out[j] -= flux;
            }
        }
    }
    Ok(out)
}

/// `(Q± · D♯U)_i = Σ_axes Q⁺_L D_L U + Q⁻_R D_R U`, the advection term of the
/// linearized HJB equation. It is the negative adjoint of [`divergence`].
pub fn advection(grid: &GridSpec, q: &[SidePair], u: &[f64]) -> Result<Vec<f64>> {
    grid.check_policy_level(q.len())?;
    let grad = two_sided_gradient(grid, u)?;
    let dim = grid.dim();
    Ok((0..u.len())
        .map(|node| {
            (0..dim)
                .map(|axis| {
                    let k = node * dim + axis;
                    q[k].left_eff() * grad[k].left + q[k].right_eff() * grad[k].right
                })
                .sum()
        })
        .collect())
}

/// `h Σ_i M_i` (`h₁h₂ ΣΣ` in 2D).
pub fn mass(grid: &GridSpec, m: &[f64]) -> f64 {
    grid.cell_volume() * m.iter().sum::<f64>()
}

/// `max_{τ,i,axis} max{|ΔQ_L⁺|, |ΔQ_R⁻|}`, comparing effective parts only.
pub fn sup_norm_policy_diff(a: &PolicyField, b: &PolicyField) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::GridMismatch);
    }
    Ok(a.pairs()
        .iter()
        .zip(b.pairs())
        .map(|(p, q)| {
            (p.left_eff() - q.left_eff())
                .abs()
                .max((p.right_eff() - q.right_eff()).abs())
        })
        .fold(0.0, f64::max))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
