//! Quadratic Hamiltonian `H(x, p) = ½|p|² − V(x)` and its conjugate
//! `L(x, q) = ½|q|² + V(x)`.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolicyField, ScalarField, SidePair};
use crate::ops::two_sided_gradient;

/// State potential sampled at the nodes together with the policy cap `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    potential: Vec<f64>,
    cap: f64,
}

impl HamiltonianSpec {
    pub fn new(potential: Vec<f64>, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::Parameter(format!("policy cap R must be positive, got {cap}")));
        }
        if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("potential is not finite at node {i}")));
        }
        Ok(HamiltonianSpec { potential, cap })
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// `H(x_i, p) = ½|p|² − V_i`
    pub fn hamiltonian(&self, node: usize, p: &[f64]) -> f64 {
        0.5 * p.iter().map(|x| x * x).sum::<f64>() - self.potential[node]
    }

    /// `L(x_i, q) = ½|q|² + V_i`
    pub fn lagrangian(&self, node: usize, q: &[f64]) -> f64 {
        0.5 * q.iter().map(|x| x * x).sum::<f64>() + self.potential[node]
    }
}

/// Greedy policy from a value field: `(min{R, (D_L U)⁺}, max{−R, (D_R U)⁻})`.
///
/// Level `τ` of the policy reads level `τ` of `u`, for `τ = 0..T−1`.
pub fn extract_policy(u: &ScalarField, grid: &GridSpec, cap: f64) -> Result<PolicyField> {
    Ok(extract_policy_counting(u, grid, cap)?.0)
}

/// As [`extract_policy`], also returning how many one-sided components hit the cap.
pub fn extract_policy_counting(
    u: &ScalarField,
    grid: &GridSpec,
    cap: f64,
) -> Result<(PolicyField, usize)> {
    u.check_grid(grid)?;
    let mut q = PolicyField::zeros(grid);
    let mut capped = 0;
    for tau in 0..grid.time_steps() {
        let grad = two_sided_gradient(grid, u.level(tau))?;
        for (out, d) in q.level_mut(tau).iter_mut().zip(grad) {
            let (l, r) = (d.left.max(0.0), d.right.min(0.0));
            capped += usize::from(l > cap) + usize::from(-r > cap);
            *out = SidePair::new(l.min(cap), r.max(-cap));
        }
    }
    Ok((q, capped))
}

/// `½ Σ_axes ((Q_L⁺)² + (Q_R⁻)²) + V_i` for the pairs of one node.
pub fn running_cost(q: &[SidePair], potential: f64) -> f64 {
    0.5 * q.iter().map(|p| p.norm_sq()).sum::<f64>() + potential
}

/// `H(x, p) + L(x, q) − p·q`, which equals `½|p − q|²` for the quadratic case.
pub fn legendre_gap(spec: &HamiltonianSpec, node: usize, p: &[f64], q: &[f64]) -> f64 {
    let pq: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
    spec.hamiltonian(node, p) + spec.lagrangian(node, q) - pq
}
