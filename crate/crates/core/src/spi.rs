//! Smoothed policy iteration drivers.
//!
//! * SPI1 averages the greedy policies, `Q̄⁽ⁿ⁺¹⁾ = (1 − β_n) Q̄⁽ⁿ⁾ + β_n Q⁽ⁿ⁺¹⁾`,
//!   with `β_n = 2/(n+2)` (or `1/(n+2)`), and evaluates `Q̄⁽ⁿ⁾` against the
//!   density it generates.
//! * SPI2 averages the density/flux pairs `(M, W = M Q±)` with `β_n = 2/(n+1)`
//!   and evaluates the policy `q̂ = W̄/M̄` that generates the averaged density.
//! * Plain policy iteration is SPI1 with `β ≡ 1`.
//!
//! Every driver stops when the greedy update moves by at most `ε` in the
//! effective-part sup norm, measured before smoothing.


use crate::coupling::{discrete_j, Coupling};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolicyField, ScalarField, SidePair};
use crate::hamiltonian::{extract_policy, extract_policy_counting, HamiltonianSpec};
use crate::ops::{mass, sup_norm_policy_diff};
use crate::steppers::{fpk_forward_sweep, fpk_scheme_residual, hjb_backward_sweep, hjb_scheme_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Spi1,
    Spi2,
    PolicyIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSchedule {
    /// `β_n = 2/(n+2)`: triangular weights on the greedy policies
    TwoOverNPlus2,
    /// `β_n = 1/(n+2)`: arithmetic mean
    OneOverNPlus2,
}

impl RateSchedule {
    pub fn beta(self, n: usize) -> f64 {
        match self {
            RateSchedule::TwoOverNPlus2 => 2.0 / (n as f64 + 2.0),
            RateSchedule::OneOverNPlus2 => 1.0 / (n as f64 + 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// SPI1 only; SPI2 always uses `2/(n+1)`.
    pub rate: RateSchedule,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Average in `Q⁽ⁿ⁾` instead of `Q⁽ⁿ⁺¹⁾` in the SPI1 smoothing step.
    pub compat_discrete_step4: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            algorithm: Algorithm::Spi1,
            rate: RateSchedule::TwoOverNPlus2,
            tolerance: 1e-4,
            max_iterations: 1000,
            compat_discrete_step4: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fully discretized MFG: grid, diffusion, initial density, Hamiltonian and coupling.
#[derive(Debug, Clone)]
pub struct MfgProblem {
    pub grid: GridSpec,
    pub sigma: f64,
    pub initial_density: Vec<f64>,
    pub hamiltonian: HamiltonianSpec,
    pub coupling: Coupling,
}

impl MfgProblem {
    pub fn new(
        grid: GridSpec,
        sigma: f64,
        initial_density: Vec<f64>,
        hamiltonian: HamiltonianSpec,
        coupling: Coupling,
    ) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Parameter(format!("diffusion σ must be positive, got {sigma}")));
        }
        grid.check_level(initial_density.len())?;
        grid.check_level(hamiltonian.potential().len())?;
        if let Some(node) = initial_density.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::NegativeDensity {
                node,
                value: initial_density[node],
            });
        }
        Ok(MfgProblem {
            grid,
            sigma,
            initial_density,
            hamiltonian,
            coupling,
        })
    }

    pub fn cap(&self) -> f64 {
        self.hamiltonian.cap()
    }

    fn forward(&self, policy: &PolicyField) -> Result<ScalarField> {
        fpk_forward_sweep(&self.grid, self.sigma, policy, &self.initial_density)
    }

    /// Policy evaluation against a density: running coupling `f_h[M_{τ+1}]`,
    /// terminal `g_h[M_T]`.
    fn evaluate(&self, policy: &PolicyField, density: &ScalarField) -> Result<ScalarField> {
        let running = self.coupling.running_field(density, &self.grid)?;
        let terminal = self
            .coupling
            .terminal(density.level(self.grid.time_steps()), &self.grid)?;
        hjb_backward_sweep(
            &self.grid,
            self.sigma,
            policy,
            &terminal,
            &running,
            self.hamiltonian.potential(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Converged { iterations: usize },
    MaxIterations { iterations: usize },
}

impl Termination {
    pub fn iterations(self) -> usize {
        match self {
            Termination::Converged { iterations } | Termination::MaxIterations { iterations } => iterations,
        }
    }

    pub fn converged(self) -> bool {
        matches!(self, Termination::Converged { .. })
    }
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// `‖Q⁽ⁿ⁺¹⁾ − Q⁽ⁿ⁾‖_{l∞}`
    pub linf_policy_diff: f64,
    /// Density-weighted squared gap between the greedy and the evaluated policy.
    pub a_n: f64,
    /// `J_0` of the evaluated (density, policy) pair; `None` when the coupling has no potential.
    pub j0: Option<f64>,
    pub mass_drift: f64,
    pub min_density: f64,
    /// One-sided components clipped by the cap during extraction.
    pub capped: usize,
}

/// A-posteriori residuals of a terminated iterate in the discrete MFG system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    /// `‖Q − extract_policy(U)‖_{l∞}`
    pub policy_consistency: f64,
    /// Sup of the FPK scheme at `(M, Q)`, including `|M_0 − m_0|`.
    pub fpk_residual: f64,
    /// Sup of the linearized HJB scheme at `(U, Q, f_h[M])`, including the terminal condition.
    pub hjb_residual: f64,
}

impl Certification {
    pub fn max(&self) -> f64 {
        self.policy_consistency.max(self.fpk_residual).max(self.hjb_residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub certification: Certification,
}

impl IterationReport {
    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.linf_policy_diff).collect()
    }

    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.linf_policy_diff)
    }
}

/// Result of a run. `(value, density, policy)` is the last evaluated triple:
/// `density` is generated by `policy` and `value` evaluates `policy` against
/// `density`. `greedy` is the final greedy update `extract_policy(value)`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub value: ScalarField,
    pub density: ScalarField,
    pub policy: PolicyField,
    pub greedy: PolicyField,
    pub report: IterationReport,
}

/// `(1 − β_n) Q̄ₙ + β_n Q_next` on the raw components.
pub fn smoothing_update_policy(
    q_bar: &PolicyField,
    q_next: &PolicyField,
    n: usize,
    schedule: RateSchedule,
) -> Result<PolicyField> {
    blend_policy(q_bar, q_next, schedule.beta(n))
}

fn blend_policy(a: &PolicyField, b: &PolicyField, beta: f64) -> Result<PolicyField> {
    if !a.same_shape(b) {
        return Err(Error::GridMismatch);
    }
    let mut out = a.clone();
    for (o, q) in out.pairs_mut().iter_mut().zip(b.pairs()) {
        *o = o.lerp(*q, beta);
    }
    Ok(out)
}

/// Flux `W_{τ+1} = M_{τ+1} Q_τ±`, stored on policy levels `τ = 0..T−1`.
pub fn flux(m: &ScalarField, q: &PolicyField) -> Result<PolicyField> {
    if m.levels() != q.levels() + 1 || m.nodes() != q.nodes() {
        return Err(Error::GridMismatch);
    }
    let mut w = q.clone();
    let dim = q.dim();
    for tau in 0..q.levels() {
        let density = m.level(tau + 1);
        for (k, pair) in w.level_mut(tau).iter_mut().enumerate() {
            let mi = density[k / dim];
            *pair = SidePair::new(mi * pair.left_eff(), mi * pair.right_eff());
        }
    }
    Ok(w)
}

/// `q̂ = ((W̄_L)⁺/M̄_{τ+1}, (W̄_R)⁻/M̄_{τ+1})`; fails if `M̄` is not positive.
pub fn flux_policy(m_bar: &ScalarField, w_bar: &PolicyField) -> Result<PolicyField> {
    if m_bar.levels() != w_bar.levels() + 1 || m_bar.nodes() != w_bar.nodes() {
        return Err(Error::GridMismatch);
    }
    let mut q = w_bar.clone();
    let dim = w_bar.dim();
    for tau in 0..w_bar.levels() {
        let density = m_bar.level(tau + 1);
        for (k, pair) in q.level_mut(tau).iter_mut().enumerate() {
            let mi = density[k / dim];
            if !(mi > 0.0) {
                return Err(Error::InvariantViolation(format!(
                    "smoothed density {mi:e} is not positive at level {}, node {}",
                    tau + 1,
                    k / dim
                )));
            }
            *pair = SidePair::new(pair.left_eff() / mi, pair.right_eff() / mi);
        }
    }
    Ok(q)
}

/// SPI2 smoothing of the density/flux pair with `β_n = 2/(n+1)`, `n ≥ 1`.
///
/// Returns `(M̄, W̄, q̂)`.
pub fn smoothing_update_flux(
    m_bar: &ScalarField,
    w_bar: &PolicyField,
    m_next: &ScalarField,
    w_next: &PolicyField,
    n: usize,
) -> Result<(ScalarField, PolicyField, PolicyField)> {
    if n == 0 {
        return Err(Error::Parameter(
            "flux smoothing starts at n = 1; n = 0 initializes the averages".into(),
        ));
    }
    if m_bar.levels() != m_next.levels() || m_bar.nodes() != m_next.nodes() {
        return Err(Error::GridMismatch);
    }
    let beta = 2.0 / (n as f64 + 1.0);
    let mut m = m_bar.clone();
    for (a, b) in m.as_mut_slice().iter_mut().zip(m_next.as_slice()) {
        *a = (1.0 - beta) * *a + beta * b;
    }
    let w = blend_policy(w_bar, w_next, beta)?;
    let q_hat = flux_policy(&m, &w)?;
    Ok((m, w, q_hat))
}

/// `Δt · vol · Σ_{τ,i} M_{τ+1,i} |greedy − evaluated|²` over effective parts.
pub fn residual_energy(
    grid: &GridSpec,
    density: &ScalarField,
    greedy: &PolicyField,
    evaluated: &PolicyField,
) -> Result<f64> {
    density.check_grid(grid)?;
    greedy.check_grid(grid)?;
    evaluated.check_grid(grid)?;
    let dim = grid.dim();
    let mut sum = 0.0;
    for tau in 0..grid.time_steps() {
        let m = density.level(tau + 1);
        for (k, (g, e)) in greedy.level(tau).iter().zip(evaluated.level(tau)).enumerate() {
            let dl = g.left_eff() - e.left_eff();
            let dr = g.right_eff() - e.right_eff();
            sum += m[k / dim] * (dl * dl + dr * dr);
        }
    }
    Ok(grid.dt() * grid.cell_volume() * sum)
}

/// Per-iteration record for an evaluated triple and its greedy update.
pub fn compute_residual_diagnostics(
    problem: &MfgProblem,
    n: usize,
    density: &ScalarField,
    evaluated: &PolicyField,
    greedy: &PolicyField,
    linf_policy_diff: f64,
    capped: usize,
) -> Result<IterationRecord> {
    let grid = &problem.grid;
    let a_n = residual_energy(grid, density, greedy, evaluated)?;
    let j0 = match discrete_j(density, evaluated, 0, &problem.coupling, &problem.hamiltonian, grid) {
        Ok(j) => Some(j),
        Err(Error::UnsupportedPotential(_)) => None,
        Err(e) => return Err(e),
    };
    let m0 = mass(grid, density.level(0));
    let mass_drift = density
        .iter_levels()
        .map(|level| ((mass(grid, level) - m0) / m0).abs())
        .fold(0.0, f64::max);
    let min_density = density
        .iter_levels()
        .skip(1)
        .flat_map(|l| l.iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(IterationRecord {
        n,
        linf_policy_diff,
        a_n,
        j0,
        mass_drift,
        min_density,
        capped,
    })
}

/// Residuals of `(U, M, Q)` in the discrete system; all vanish at a fixed point.
pub fn certify_fixed_point(
    value: &ScalarField,
    density: &ScalarField,
    policy: &PolicyField,
    problem: &MfgProblem,
) -> Result<Certification> {
    let grid = &problem.grid;
    let greedy = extract_policy(value, grid, problem.cap())?;
    let policy_consistency = sup_norm_policy_diff(policy, &greedy)?;
    let initial_gap = density
        .level(0)
        .iter()
        .zip(&problem.initial_density)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let fpk_residual = fpk_scheme_residual(grid, problem.sigma, density, policy)?.max(initial_gap);
    let running = problem.coupling.running_field(density, grid)?;
    let terminal = problem.coupling.terminal(density.level(grid.time_steps()), grid)?;
    let hjb_residual = hjb_scheme_residual(
        grid,
        problem.sigma,
        value,
        policy,
        &terminal,
        &running,
        problem.hamiltonian.potential(),
    )?;
    Ok(Certification {
        policy_consistency,
        fpk_residual,
        hjb_residual,
    })
}

fn check_initial_policy(problem: &MfgProblem, q0: &PolicyField) -> Result<()> {
    q0.check_grid(&problem.grid)?;
    if q0.sup_norm() > problem.cap() {
        return Err(Error::Parameter(format!(
            "initial policy exceeds the cap: {} > {}",
            q0.sup_norm(),
            problem.cap()
        )));
    }
    Ok(())
}

/// Dispatches on `config.algorithm`.
pub fn run(problem: &MfgProblem, config: &SolverConfig, q0: &PolicyField) -> Result<RunOutput> {
    run_observed(problem, config, q0, &mut |_| {})
}

/// As [`run`], calling `observe` after every outer iteration.
pub fn run_observed(
    problem: &MfgProblem,
    config: &SolverConfig,
    q0: &PolicyField,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<RunOutput> {
    match config.algorithm {
        Algorithm::Spi1 => policy_averaging(problem, config, q0, Algorithm::Spi1, &|n| config.rate.beta(n), observe),
        Algorithm::Spi2 => flux_averaging(problem, config, q0, observe),
        Algorithm::PolicyIteration => {
            policy_averaging(problem, config, q0, Algorithm::PolicyIteration, &|_| 1.0, observe)
        }
    }
}

pub fn run_spi1(problem: &MfgProblem, config: &SolverConfig, q0: &PolicyField) -> Result<RunOutput> {
    let config = SolverConfig {
        algorithm: Algorithm::Spi1,
        ..config.clone()
    };
    run(problem, &config, q0)
}

/// Unsmoothed policy iteration: the greedy policy replaces the evaluated one.
pub fn run_policy_iteration(problem: &MfgProblem, config: &SolverConfig, q0: &PolicyField) -> Result<RunOutput> {
    let config = SolverConfig {
        algorithm: Algorithm::PolicyIteration,
        ..config.clone()
    };
    run(problem, &config, q0)
}

pub fn run_spi2(problem: &MfgProblem, config: &SolverConfig, q0: &PolicyField) -> Result<RunOutput> {
    let config = SolverConfig {
        algorithm: Algorithm::Spi2,
        ..config.clone()
    };
    run(problem, &config, q0)
}

fn policy_averaging(
    problem: &MfgProblem,
    config: &SolverConfig,
    q0: &PolicyField,
    algorithm: Algorithm,
    beta: &dyn Fn(usize) -> f64,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<RunOutput> {
    config.validate()?;
    check_initial_policy(problem, q0)?;
    let grid = &problem.grid;
    let mut q_bar = q0.clone();
    let mut q_current = q0.clone();
    let mut records = Vec::new();
    let mut n = 0;
    loop {
        let density = problem.forward(&q_bar)?;
        let value = problem.evaluate(&q_bar, &density)?;
        let (greedy, capped) = extract_policy_counting(&value, grid, problem.cap())?;
        let residual = sup_norm_policy_diff(&greedy, &q_current)?;
        let record = compute_residual_diagnostics(problem, n, &density, &q_bar, &greedy, residual, capped)?;
        observe(&record);
        records.push(record);

        let done = residual <= config.tolerance;
        if done || n + 1 >= config.max_iterations {
            let termination = if done {
                Termination::Converged { iterations: n + 1 }
            } else {
                Termination::MaxIterations { iterations: n + 1 }
            };
            let certification = certify_fixed_point(&value, &density, &q_bar, problem)?;
            return Ok(RunOutput {
                value,
                density,
                policy: q_bar,
                greedy,
                report: IterationReport {
                    algorithm,
                    records,
                    termination,
                    certification,
                },
            });
        }

        let target = if config.compat_discrete_step4 && algorithm == Algorithm::Spi1 {
            &q_current
        } else {
            &greedy
        };
        q_bar = blend_policy(&q_bar, target, beta(n))?;
        q_current = greedy;
        n += 1;
    }
}

fn flux_averaging(
    problem: &MfgProblem,
    config: &SolverConfig,
    q0: &PolicyField,
    observe: &mut dyn FnMut(&IterationRecord),
) -> Result<RunOutput> {
    config.validate()?;
    check_initial_policy(problem, q0)?;
    let grid = &problem.grid;
    let mut q_current = q0.clone();
    let mut averages: Option<(ScalarField, PolicyField)> = None;
    let mut records = Vec::new();
    let mut n = 0;
    loop {
        let density = problem.forward(&q_current)?;
        let w = flux(&density, &q_current)?;
        let (m_bar, w_bar, q_hat) = match averages.take() {
            None => {
                let q_hat = flux_policy(&density, &w)?;
                (density, w, q_hat)
            }
            Some((m_bar, w_bar)) => smoothing_update_flux(&m_bar, &w_bar, &density, &w, n)?,
        };
        let value = problem.evaluate(&q_hat, &m_bar)?;
        let (greedy, capped) = extract_policy_counting(&value, grid, problem.cap())?;
        let residual = sup_norm_policy_diff(&greedy, &q_current)?;
        let record = compute_residual_diagnostics(problem, n, &m_bar, &q_hat, &greedy, residual, capped)?;
        observe(&record);
        records.push(record);

        let done = residual <= config.tolerance;
        if done || n + 1 >= config.max_iterations {
            let termination = if done {
                Termination::Converged { iterations: n + 1 }
            } else {
                Termination::MaxIterations { iterations: n + 1 }
            };
            let certification = certify_fixed_point(&value, &m_bar, &q_hat, problem)?;
            return Ok(RunOutput {
                value,
                density: m_bar,
                policy: q_hat,
                greedy,
                report: IterationReport {
                    algorithm: Algorithm::Spi2,
                    records,
                    termination,
                    certification,
                },
            });
        }
        averages = Some((m_bar, w_bar));
        q_current = greedy;
        n += 1;
    }
}
