//! Mean field couplings, their potentials and the discrete energy `J_τ'`.
//!
//! Nonlocal couplings are convolutions with a kernel `l` against the piecewise
//! constant density: `(f_h[M])_i = θ Σ_j vol · l(x_i − x_j) M_j`. The local
//! coupling is the power law `c m^κ` with a fixed terminal cost `g_T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolicyField, ScalarField};
use crate::hamiltonian::{running_cost, HamiltonianSpec};
use crate::ops::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `l(z) = sin(πz)`, odd
    SinPi,
    /// `l(z) = exp(−ζ|z|²)`, even
    Gaussian { zeta: f64 },
}

impl Kernel {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Kernel::SinPi => (std::f64::consts::PI * z).sin(),
            Kernel::Gaussian { zeta } => (-zeta * z * z).exp(),
        }
    }

    pub fn is_even(&self) -> bool {
        matches!(self, Kernel::Gaussian { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    Nonlocal {
        kernel: Kernel,
        theta: f64,
        eta: f64,
    },
    /// `f̃(m) = c m^κ`, terminal condition `u_T = g_T`.
    Local {
        coefficient: f64,
        exponent: f64,
        terminal: Vec<f64>,
    },
}

impl CouplingSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CouplingSpec::Nonlocal {
                kernel: Kernel::Gaussian { zeta },
                ..
            } if !(*zeta > 0.0) => Err(Error::Parameter(format!("Gaussian ζ must be positive, got {zeta}"))),
            CouplingSpec::Local { exponent, .. } if !(*exponent > 0.0) => {
                Err(Error::Parameter(format!("local exponent κ must be positive, got {exponent}")))
            }
            _ => Ok(()),
        }
    }
}

/// Precomputed `l((i−j)h)` values, one table of offsets per axis.
///
/// In 2D only separable kernels are supported (the Gaussian factorizes along
/// the axes).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    shape: Vec<usize>,
    tables: Vec<Vec<f64>>,
    volume: f64,
}

impl KernelMatrix {
    pub fn new(kernel: Kernel, grid: &GridSpec) -> Result<Self> {
        if grid.dim() > 1 && !kernel.is_even() {
            return Err(Error::Unsupported(
                "the sin(πz) kernel is only defined in one dimension".into(),
            ));
        }
        let shape = grid.shape().to_vec();
        let tables = shape
            .iter()
            .enumerate()
            .map(|(axis, &n)| {
                let h = grid.h(axis);
                (0..2 * n - 1)
                    // in 2D the Gaussian factorizes: exp(−ζ(z₀² + z₁²)) = Π exp(−ζ z_k²)
                    .map(|k| kernel.eval((k as f64 - (n as f64 - 1.0)) * h))
                    .collect()
            })
            .collect();
        Ok(KernelMatrix {
            shape,
            tables,
            volume: grid.cell_volume(),
        })
    }

    /// `l((i−j)h)` for 1D node indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let n = self.shape[0];
        self.tables[0][i + n - 1 - j]
    }

    /// `Σ_j vol · l(x_i − x_j) M_j` for every node `i`.
    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        match self.shape.len() {
            1 => {
                let n = self.shape[0];
                let table = &self.tables[0];
                (0..n)
                    .map(|i| {
                        // table[i + n − 1 − j] = l((i − j)h)
                        table[i..i + n].iter().rev().zip(m).map(|(l, mj)| l * mj).sum::<f64>() * self.volume
                    })
                    .collect()
            }
            _ => {
                let (n0, n1) = (self.shape[0], self.shape[1]);
                let (t0, t1) = (&self.tables[0], &self.tables[1]);
                // convolve along axis 0, then along axis 1
                let mut tmp = vec![0.0; n0 * n1];
                for j1 in 0..n1 {
                    for i0 in 0..n0 {
                        tmp[i0 + n0 * j1] = (0..n0)
                            .map(|j0| t0[i0 + n0 - 1 - j0] * m[j0 + n0 * j1])
                            .sum();
                    }
                }
                let mut out = vec![0.0; n0 * n1];
                for i1 in 0..n1 {
                    for i0 in 0..n0 {
                        out[i0 + n0 * i1] = (0..n1)
                            .map(|j1| t1[i1 + n1 - 1 - j1] * tmp[i0 + n0 * j1])
                            .sum::<f64>()
                            * self.volume;
                    }
                }
                out
            }
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.tables
            .iter()
            .all(|t| (0..t.len()).all(|k| (t[k] - t[t.len() - 1 - k]).abs() <= tol))
    }

    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        self.tables
            .iter()
            .all(|t| (0..t.len()).all(|k| (t[k] + t[t.len() - 1 - k]).abs() <= tol))
    }
}

/// `weight · Σ_j vol · l((i−j)h) M_j`
pub fn nonlocal_coupling(m: &[f64], kernel: &KernelMatrix, weight: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    grid.check_level(m.len())?;
    Ok(kernel.apply(m).into_iter().map(|v| weight * v).collect())
}

/// `c m^κ` per node.
pub fn local_coupling(m: &[f64], coefficient: f64, exponent: f64) -> Result<Vec<f64>> {
    m.iter()
        .enumerate()
        .map(|(node, &v)| {
            if v < 0.0 || v.is_nan() {
                Err(Error::NegativeDensity { node, value: v })
            } else {
                Ok(coefficient * v.powf(exponent))
            }
        })
        .collect()
}

/// Coupling bound to a grid, with its kernel table built once.
#[derive(Debug, Clone)]
pub struct Coupling {
    spec: CouplingSpec,
    kernel: Option<(Kernel, KernelMatrix)>,
}

impl Coupling {
    pub fn new(spec: CouplingSpec, grid: &GridSpec) -> Result<Self> {
        spec.validate()?;
        let kernel = match &spec {
            CouplingSpec::Nonlocal { kernel, .. } => Some((*kernel, KernelMatrix::new(*kernel, grid)?)),
            CouplingSpec::Local { terminal, .. } => {
                grid.check_level(terminal.len())?;
                None
            }
        };
        Ok(Coupling { spec, kernel })
    }

    pub fn spec(&self) -> &CouplingSpec {
        &self.spec
    }

    /// `f_h[M]` for one density level.
    pub fn running(&self, m: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
        match (&self.spec, &self.kernel) {
            (CouplingSpec::Nonlocal { theta, .. }, Some((_, table))) => nonlocal_coupling(m, table, *theta, grid),
            (CouplingSpec::Local { coefficient, exponent, .. }, _) => {
                grid.check_level(m.len())?;
                local_coupling(m, *coefficient, *exponent)
            }
            _ => unreachable!("nonlocal couplings always carry a table"),
        }
    }

    /// Terminal condition `U_T`: `g_h[M_T]`, or the fixed `g_T` of a local coupling.
    pub fn terminal(&self, m: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
        match (&self.spec, &self.kernel) {
            (CouplingSpec::Nonlocal { eta, .. }, Some((_, table))) => nonlocal_coupling(m, table, *eta, grid),
            (CouplingSpec::Local { terminal, .. }, _) => Ok(terminal.clone()),
            _ => unreachable!("nonlocal couplings always carry a table"),
        }
    }

    /// Running coupling evaluated on every level of `m`.
    pub fn running_field(&self, m: &ScalarField, grid: &GridSpec) -> Result<ScalarField> {
        let levels = m
            .iter_levels()
            .map(|level| self.running(level, grid))
            .collect::<Result<Vec<_>>>()?;
        ScalarField::from_levels(levels, crate::grid::FieldRole::Value)
    }

    /// Running potential `F_h[M]`.
    pub fn potential_running(&self, m: &[f64], grid: &GridSpec) -> Result<f64> {
        match &self.spec {
            CouplingSpec::Nonlocal { theta, .. } => self.quadratic_potential(m, *theta, grid),
            CouplingSpec::Local {
                coefficient,
                exponent,
                ..
            } => local_potential(m, *coefficient, *exponent, grid),
        }
    }

    /// Terminal potential `G_h[M_T]`; linear `vol Σ g_T M` for the local coupling.
    pub fn potential_terminal(&self, m: &[f64], grid: &GridSpec) -> Result<f64> {
        match &self.spec {
            CouplingSpec::Nonlocal { eta, .. } => self.quadratic_potential(m, *eta, grid),
            CouplingSpec::Local { terminal, .. } => {
                grid.check_level(m.len())?;
                Ok(grid.cell_volume() * dot(terminal, m))
            }
        }
    }

    fn quadratic_potential(&self, m: &[f64], weight: f64, grid: &GridSpec) -> Result<f64> {
        grid.check_level(m.len())?;
        if weight == 0.0 {
            return Ok(0.0);
        }
        let (kernel, table) = self.kernel.as_ref().expect("nonlocal coupling has a table");
        if !kernel.is_even() {
            return Err(Error::UnsupportedPotential(
                "an odd kernel does not derive from a quadratic potential",
            ));
        }
        // ½ w Σ_i Σ_j vol² l((i−j)h) M_j M_i
        Ok(0.5 * weight * grid.cell_volume() * dot(m, &table.apply(m)))
    }

    /// `vol · Σ_i (f[m] − f[m'])_i (m − m')_i` minimized over random density pairs.
    pub fn monotonicity_probe(&self, grid: &GridSpec, trials: usize, seed: u64) -> Result<ProbeReport> {
        if trials == 0 {
            return Err(Error::Parameter("monotonicity probe needs at least one trial".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.nodes();
        let mut min_pairing = f64::INFINITY;
        for _ in 0..trials {
            let mut sample = || -> Vec<f64> {
                let mut m: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let mass = crate::ops::mass(grid, &m);
                m.iter_mut().for_each(|v| *v /= mass);
                m
            };
            let (a, b) = (sample(), sample());
            let fa = self.running(&a, grid)?;
            let fb = self.running(&b, grid)?;
            let pairing = grid.cell_volume()
                * fa.iter()
                    .zip(&fb)
                    .zip(a.iter().zip(&b))
                    .map(|((x, y), (p, q))| (x - y) * (p - q))
                    .sum::<f64>();
            min_pairing = min_pairing.min(pairing);
        }
        Ok(ProbeReport { trials, min_pairing })
    }
}

fn local_potential(m: &[f64], coefficient: f64, exponent: f64, grid: &GridSpec) -> Result<f64> {
    grid.check_level(m.len())?;
    let k1 = exponent + 1.0;
    let mut sum = 0.0;
    for (node, &v) in m.iter().enumerate() {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeDensity { node, value: v });
        }
        sum += coefficient * v.powf(k1) / k1;
    }
    Ok(grid.cell_volume() * sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub trials: usize,
    pub min_pairing: f64,
}

impl ProbeReport {
    /// Nonnegative pairings (up to rounding) are consistent with crowd aversion.
    pub fn is_monotone(&self) -> bool {
        self.min_pairing >= -1e-12
    }
}

/// `J_τ' = Σ_{τ=τ'}^{T} Δt (Σ_i vol M_{τ,i}(½|Q_{τ,i,±}|² + V_i) + F_h[M_τ]) + G_h[M_T]`.
///
/// The policy has levels `0..T−1`; the kinetic term of level `T` reuses `Q_{T−1}`.
pub fn discrete_j(
    m: &ScalarField,
    q: &PolicyField,
    tau_start: usize,
    coupling: &Coupling,
    hamiltonian: &HamiltonianSpec,
    grid: &GridSpec,
) -> Result<f64> {
    m.check_grid(grid)?;
    q.check_grid(grid)?;
    let t = grid.time_steps();
    if tau_start > t {
        return Err(Error::IndexOutOfRange { index: tau_start, max: t });
    }
    let dim = grid.dim();
    let vol = grid.cell_volume();
    let v = hamiltonian.potential();
    let mut total = 0.0;
    for tau in tau_start..=t {
        let level = m.level(tau);
        let policy = q.level(tau.min(t - 1));
        let kinetic: f64 = level
            .iter()
            .enumerate()
            .map(|(i, mi)| mi * running_cost(&policy[i * dim..(i + 1) * dim], v[i]))
            .sum();
        total += grid.dt() * (vol * kinetic + coupling.potential_running(level, grid)?);
    }
    Ok(total + coupling.potential_terminal(m.level(t), grid)?)
}
