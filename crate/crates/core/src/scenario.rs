//! Scenario presets, flat key/value configuration files and initial policies.
//!
//! A configuration file holds one `key = value` pair per line; `#` starts a
//! comment. The optional `scenario` key names the preset to start from
//! (default `test1`), every other scenario key overrides one preset field:
//!
//! ```text
//! scenario = test1
//! cells = 100
//! dt = 0.01
//! ```
//!
//! Solver keys (`algorithm`, `rate`, `tol`, `max-iter`, `q0`) are accepted and
//! left to the caller.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::coupling::{Coupling, CouplingSpec, Kernel};
use crate::error::{Error, Result};
use crate::grid::{Axis, BoundaryCondition, GridSpec, PolicyField, SidePair};
use crate::hamiltonian::HamiltonianSpec;
use crate::ops::mass;
use crate::spi::MfgProblem;

/// Policy cap used by every preset.
pub const DEFAULT_CAP: f64 = 10_000.0;

/// Diffusion of the 1D presets (the 2D preset sets its own).
pub const DEFAULT_SIGMA_1D: f64 = 0.1;

pub const PRESETS: [&str; 4] = ["test1", "test2", "test3", "test2d"];

pub const SOLVER_KEYS: [&str; 5] = ["algorithm", "rate", "tol", "max-iter", "q0"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityProfile {
    /// `½(cos(πx) + 1)`
    RaisedCosine,
    Uniform,
    /// `e^{−20(x₁−0.2)²} + e^{−20(x₂−0.2)²}`
    CornerBumps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialProfile {
    Zero,
    /// `(x + shift)²`
    ShiftedSquare { shift: f64 },
    /// `a (cos 2πx₁ + cos 2πx₂)`
    CosineWells { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalProfile {
    /// `−2(e^{−10(x₁−0.8)²} + e^{−10(x₂−0.8)²})`
    CornerReward,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingProfile {
    Nonlocal {
        kernel: Kernel,
        theta: f64,
        eta: f64,
    },
    Local {
        coefficient: f64,
        exponent: f64,
        terminal: TerminalProfile,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub axes: Vec<Axis>,
    pub bc: BoundaryCondition,
    pub horizon: f64,
    pub dt: f64,
    pub sigma: f64,
    pub cap: f64,
    pub initial: DensityProfile,
    pub potential: PotentialProfile,
    pub coupling: CouplingProfile,
}

impl Scenario {
    pub fn preset(name: &str) -> Result<Scenario> {
        let line = |cells| vec![Axis::new(-1.0, 1.0, cells)];
        let sin = |eta| CouplingProfile::Nonlocal {
            kernel: Kernel::SinPi,
            theta: 1.0,
            eta,
        };
        let scenario = match name {
            "test1" | "test2" => Scenario {
                name: name.to_string(),
                axes: line(200),
                bc: BoundaryCondition::Periodic,
                horizon: 1.0,
                dt: 0.005,
                sigma: DEFAULT_SIGMA_1D,
                cap: DEFAULT_CAP,
                initial: DensityProfile::RaisedCosine,
                potential: PotentialProfile::Zero,
                coupling: sin(if name == "test1" { 0.2 } else { -0.5 }),
            },
            "test3" => Scenario {
                name: name.to_string(),
                axes: line(200),
                bc: BoundaryCondition::Neumann,
                horizon: 1.0,
                dt: 0.005,
                sigma: DEFAULT_SIGMA_1D,
                cap: DEFAULT_CAP,
                initial: DensityProfile::RaisedCosine,
                potential: PotentialProfile::ShiftedSquare { shift: 0.5 },
                coupling: CouplingProfile::Nonlocal {
                    kernel: Kernel::Gaussian { zeta: 0.2 },
                    theta: 1.0,
                    eta: 0.2,
                },
            },
            "test2d" => Scenario {
                name: name.to_string(),
                axes: vec![Axis::new(0.0, 1.0, 100), Axis::new(0.0, 1.0, 100)],
                bc: BoundaryCondition::Neumann,
                horizon: 0.5,
                dt: 0.01,
                sigma: 0.25,
                cap: DEFAULT_CAP,
                initial: DensityProfile::CornerBumps,
                potential: PotentialProfile::CosineWells { amplitude: 5.0 },
                coupling: CouplingProfile::Local {
                    coefficient: -1.5,
                    exponent: 0.8,
                    terminal: TerminalProfile::CornerReward,
                },
            },
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        Ok(scenario)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::with_horizon(self.axes.clone(), self.horizon, self.dt, self.bc)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.sigma > 0.0, "sigma must be positive"),
            (self.cap > 0.0, "cap must be positive"),
            (self.horizon > 0.0, "horizon must be positive"),
            (self.dt > 0.0, "dt must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Parameter(msg.into()));
            }
        }
        if self.initial == DensityProfile::CornerBumps && self.axes.len() != 2 {
            return Err(Error::Parameter("corner bumps need a 2D domain".into()));
        }
        Ok(())
    }

    /// Samples `m₀` and rescales it to unit mass on the grid.
    pub fn sample_initial_density(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let mut m = match self.initial {
            DensityProfile::RaisedCosine => {
                grid.sample(|x| 0.5 * ((std::f64::consts::PI * x[0]).cos() + 1.0))
            }
            DensityProfile::Uniform => vec![1.0; grid.nodes()],
            DensityProfile::CornerBumps => {
                grid.sample(|x| (-20.0 * (x[0] - 0.2).powi(2)).exp() + (-20.0 * (x[1] - 0.2).powi(2)).exp())
            }
        };
        let total = mass(grid, &m);
        if !(total > 0.0) {
            return Err(Error::Parameter("initial density has no mass on this grid".into()));
        }
        m.iter_mut().for_each(|v| *v /= total);
        Ok(m)
    }

    pub fn sample_potential(&self, grid: &GridSpec) -> Vec<f64> {
        match self.potential {
            PotentialProfile::Zero => vec![0.0; grid.nodes()],
            PotentialProfile::ShiftedSquare { shift } => grid.sample(|x| (x[0] + shift).powi(2)),
            PotentialProfile::CosineWells { amplitude } => grid.sample(|x| {
                let tau = 2.0 * std::f64::consts::PI;
                amplitude * x.iter().map(|xi| (tau * xi).cos()).sum::<f64>()
            }),
        }
    }

    fn coupling_spec(&self, grid: &GridSpec) -> CouplingSpec {
        match self.coupling {
            CouplingProfile::Nonlocal { kernel, theta, eta } => CouplingSpec::Nonlocal { kernel, theta, eta },
            CouplingProfile::Local {
                coefficient,
                exponent,
                terminal,
            } => CouplingSpec::Local {
                coefficient,
                exponent,
                terminal: match terminal {
                    TerminalProfile::Zero => vec![0.0; grid.nodes()],
                    TerminalProfile::CornerReward => grid.sample(|x| {
                        -2.0 * x.iter().map(|xi| (-10.0 * (xi - 0.8).powi(2)).exp()).sum::<f64>()
                    }),
                },
            },
        }
    }

    /// Discretizes the scenario.
    pub fn build(&self) -> Result<MfgProblem> {
        self.validate()?;
        let grid = self.grid()?;
        let m0 = self.sample_initial_density(&grid)?;
        let hamiltonian = HamiltonianSpec::new(self.sample_potential(&grid), self.cap)?;
        let coupling = Coupling::new(self.coupling_spec(&grid), &grid)?;
        MfgProblem::new(grid, self.sigma, m0, hamiltonian, coupling)
    }

    /// Applies one override key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let num = || value.parse::<f64>().map_err(|_| format!("`{key}` expects a number, got `{value}`"));
        match key {
            "cells" => {
                let cells: usize = value
                    .parse()
                    .map_err(|_| format!("`cells` expects an integer, got `{value}`"))?;
                self.axes.iter_mut().for_each(|a| a.cells = cells);
            }
            "h" => {
                let h = num()?;
                if !(h > 0.0) {
                    return Err("`h` must be positive".into());
                }
                for axis in &mut self.axes {
                    let cells = ((axis.x_max - axis.x_min) / h).round();
                    if ((cells * h - (axis.x_max - axis.x_min)) / h).abs() > 1e-9 {
                        return Err(format!("h = {h} does not divide the domain"));
                    }
                    axis.cells = cells as usize;
                }
            }
            "dt" => self.dt = num()?,
            "horizon" => self.horizon = num()?,
            "sigma" => self.sigma = num()?,
            "cap" => self.cap = num()?,
            "theta" | "eta" | "zeta" => {
                let v = num()?;
                let CouplingProfile::Nonlocal { kernel, theta, eta } = &mut self.coupling else {
                    return Err(format!("`{key}` only applies to nonlocal couplings"));
                };
                match key {
                    "theta" => *theta = v,
                    "eta" => *eta = v,
                    _ => match kernel {
                        Kernel::Gaussian { zeta } => *zeta = v,
                        Kernel::SinPi => return Err("`zeta` only applies to the Gaussian kernel".into()),
                    },
                }
            }
            "coefficient" | "exponent" => {
                let v = num()?;
                let CouplingProfile::Local {
                    coefficient, exponent, ..
                } = &mut self.coupling
                else {
                    return Err(format!("`{key}` only applies to local couplings"));
                };
                if key == "coefficient" {
                    *coefficient = v;
                } else {
                    *exponent = v;
                }
            }
            "initial" => {
                self.initial = match value {
                    "cosine" => DensityProfile::RaisedCosine,
                    "uniform" => DensityProfile::Uniform,
                    "bumps" => DensityProfile::CornerBumps,
                    _ => return Err(format!("unknown initial density `{value}`")),
                }
            }
            "bc" => {
                self.bc = match value {
                    "periodic" => BoundaryCondition::Periodic,
                    "neumann" => BoundaryCondition::Neumann,
                    _ => return Err(format!("unknown boundary condition `{value}`")),
                }
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }
}

/// Parsed `key = value` file, remembering the line of every key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<ConfigFile> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<ConfigFile> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().trim_start_matches("--").to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(err("empty key or value".into()));
            }
            if entries.insert(key.clone(), (idx + 1, value)).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Preset named by `scenario` (default `test1`) with every override applied.
    pub fn scenario(&self) -> Result<Scenario> {
        let base = self.get("scenario").unwrap_or("test1");
        let mut scenario = Scenario::preset(base)?;
        for (key, (line, value)) in &self.entries {
            if key == "scenario" || SOLVER_KEYS.contains(&key.as_str()) {
                continue;
            }
            scenario.set(key, value).map_err(|message| Error::Config {
                path: self.path.clone(),
                line: *line,
                message,
            })?;
        }
        scenario.validate()?;
        scenario.grid()?;
        Ok(scenario)
    }
}

/// Resolves a preset name, or reads a configuration file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if PRESETS.contains(&name_or_path) {
        return Scenario::preset(name_or_path);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        return ConfigFile::read(path)?.scenario();
    }
    Err(Error::UnknownScenario(name_or_path.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPolicy {
    Zero,
    /// `Q_L = Q_R = slope · x` along every axis, clipped to `[−R, R]`.
    Linear(f64),
    /// Policy CSV written by a previous run.
    File(PathBuf),
}

impl std::str::FromStr for InitialPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "zero" {
            return Ok(InitialPolicy::Zero);
        }
        if let Some(slope) = s.strip_prefix("linear:") {
            return slope
                .parse()
                .map(InitialPolicy::Linear)
                .map_err(|_| format!("bad slope in `{s}`"));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(InitialPolicy::File(PathBuf::from(path)));
        }
        Err(format!("expected zero, linear:<slope> or file:<path>, got `{s}`"))
    }
}

impl InitialPolicy {
    pub fn build(&self, problem: &MfgProblem) -> Result<PolicyField> {
        let grid = &problem.grid;
        let cap = problem.cap();
        match self {
            InitialPolicy::Zero => Ok(PolicyField::zeros(grid)),
            InitialPolicy::Linear(slope) => {
                let coords: Vec<Vec<f64>> = (0..grid.nodes()).map(|n| grid.coordinates(n)).collect();
                Ok(PolicyField::from_fn(grid, |_, node, axis| {
                    let v = (slope * coords[node][axis]).clamp(-cap, cap);
                    SidePair::new(v, v)
                }))
            }
            InitialPolicy::File(path) => crate::output::read_policy_csv(path, grid),
        }
    }
}
