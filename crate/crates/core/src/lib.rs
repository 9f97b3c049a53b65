//! Smoothed policy iteration for second-order potential mean field games on
//! periodic or Neumann grids in one or two dimensions.
//!
//! ```no_run
//! use mfg_spi::{load_scenario, run, InitialPolicy, SolverConfig};
//!
//! let problem = load_scenario("test1")?.build()?;
//! let q0 = InitialPolicy::Zero.build(&problem)?;
//! let out = run(&problem, &SolverConfig::default(), &q0)?;
//! println!("{:?}", out.report.termination);
//! # Ok::<(), mfg_spi::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod ops;
pub mod output;
pub mod scenario;
pub mod spi;
pub mod steppers;

pub use coupling::{discrete_j, local_coupling, nonlocal_coupling, Coupling, CouplingSpec, Kernel, KernelMatrix, ProbeReport};
pub use error::{Error, Result};
pub use grid::{Axis, BoundaryCondition, FieldRole, GridSpec, PolicyField, ScalarField, SidePair};
pub use hamiltonian::{extract_policy, legendre_gap, running_cost, HamiltonianSpec};
pub use linalg::{solve_banded_1d, solve_sparse_5point, CsrMatrix, TridiagonalSystem};
pub use ops::{advection, divergence, laplacian, mass, sup_norm_policy_diff, two_sided_gradient};
pub use output::write_run_outputs;
pub use scenario::{load_scenario, ConfigFile, InitialPolicy, Scenario};
pub use spi::{
    certify_fixed_point, run, run_observed, run_policy_iteration, run_spi1, run_spi2, smoothing_update_flux,
    smoothing_update_policy, Algorithm, Certification, IterationRecord, IterationReport, MfgProblem, RateSchedule,
    RunOutput, SolverConfig, Termination,
};
pub use steppers::{assemble_transport_matrices, fpk_forward_sweep, hjb_backward_sweep, TransportMatrices};
