use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mfg_spi::scenario::PRESETS;
use mfg_spi::{
    load_scenario, output, run_observed, Algorithm, ConfigFile, Error, InitialPolicy, RateSchedule, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Spi1,
    Spi2,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RateArg {
    #[value(name = "2n")]
    Two,
    #[value(name = "1n")]
    One,
}

/// Smoothed policy iteration for potential mean field games.
#[derive(Debug, Parser)]
#[command(name = "mfg-spi", version)]
struct Args {
    /// Preset (test1, test2, test3, test2d) or a key = value config file
    #[arg(long, default_value = "test1")]
    scenario: String,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    /// SPI1 learning rate: 2/(n+2) or 1/(n+2)
    #[arg(long, value_enum)]
    rate: Option<RateArg>,
    /// Stopping tolerance on the greedy policy update
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// zero, linear:<slope> or file:<path>
    #[arg(long)]
    q0: Option<String>,
    /// Directory receiving residuals.csv, fields_*.csv, policy.csv and certification.json
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the coupling monotonicity probe
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Average in the previous greedy policy in the SPI1 smoothing step
    #[arg(long)]
    compat_discrete_step4: bool,
}

const PROBE_TRIALS: usize = 200;

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn config_value<'a>(cfg: Option<&'a ConfigFile>, key: &str) -> Option<(&'a ConfigFile, usize, &'a str)> {
    cfg.and_then(|c| c.entries.get(key).map(|(line, v)| (c, *line, v.as_str())))
}

fn bad_value(c: &ConfigFile, line: usize, key: &str, value: &str) -> Error {
    Error::Config {
        path: c.path.clone(),
        line,
        message: format!("bad value `{value}` for `{key}`"),
    }
}

/// Flag, then config file key, then default.
fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: Option<&ConfigFile>, key: &str, default: T) -> Result<T, Error> {
    match (flag, config_value(cfg, key)) {
        (Some(v), _) => Ok(v),
        (None, Some((c, line, v))) => v.parse().map_err(|_| bad_value(c, line, key, v)),
        (None, None) => Ok(default),
    }
}

fn pick_enum<T: ValueEnum>(flag: Option<T>, cfg: Option<&ConfigFile>, key: &str, default: T) -> Result<T, Error> {
    match (flag, config_value(cfg, key)) {
        (Some(v), _) => Ok(v),
        (None, Some((c, line, v))) => T::from_str(v, false).map_err(|_| bad_value(c, line, key, v)),
        (None, None) => Ok(default),
    }
}

fn execute(args: &Args) -> Result<bool, Error> {
    let scenario = load_scenario(&args.scenario)?;
    let cfg = if PRESETS.contains(&args.scenario.as_str()) {
        None
    } else {
        Some(ConfigFile::read(args.scenario.as_ref())?)
    };
    let cfg = cfg.as_ref();

    let algorithm = pick_enum(args.algorithm, cfg, "algorithm", AlgorithmArg::Spi1)?;
    let rate = pick_enum(args.rate, cfg, "rate", RateArg::Two)?;
    let config = SolverConfig {
        algorithm: match algorithm {
            AlgorithmArg::Spi1 => Algorithm::Spi1,
            AlgorithmArg::Spi2 => Algorithm::Spi2,
            AlgorithmArg::Pi => Algorithm::PolicyIteration,
        },
        rate: match rate {
            RateArg::Two => RateSchedule::TwoOverNPlus2,
            RateArg::One => RateSchedule::OneOverNPlus2,
        },
        tolerance: pick(args.tol, cfg, "tol", SolverConfig::default().tolerance)?,
        max_iterations: pick(args.max_iter, cfg, "max-iter", SolverConfig::default().max_iterations)?,
        compat_discrete_step4: args.compat_discrete_step4,
    };
    config.validate()?;
    let q0_text = pick(args.q0.clone(), cfg, "q0", "zero".to_string())?;
    let q0_spec: InitialPolicy = q0_text.parse().map_err(Error::Parameter)?;

    let problem = scenario.build()?;
    let q0 = q0_spec.build(&problem)?;
    let grid = &problem.grid;
    println!(
        "scenario {} | shape {:?} | T = {} | dt = {} | sigma = {} | {:?}",
        scenario.name,
        grid.shape(),
        grid.horizon(),
        grid.dt(),
        problem.sigma,
        config.algorithm
    );
    let probe = problem.coupling.monotonicity_probe(grid, PROBE_TRIALS, args.seed)?;
    println!(
        "monotonicity probe: min pairing {:.3e} over {} trials ({})",
        probe.min_pairing,
        probe.trials,
        if probe.is_monotone() { "monotone" } else { "not monotone" }
    );

    let out = run_observed(&problem, &config, &q0, &mut |r| {
        let j0 = r.j0.map_or("n/a".to_string(), |j| format!("{j:.10e}"));
        println!(
            "n = {:4}  dQ = {:.3e}  a_n = {:.3e}  J0 = {}  mass_drift = {:.1e}  min_m = {:.3e}  capped = {}",
            r.n, r.linf_policy_diff, r.a_n, j0, r.mass_drift, r.min_density, r.capped
        );
    })?;
    let c = out.report.certification;
    println!(
        "{:?}; certification: policy {:.3e}, fpk {:.3e}, hjb {:.3e}",
        out.report.termination, c.policy_consistency, c.fpk_residual, c.hjb_residual
    );

    if let Some(dir) = &args.out {
        let echo = vec![
            ("scenario".to_string(), args.scenario.clone()),
            ("algorithm".to_string(), format!("{:?}", config.algorithm)),
            ("rate".to_string(), format!("{:?}", config.rate)),
            ("tol".to_string(), config.tolerance.to_string()),
            ("max-iter".to_string(), config.max_iterations.to_string()),
            ("q0".to_string(), q0_text),
            ("seed".to_string(), args.seed.to_string()),
            ("compat-discrete-step4".to_string(), config.compat_discrete_step4.to_string()),
            ("sigma".to_string(), problem.sigma.to_string()),
            ("dt".to_string(), grid.dt().to_string()),
            ("horizon".to_string(), grid.horizon().to_string()),
            ("shape".to_string(), format!("{:?}", grid.shape())),
        ];
        output::write_run_outputs(dir, grid, &out, &echo)?;
    }
    Ok(out.report.termination.converged())
}
