//! CSV and JSON writers for run results. Floats are written with 17
//! significant digits so that every value round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolicyField, ScalarField, SidePair};
use crate::spi::{RunOutput, Termination};

pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const DENSITY_FILE: &str = "fields_M.csv";
pub const VALUE_FILE: &str = "fields_U.csv";
pub const POLICY_FILE: &str = "policy.csv";
pub const CERTIFICATION_FILE: &str = "certification.json";

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn node_header(grid: &GridSpec) -> &'static str {
    if grid.dim() == 1 {
        "i"
    } else {
        "i,j"
    }
}

fn node_columns(grid: &GridSpec, node: usize) -> String {
    let shape = grid.shape();
    if grid.dim() == 1 {
        node.to_string()
    } else {
        format!("{},{}", node % shape[0], node / shape[0])
    }
}

pub fn residuals_csv(output: &RunOutput) -> String {
    let mut s = String::from("n,linf_policy_diff,a_n,J0,mass_drift,min_density\n");
    for r in &output.report.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.n,
            fmt_float(r.linf_policy_diff),
            fmt_float(r.a_n),
            fmt_float(r.j0.unwrap_or(f64::NAN)),
            fmt_float(r.mass_drift),
            fmt_float(r.min_density)
        );
    }
    s
}

/// Long format: one row per `(tau, node)`.
pub fn field_csv(grid: &GridSpec, field: &ScalarField) -> String {
    let mut s = format!("tau,{},value\n", node_header(grid));
    for (tau, level) in field.iter_levels().enumerate() {
        for (node, v) in level.iter().enumerate() {
            let _ = writeln!(s, "{tau},{},{}", node_columns(grid, node), fmt_float(*v));
        }
    }
    s
}

pub fn policy_csv(policy: &PolicyField) -> String {
    let mut s = String::from("tau,node,axis,q_left,q_right\n");
    let dim = policy.dim();
    for tau in 0..policy.levels() {
        for (k, p) in policy.level(tau).iter().enumerate() {
            let _ = writeln!(
                s,
                "{tau},{},{},{},{}",
                k / dim,
                k % dim,
                fmt_float(p.left),
                fmt_float(p.right)
            );
        }
    }
    s
}

/// Reads a policy written by [`policy_csv`]; every entry must be present.
pub fn read_policy_csv(path: &Path, grid: &GridSpec) -> Result<PolicyField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut q = PolicyField::zeros(grid);
    let mut seen = vec![false; q.levels() * q.nodes() * q.dim()];
    let err = |line: usize, message: String| Error::Config {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(err(idx + 1, format!("expected 5 columns, got {}", cols.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(idx + 1, format!("bad index `{s}`")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(idx + 1, format!("bad number `{s}`")));
        let (tau, node, axis) = (int(cols[0])?, int(cols[1])?, int(cols[2])?);
        if tau >= q.levels() || node >= q.nodes() || axis >= q.dim() {
            return Err(err(idx + 1, "entry outside the grid".into()));
        }
        q.set(tau, node, axis, SidePair::new(num(cols[3])?, num(cols[4])?));
        seen[(tau * q.nodes() + node) * q.dim() + axis] = true;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(Error::Config {
            path: path.to_path_buf(),
            line: 0,
            message: format!("policy file misses entry {k}"),
        });
    }
    Ok(q)
}

/// `certification.json`, with the caller's configuration echoed under `config`.
pub fn certification_json(output: &RunOutput, config: &[(String, String)]) -> String {
    let c = &output.report.certification;
    let (status, iterations) = match output.report.termination {
        Termination::Converged { iterations } => ("converged", iterations),
        Termination::MaxIterations { iterations } => ("max_iterations", iterations),
    };
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"policy_consistency\": {},", json_float(c.policy_consistency));
    let _ = writeln!(s, "  \"fpk_residual\": {},", json_float(c.fpk_residual));
    let _ = writeln!(s, "  \"hjb_residual\": {},", json_float(c.hjb_residual));
    let _ = writeln!(s, "  \"termination\": {},", json_string(status));
    let _ = writeln!(s, "  \"iterations\": {iterations},");
    let _ = writeln!(
        s,
        "  \"final_linf_policy_diff\": {},",
        json_float(output.report.final_residual())
    );
    s.push_str("  \"config\": {");
    for (k, (key, value)) in config.iter().enumerate() {
        let sep = if k == 0 { "\n" } else { ",\n" };
        let _ = write!(s, "{sep}    {}: {}", json_string(key), json_string(value));
    }
    s.push_str(if config.is_empty() { "}\n}\n" } else { "\n  }\n}\n" });
    s
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_run_outputs(dir: &Path, grid: &GridSpec, output: &RunOutput, config: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join(RESIDUALS_FILE), &residuals_csv(output))?;
    write(&dir.join(DENSITY_FILE), &field_csv(grid, &output.density))?;
    write(&dir.join(VALUE_FILE), &field_csv(grid, &output.value))?;
    write(&dir.join(POLICY_FILE), &policy_csv(&output.policy))?;
    write(&dir.join(CERTIFICATION_FILE), &certification_json(output, config))
}
