//! Configuration, orbit files and the minimize → refine → verify pipeline
//! behind the `octa` command.

use octa::action::{minimize, perturbed_homothetic_seed, MinimizeOptions, MinimizeReport};
use octa::dynamics::{hamiltonian, Configuration, State};
use octa::ode::OdeOptions;
use octa::regularize::{refined_orbit, RefineReport};
use octa::symmetry::PeriodicOrbit;
use octa::verify::{verify_orbit, VerificationReport};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CSV_HEADER: &str = "t,x,y,z,vx,vy,vz,H";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{0}")]
    Io(String),
    #[error("computation failed: {0}")]
    Compute(#[from] octa::Error),
}

impl CliError {
    /// 2 for usage, parse and I/O problems, 1 for failed computations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub period: f64,
    /// Cells of the fundamental segment; the orbit has six times as many samples.
    pub nodes: usize,
    pub mesh_p: f64,
    pub grad_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub seed: u64,
    /// Relative amplitude of the seed perturbation.
    pub noise: f64,
    pub out: PathBuf,
    pub report: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            period: 6.0,
            nodes: 1024,
            mesh_p: 1.5,
            grad_tol: 1e-8,
            rtol: 1e-13,
            atol: 1e-14,
            seed: 0,
            noise: 0.01,
            out: PathBuf::from("orbit.csv"),
            report: PathBuf::from("report.json"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value '{value}' for {key}"))
}

impl RunConfig {
    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "period" => self.period = parse_value(key, value)?,
            "nodes" => self.nodes = parse_value(key, value)?,
            "mesh_p" => self.mesh_p = parse_value(key, value)?,
            "grad_tol" => self.grad_tol = parse_value(key, value)?,
            "rtol" => self.rtol = parse_value(key, value)?,
            "atol" => self.atol = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "noise" => self.noise = parse_value(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "report" => self.report = PathBuf::from(value),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies a `key = value` file; blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, path: &Path, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Parse { path: path.display().to_string(), line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            self.set(k.trim(), v.trim()).map_err(err)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad(format!("period must be positive, got {}", self.period));
        }
        if self.nodes < 16 {
            return bad(format!("nodes must be at least 16, got {}", self.nodes));
        }
        if !(self.mesh_p.is_finite() && self.mesh_p >= 1.0) {
            return bad(format!("mesh_p must be at least 1, got {}", self.mesh_p));
        }
        if !(self.grad_tol > 0.0) {
            return bad(format!("grad_tol must be positive, got {}", self.grad_tol));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("integrator tolerances must be positive".into());
        }
        if !(self.noise >= 0.0 && self.noise < 0.5) {
            return bad(format!("noise must lie in [0, 0.5), got {}", self.noise));
        }
        Ok(())
    }

    /// Cell counts doubling from 256 up to `nodes`.
    pub fn mesh_schedule(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut c = 256;
        while c < self.nodes {
            out.push(c);
            c *= 2;
        }
        out.push(self.nodes);
        out
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..OdeOptions::default() }
    }
}

/// Writes the orbit with one row per sample. Collision rows carry the orbit
/// energy in the `H` column.
pub fn write_csv(orbit: &PeriodicOrbit) -> String {
    let mut out = String::with_capacity(orbit.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (t, s) in orbit.times.iter().zip(&orbit.samples) {
        let h = if s.config.is_collision() { orbit.energy } else { hamiltonian(s) };
        let row = [
            *t,
            s.config.x,
            s.config.y,
            s.config.z,
            s.velocity[0],
            s.velocity[1],
            s.velocity[2],
            h,
        ];
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses an orbit file. The period is recovered from the sample at `T/3`,
/// which sits at one third of the rows; the energy from the first row.
pub fn parse_csv(path: &str, text: &str) -> Result<PeriodicOrbit, CliError> {
    let err = |line: usize, msg: String| CliError::Parse { path: path.to_string(), line, msg };
    let mut lines = text.lines();
    match lines.next().map(|l| l.trim_end_matches('\r')) {
        Some(CSV_HEADER) => {}
        Some(other) => return Err(err(1, format!("expected header '{CSV_HEADER}', found '{other}'"))),
        None => return Err(err(1, "missing header".into())),
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    let mut energy = f64::NAN;
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        let fields: Vec<&str> = raw.trim_end_matches('\r').split(',').collect();
        if fields.len() != 8 {
            return Err(err(line, format!("expected 8 fields, found {}", fields.len())));
        }
        let mut v = [0.0; 8];
        for (k, f) in fields.iter().enumerate() {
            v[k] = f
                .trim()
                .parse()
                .map_err(|_| err(line, format!("invalid number '{f}' in column {}", k + 1)))?;
        }
        let config = Configuration::new(v[1], v[2], v[3]).map_err(|e| err(line, e.to_string()))?;
        if let Some(&prev) = times.last() {
            if !(v[0] > prev) {
                return Err(err(line, format!("time {} does not increase", v[0])));
            }
        } else {
            if v[0] != 0.0 {
                return Err(err(line, format!("first sample must be at t = 0, found {}", v[0])));
            }
            energy = v[7];
        }
        times.push(v[0]);
        samples.push(State::new(config, [v[4], v[5], v[6]]));
    }
    let n = times.len();
    if n == 0 || n % 6 != 0 {
        return Err(err(n + 2, format!("file ends after {n} samples; expected a positive multiple of 6")));
    }
    let period = 3.0 * times[n / 3];
    Ok(PeriodicOrbit { period, times, samples, energy })
}

pub fn report_value(report: &VerificationReport) -> Value {
    serde_json::to_value(report).expect("report serializes")
}

/// Everything produced by one pipeline run.
pub struct PipelineOutput {
    pub orbit: PeriodicOrbit,
    pub minimize: MinimizeReport,
    pub refine: RefineReport,
    pub verification: VerificationReport,
}

impl PipelineOutput {
    pub fn report_json(&self, cfg: &RunConfig) -> Value {
        json!({
            "period": cfg.period,
            "nodes": cfg.nodes,
            "mesh_p": cfg.mesh_p,
            "seed": cfg.seed,
            "action": self.minimize.action,
            "gradient_inf_norm": self.minimize.gradient_inf_norm,
            "iterations": self.minimize.iterations,
            "termination": format!("{:?}", self.minimize.termination),
            "energy": self.orbit.energy,
            "refinement": self.refine,
            "verification": report_value(&self.verification),
            "checks": self.verification.checks,
            "pass": self.verification.all_pass(),
        })
    }
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput, CliError> {
    cfg.validate()?;
    let schedule = cfg.mesh_schedule();
    let seed = perturbed_homothetic_seed(cfg.period, schedule[0], cfg.mesh_p, cfg.noise, cfg.seed)?;
    let opts = MinimizeOptions {
        grad_tol: cfg.grad_tol,
        mesh_schedule: schedule,
        mesh_p: cfg.mesh_p,
        ..MinimizeOptions::default()
    };
    let (seg, minimize) = minimize(&seed, &opts)?;
    let (orbit, refine) = refined_orbit(&seg, &cfg.ode_options())?;
    let verification = verify_orbit(&orbit)?;
    Ok(PipelineOutput { orbit, minimize, refine, verification })
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Fixed-point rendering with 15 significant digits.
pub fn sig15(v: f64) -> String {
    if !v.is_finite() || v == 0.0 {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{v:.14e}");
    }
    format!("{:.*}", (14 - mag).max(0) as usize, v)
}
