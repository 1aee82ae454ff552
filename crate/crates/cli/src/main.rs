use clap::{Args, Parser, Subcommand};
use octa::central_config::cc_solve;
use octa::dynamics::Configuration;
use octa::verify::{alpha0, homothetic_bound, kepler_homothetic_action, verify_orbit};
use octa_cli::{
    parse_csv, read_file, report_value, run_pipeline, sig15, write_csv, write_file, CliError, RunConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "octa", version, about = "Symmetric periodic orbit of the octahedral six-body problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the action, refine, verify and write the orbit and report.
    Minimize(MinimizeArgs),
    /// Verify an orbit file and print the report.
    Verify {
        orbit: PathBuf,
        /// Also write the report to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve the central-configuration system.
    Cc {
        #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], default_values_t = [0.3, 0.5, 0.9])]
        start: Vec<f64>,
    },
    /// Independent oracles.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long)]
    period: Option<f64>,
    /// Cells of the fundamental segment.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    mesh_p: Option<f64>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Oracle {
    /// Numerical homothetic action against α₀τ^{1/3}.
    Kepler {
        #[arg(long)]
        g: f64,
        #[arg(long)]
        tau: f64,
    },
    /// Homothetic action bound on [0, T/6].
    Bound {
        #[arg(long = "T", alias = "period")]
        period: f64,
    },
}

fn run_config(args: &MinimizeArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = read_file(path)?;
        cfg.apply_file(path, &text)?;
    }
    if let Some(v) = args.period {
        cfg.period = v;
    }
    if let Some(v) = args.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = args.mesh_p {
        cfg.mesh_p = v;
    }
    if let Some(v) = args.grad_tol {
        cfg.grad_tol = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &args.report {
        cfg.report = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json renders") + "\n"
}

fn cmd_minimize(args: &MinimizeArgs) -> Result<ExitCode, CliError> {
    let cfg = run_config(args)?;
    let out = run_pipeline(&cfg)?;
    write_file(&cfg.out, &write_csv(&out.orbit))?;
    write_file(&cfg.report, &pretty(&out.report_json(&cfg)))?;
    eprintln!(
        "action {} energy {} gradient {:e}; {} written",
        sig15(out.minimize.action),
        sig15(out.orbit.energy),
        out.minimize.gradient_inf_norm,
        cfg.out.display()
    );
    if out.verification.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed checks: {}", out.verification.failures().join(", "));
        Ok(ExitCode::from(1))
    }
}

fn cmd_verify(path: &PathBuf, report: &Option<PathBuf>) -> Result<ExitCode, CliError> {
    let text = read_file(path)?;
    let orbit = parse_csv(&path.display().to_string(), &text)?;
    let rep = verify_orbit(&orbit)?;
    let json = pretty(&report_value(&rep));
    print!("{json}");
    if let Some(p) = report {
        write_file(p, &json)?;
    }
    if rep.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed checks: {}", rep.failures().join(", "));
        Ok(ExitCode::from(1))
    }
}

fn cmd_cc(start: &[f64]) -> Result<ExitCode, CliError> {
    let c = Configuration::new(start[0], start[1], start[2])?;
    let sol = cc_solve(&c)?;
    println!("X = ({}, {}, {})", sig15(sol.config.x), sig15(sol.config.y), sig15(sol.config.z));
    println!("lambda = {}", sig15(sol.lambda));
    println!("residual = {:e}", sol.residual_norm);
    println!("iterations = {}", sol.iterations);
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(o: &Oracle) -> Result<ExitCode, CliError> {
    match *o {
        Oracle::Kepler { g, tau } => {
            if !(g > 0.0 && tau > 0.0) {
                return Err(CliError::Usage("g and tau must be positive".into()));
            }
            println!("kepler_action = {}", sig15(kepler_homothetic_action(g, tau)?));
            println!("alpha0_tau = {}", sig15(alpha0(g) * tau.cbrt()));
        }
        Oracle::Bound { period } => {
            if !(period > 0.0) {
                return Err(CliError::Usage("T must be positive".into()));
            }
            println!("bound = {}", sig15(homothetic_bound(period)));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Minimize(args) => cmd_minimize(args),
        Command::Verify { orbit, report } => cmd_verify(orbit, report),
        Command::Cc { start } => cmd_cc(start),
        Command::Oracle(o) => cmd_oracle(o),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
