//! `drelab`: single solves, convergence studies and self-checks for the
//! Galerkin/Lie-splitting DRE solver.

mod config;
mod oracle;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use dre_core::lab::operator_norm_l2;
use dre_core::{
    build_problem, run_study, Execution, LieStepper, StructureStats, StudyConfig,
};
use log::info;
use serde_json::json;

use config::{Command, ConfigError, Layer, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "drelab", version, about = "Convergence laboratory for Galerkin/Lie-splitting Riccati solvers")]
struct Cli {
    /// solve | convergence | oracle-check | transform-check
    #[arg(long)]
    command: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    /// Comma-separated, e.g. 4,8,16
    #[arg(long = "nx-ladder")]
    nx_ladder: Option<String>,
    #[arg(long)]
    nt: Option<String>,
    /// Comma-separated powers of two
    #[arg(long = "nt-ladder")]
    nt_ladder: Option<String>,
    /// Time horizon
    #[arg(long = "T")]
    horizon: Option<String>,
    /// Stabilizing shift; positive values use the shifted scheme
    #[arg(long)]
    lambda: Option<String>,
    /// Control profile, `name[:amplitude]`
    #[arg(long)]
    xi: Option<String>,
    /// Initial-data profile, `name[:amplitude]`
    #[arg(long)]
    zeta: Option<String>,
    /// none | tau-h2
    #[arg(long)]
    coupling: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Reference mesh for convergence studies (default: finest nx)
    #[arg(long = "ref-nx")]
    ref_nx: Option<String>,
    /// Reference step count for convergence studies (default: finest nt)
    #[arg(long = "ref-nt")]
    ref_nt: Option<String>,
    /// Flat key=value file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn layer(&self) -> Result<Layer, ConfigError> {
        let mut layer = Layer::default();
        let pairs = [
            ("command", &self.command),
            ("nx", &self.nx),
            ("nx-ladder", &self.nx_ladder),
            ("nt", &self.nt),
            ("nt-ladder", &self.nt_ladder),
            ("T", &self.horizon),
            ("lambda", &self.lambda),
            ("xi", &self.xi),
            ("zeta", &self.zeta),
            ("coupling", &self.coupling),
            ("out", &self.out),
            ("ref-nx", &self.ref_nx),
            ("ref-nt", &self.ref_nt),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                layer.set(k, v.as_str())?;
            }
        }
        Ok(layer)
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Layer::parse_file(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => Layer::default(),
    };
    Ok(RunConfig::from_layer(&base.overlay(&cli.layer()?))?)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn single(ladder: &[usize], key: &str) -> Result<usize> {
    match ladder {
        [v] => Ok(*v),
        _ => anyhow::bail!("this command takes a single `{key}`, got {ladder:?}"),
    }
}

fn run_solve(c: &RunConfig) -> Result<()> {
    let nx = single(&c.nx_ladder, "nx")?;
    let nt = single(&c.nt_ladder, "nt")?;
    let problem = build_problem(nx, &c.xi, &c.zeta, c.lambda, c.horizon)?;
    let mut stepper = if c.lambda > 0.0 {
        LieStepper::new_transformed(&problem, nt, Execution::default())?
    } else {
        LieStepper::new(&problem, nt, Execution::default())?
    };
    let mfac = problem.mass_factor();
    let mut stats = StructureStats::default();
    stats.observe(stepper.current())?;
    let mut csv = String::from("# n,t,opnorm\n");
    let norm0 = operator_norm_l2(&stepper.physical(), mfac)?;
    writeln!(csv, "0,{:.16e},{:.16e}", 0.0, norm0)?;
    let mut last = norm0;
    for n in 1..=nt {
        stepper.step().with_context(|| format!("step {n}"))?;
        stats.observe(stepper.current())?;
        last = operator_norm_l2(&stepper.physical(), mfac)?;
        writeln!(csv, "{n},{:.16e},{:.16e}", n as f64 * stepper.tau(), last)?;
    }
    fs::create_dir_all(&c.out)?;
    write(&c.out, "trajectory.csv", &csv)?;
    let report = json!({
        "command": "solve",
        "nx": nx,
        "nt": nt,
        "T": c.horizon,
        "lambda": c.lambda,
        "xi": c.xi.to_string(),
        "zeta": c.zeta.to_string(),
        "final_opnorm": last,
        "structure": stats,
    });
    write(&c.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    println!("solve nx={nx} nt={nt}: final L2 operator norm {last:.6e}");
    Ok(())
}

fn run_convergence(c: &RunConfig) -> Result<()> {
    let reference = match (c.ref_nx, c.ref_nt) {
        (None, None) => None,
        (nx, nt) => {
            let tmp = StudyConfig {
                nx_ladder: c.nx_ladder.clone(),
                nt_ladder: c.nt_ladder.clone(),
                coupling: c.coupling,
                horizon: c.horizon,
                ..StudyConfig::default()
            };
            let runs = tmp.runs()?;
            let max_nx = runs.iter().map(|r| r.0).max().unwrap_or(0);
            let max_nt = runs.iter().map(|r| r.1).max().unwrap_or(0);
            Some((nx.unwrap_or(max_nx), nt.unwrap_or(max_nt)))
        }
    };
    let study = StudyConfig {
        nx_ladder: c.nx_ladder.clone(),
        nt_ladder: c.nt_ladder.clone(),
        coupling: c.coupling,
        horizon: c.horizon,
        shift: c.lambda,
        xi: c.xi,
        zeta: c.zeta,
        reference,
        execution: Execution::default(),
    };
    let report = run_study(&study)?;
    fs::create_dir_all(&c.out)?;
    write(&c.out, "errors.csv", &report.to_csv())?;
    write(&c.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    let summary = report.orders_summary();
    write(&c.out, "orders.txt", &summary)?;
    print!("{}", report.to_csv());
    print!("{summary}");
    Ok(())
}

fn run_transform_check(c: &RunConfig) -> Result<()> {
    let nx = single(&c.nx_ladder, "nx")?;
    let nt = single(&c.nt_ladder, "nt")?;
    let direct = build_problem(nx, &c.xi, &c.zeta, 0.0, c.horizon)?;
    let shifted = direct.with_shift(c.lambda)?;
    let mut diffs = Vec::new();
    for steps in [nt, 2 * nt] {
        let mut a = LieStepper::new(&direct, steps, Execution::default())?;
        let mut b = LieStepper::new_transformed(&shifted, steps, Execution::default())?;
        for _ in 0..steps {
            a.step()?;
            b.step()?;
        }
        let d = a.physical().sub(&b.physical())?;
        diffs.push(operator_norm_l2(&d, direct.mass_factor())?);
    }
    let ratio = diffs[0] / diffs[1];
    println!(
        "transform-check nx={nx} lambda={}: |direct - shifted| at T: {:.6e} (nt={nt}), {:.6e} (nt={}); ratio {ratio:.4}",
        c.lambda,
        diffs[0],
        diffs[1],
        2 * nt
    );
    fs::create_dir_all(&c.out)?;
    let report = json!({
        "command": "transform-check",
        "nx": nx,
        "nt": [nt, 2 * nt],
        "T": c.horizon,
        "lambda": c.lambda,
        "differences": diffs,
        "ratio": ratio,
    });
    write(&c.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn run_oracle_check(c: &RunConfig) -> Result<bool> {
    let checks = oracle::all();
    for ch in &checks {
        println!("[{}] {}: {:.3e} ({})", if ch.pass { "PASS" } else { "FAIL" }, ch.name, ch.value, ch.bound);
    }
    fs::create_dir_all(&c.out)?;
    let report = json!({ "command": "oracle-check", "checks": checks });
    write(&c.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    Ok(checks.iter().all(|ch| ch.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("usage error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = match config.command {
        Command::Solve => run_solve(&config).map(|_| true),
        Command::Convergence => run_convergence(&config).map(|_| true),
        Command::TransformCheck => run_transform_check(&config).map(|_| true),
        Command::OracleCheck => run_oracle_check(&config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("oracle-check: at least one check failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
