//! `funnelctl run | check | list`

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use funnelsim::scenarios::{self, catalog, load_scenario, Config};
use funnelsim::sim::{write_csv, Termination};
use funnelsim::Error;

#[derive(Parser)]
#[command(name = "funnelctl", about = "Run and check funnel-control experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a scenario or config, write CSV and a JSON report.
    Run(RunArgs),
    /// Validate a scenario or config without integrating.
    Check(Source),
    /// List built-in scenarios.
    List,
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Run every built-in scenario concurrently; `--out` and `--report` name directories.
    #[arg(long, conflicts_with_all = ["scenario", "config"])]
    all: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

const OK: u8 = 0;
const BREACH: u8 = 2;
const INVALID: u8 = 3;
const INTEGRATION: u8 = 4;
const IO: u8 = 5;

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => IO,
        Error::IntegrationFailure(_) | Error::InsufficientHistory { .. } | Error::Pole => INTEGRATION,
        _ => INVALID,
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::FunnelBreach { value, .. } | Error::DomainViolation { norm: value } => format!(
            "initial condition violates the funnel rule phi(0)|e(0)| < 1 (got {value}); {e}"
        ),
        _ => e.to_string(),
    }
}

fn load(src: &Source) -> Result<Config, Error> {
    match (&src.scenario, &src.config) {
        (Some(name), None) => load_scenario(name),
        (None, Some(path)) => Config::load(path),
        _ => Err(Error::Config("give exactly one of --scenario or --config".into())),
    }
}

fn apply_overrides(cfg: &mut Config, a: &RunArgs) {
    if let Some(v) = a.rtol {
        cfg.sim.rtol = v;
    }
    if let Some(v) = a.atol {
        cfg.sim.atol = v;
    }
    if let Some(v) = a.t_end {
        cfg.sim.t_end = v;
    }
    if let Some(v) = a.seed {
        cfg.sim.seed = v;
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>) -> Result<(), Error> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    f(&mut w)?;
    w.flush().map_err(io)
}

/// Runs one config; returns the exit code and the lines to print.
fn run_one(cfg: &Config, csv: Option<&Path>, report: Option<&Path>) -> (u8, Vec<String>) {
    let name = if cfg.name.is_empty() { "config" } else { &cfg.name };
    let out = match scenarios::run(cfg) {
        Ok(o) => o,
        Err(e) => return (error_code(&e), vec![format!("{name}: error: {}", describe(&e))]),
    };
    let mut lines: Vec<String> = out.warnings.iter().map(|w| format!("{name}: warning: {w}")).collect();
    let csv = csv.map(Path::to_path_buf).or_else(|| cfg.output.csv_path.clone());
    let report_path = report.map(Path::to_path_buf).or_else(|| cfg.output.report_path.clone());
    if let Some(p) = &csv {
        if let Err(e) = write_file(p, |w| write_csv(&out.trajectory, w)) {
            return (IO, vec![format!("{name}: error: {e}")]);
        }
    }
    let json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    if let Some(p) = &report_path {
        let res = write_file(p, |w| writeln!(w, "{json}").map_err(|e| Error::Io(e.to_string())));
        if let Err(e) = res {
            return (IO, vec![format!("{name}: error: {e}")]);
        }
    }
    let r = &out.report;
    lines.push(format!(
        "{name}: termination {:?}, eps_observed {:?}, gain_max {:?}, input_sup {:.6e}, {} samples, {:.3}s",
        r.termination, r.eps_observed, r.gain_max, r.input_sup, r.samples, r.wall_time_s
    ));
    for c in &r.checks {
        lines.push(format!(
            "{name}:   {} {} (value {:.3e}, bound {:.3e})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        ));
    }
    let code = match r.termination {
        Termination::Completed if r.all_passed() => OK,
        Termination::Completed => INTEGRATION,
        Termination::MinStepReached(_) => BREACH,
        Termination::GuardUnsatisfiableAtStart => INVALID,
    };
    (code, lines)
}

fn cmd_run(a: &RunArgs) -> u8 {
    if !a.all {
        let mut cfg = match load(&a.source) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return error_code(&e);
            }
        };
        apply_overrides(&mut cfg, a);
        let (code, lines) = run_one(&cfg, a.out.as_deref(), a.report.as_deref());
        for l in lines {
            println!("{l}");
        }
        return code;
    }
    for dir in [&a.out, &a.report].into_iter().flatten() {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: {}: {e}", dir.display());
            return IO;
        }
    }
    let configs: Vec<Config> = catalog()
        .into_iter()
        .map(|s| {
            let mut c = s.config;
            apply_overrides(&mut c, a);
            c
        })
        .collect();
    let results: Vec<(u8, Vec<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let csv = a.out.as_ref().map(|d| d.join(format!("{}.csv", cfg.name)));
                let rep = a.report.as_ref().map(|d| d.join(format!("{}.json", cfg.name)));
                scope.spawn(move || run_one(cfg, csv.as_deref(), rep.as_deref()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
    });
    let mut worst = OK;
    for (code, lines) in results {
        for l in lines {
            println!("{l}");
        }
        worst = worst.max(code);
    }
    worst
}

fn cmd_check(src: &Source) -> u8 {
    let cfg = match load(src) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return INVALID;
        }
    };
    match scenarios::check(&cfg) {
        Ok(rep) => {
            for (i, f) in rep.funnels.iter().enumerate() {
                println!(
                    "funnel {}: in class, growth constant estimate {:.4}, bounded {}",
                    i + 1,
                    f.lipschitz_constant_estimate,
                    f.bounded
                );
            }
            if let Some(fe) = &rep.feasibility {
                println!(
                    "feasibility: cb*u_hat = {:.6} vs required {:.6} -> {}; saturation-free start {}",
                    fe.lhs,
                    fe.rhs,
                    if fe.feasible { "feasible" } else { "infeasible" },
                    fe.saturation_free
                );
            }
            for w in &rep.warnings {
                println!("warning: {w}");
            }
            if rep.feasibility.as_ref().is_some_and(|f| !f.feasible) {
                return INVALID;
            }
            println!("ok");
            OK
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            INVALID
        }
    }
}

fn cmd_list() -> u8 {
    let cat = catalog();
    let width = cat.iter().map(|s| s.config.name.len()).max().unwrap_or(0);
    for s in &cat {
        println!("{:width$}  {}: {}", s.config.name, s.capability, s.config.description);
    }
    OK
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Check(s) => cmd_check(s),
        Cmd::List => cmd_list(),
    };
    ExitCode::from(code)
}
