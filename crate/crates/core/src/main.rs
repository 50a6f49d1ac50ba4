use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use effdiff::config::{parse_config_with, ExperimentConfig, KEYS};
use effdiff::fields::parse_real;
use effdiff::runner::{run_convergence, run_coupling, run_simulation, run_sweep, study_summary, write_json, SweepSpec};
use effdiff::validation::run_validation;
use effdiff::{Ensemble, Error, Result};

#[derive(Parser)]
#[command(
    name = "effdiff",
    version,
    about = "Effective diffusivity of tracers and inertial particles in periodic flows"
)]
struct Cli {
    /// Worker threads; defaults to EFFDIFF_WORKERS or the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(short, long)]
    config: PathBuf,

    /// Override a configuration key, e.g. `--set sigma=0.5`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write summary.json and series.csv.
    Simulate(Common),
    /// Vary one parameter and fit power laws to the diagonal of K.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary; falls back to `sweep.parameter` in the config.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated list or `geometric:FIRST:LAST:COUNT`; falls back to `sweep.values`.
        #[arg(long)]
        values: Option<String>,
    },
    /// Strong error against a fine reference for a list of step sizes.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dts: String,
    },
    /// Distance between coupled passive and inertial paths for a list of tau.
    Coupling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        taus: String,
    },
    /// Run the built-in oracle checks; exits with 3 if any fails.
    Validate,
}

fn parse_list(field: &str, text: &str) -> Result<Vec<f64>> {
    let bad = |m: String| Error::Config { field: field.into(), message: m };
    if let Some(spec) = text.strip_prefix("geometric:") {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected geometric:FIRST:LAST:COUNT, got `{text}`")));
        }
        let first = parse_real(parts[0]).ok_or_else(|| bad(format!("bad number `{}`", parts[0])))?;
        let last = parse_real(parts[1]).ok_or_else(|| bad(format!("bad number `{}`", parts[1])))?;
        let n: usize = parts[2].parse().map_err(|_| bad(format!("bad count `{}`", parts[2])))?;
        if n < 2 || !(first > 0.0 && last > 0.0) {
            return Err(bad("need two or more positive endpoints".into()));
        }
        let ratio = (last / first).powf(1.0 / (n - 1) as f64);
        return Ok((0..n).map(|k| first * ratio.powi(k as i32)).collect());
    }
    text.split(',').map(|v| parse_real(v).ok_or_else(|| bad(format!("bad number `{}`", v.trim())))).collect()
}

/// Reads the config file, replacing any key given with `--set`.
fn load(common: &Common, extra: &[&str]) -> Result<(ExperimentConfig, Vec<(usize, String, String)>)> {
    let text = fs::read_to_string(&common.config)?;
    let mut sets = Vec::new();
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config { field: o.clone(), message: "expected KEY=VALUE".into() })?;
        let k = k.trim();
        if !KEYS.contains(&k) && !extra.iter().any(|p| k.starts_with(p)) {
            return Err(Error::Config { field: k.into(), message: "unknown key".into() });
        }
        sets.push((k.to_string(), v.trim().to_string()));
    }
    // overridden lines are blanked so that line numbers in errors still match the file
    let mut merged: Vec<String> = text
        .lines()
        .map(|line| {
            let key = line.split('#').next().unwrap_or("").split('=').next().unwrap_or("").trim();
            if sets.iter().any(|(k, _)| k == key) {
                String::new()
            } else {
                line.to_string()
            }
        })
        .collect();
    merged.extend(sets.iter().map(|(k, v)| format!("{k} = {v}")));
    parse_config_with(&merged.join("\n"), extra)
}

fn write_study(out: &Path, kind: &str, cfg: &ExperimentConfig, report: &impl serde::Serialize) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("summary.json"), &study_summary(kind, cfg, report)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ensemble = cli.workers.map(Ensemble::new).unwrap_or_default();
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, _) = load(&common, &[])?;
            let report = run_simulation(&cfg, &ensemble)?;
            report.write_outputs(&common.out)?;
            let k = &report.estimate;
            println!("K = {:?}", k.k.rows());
            println!("stderr = {:?}", k.stderr.rows());
        }
        Command::Sweep { common, param, values } => {
            let (cfg, extra) = load(&common, &["sweep."])?;
            let mut parameter = param;
            let mut list = values;
            for (line, key, value) in extra {
                match key.as_str() {
                    "sweep.parameter" => {
                        parameter.get_or_insert(value);
                    }
                    "sweep.values" => {
                        list.get_or_insert(value);
                    }
                    _ => return Err(Error::Syntax { line, message: format!("unknown key `{key}`") }),
                }
            }
            let parameter = parameter
                .ok_or_else(|| Error::Config { field: "sweep.parameter".into(), message: "missing".into() })?;
            let list = list.ok_or_else(|| Error::Config { field: "sweep.values".into(), message: "missing".into() })?;
            let spec = SweepSpec::new(cfg, &parameter, parse_list("sweep.values", &list)?);
            let report = run_sweep(&spec, &ensemble)?;
            report.write_outputs(&common.out)?;
            for (label, fit) in [("K11", report.fit_k11), ("K22", report.fit_k22)] {
                if let Some(f) = fit {
                    println!("{label} ~ {:.4} * {parameter}^{:.4} (r2 = {:.4})", f.prefactor, f.exponent, f.r_squared);
                }
            }
        }
        Command::Convergence { common, dts } => {
            let (cfg, _) = load(&common, &[])?;
            let report = run_convergence(&cfg, &parse_list("dts", &dts)?, &ensemble)?;
            write_study(&common.out, "convergence", &cfg, &report)?;
            println!("slope = {:.4}", report.slope());
        }
        Command::Coupling { common, taus } => {
            let (cfg, _) = load(&common, &[])?;
            let report = run_coupling(&cfg, &parse_list("taus", &taus)?, &ensemble)?;
            write_study(&common.out, "coupling", &cfg, &report)?;
            println!("slope = {:.4}", report.slope());
        }
        Command::Validate => {
            let checks = run_validation(&ensemble)?;
            let mut failed = false;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
                failed |= !c.passed;
            }
            if failed {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
