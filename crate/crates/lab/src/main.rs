use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dampdecay::config::Ini;
use dampdecay::report::{read_norm_series, KeyValues, OutputDir};
use dampdecay::scenario::verify_phi;
use dampdecay::{presets, run_scenario, sweep_variants, LabError, RunOptions, RunOutcome};
use dampdecay_core::decay::fit_decay_series;
use rayon::prelude::*;

/// Decay experiments for non-linearly damped skew systems.
///
/// Exit status: 0 when every check passes, 2 when a check fails, 1 on error.
#[derive(Parser)]
#[command(name = "dampdecay", version)]
struct Cli {
    /// Scenario file (INI: `[section]` and `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in scenario; `--config` is merged on top of it.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override, e.g. `--set schedule.dt=1e-3` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default `out/<name>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write log-log SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in the scenario.
    Run,
    /// Integrate and fit the decay exponent.
    Simulate,
    /// Resolvent norm sweep and envelope fit.
    Resolvent,
    /// Weighted observability constants.
    Observability,
    /// Energy balance, monotonicity, contraction and conservation checks.
    Invariants,
    /// Sector, monotonicity and linearization of the damping map.
    VerifyPhi,
    /// Fit the decay exponent of a trajectory CSV (`t` and `norm` columns).
    FitDecay {
        #[arg(long)]
        input: PathBuf,
        /// `lo,hi`
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        predicted: Option<f64>,
    },
    /// Run every combination of `--vary key=v1,v2` in parallel.
    Sweep {
        #[arg(long, required = true)]
        vary: Vec<String>,
    },
    /// Print the built-in scenarios.
    ListPresets,
}

fn scenario_ini(cli: &Cli) -> Result<Ini, LabError> {
    let mut ini = match &cli.preset {
        Some(p) => presets::preset_ini(p)?,
        None => Ini::default(),
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        ini.merge(&Ini::parse(&text)?);
    }
    if cli.preset.is_none() && cli.config.is_none() {
        return Err(LabError::config("--config", "give --config or --preset"));
    }
    for s in &cli.set {
        ini.set(s)?;
    }
    if let Some(seed) = cli.seed {
        ini.set(&format!("scenario.seed={seed}"))?;
    }
    Ok(ini)
}

fn print_outcome(o: &RunOutcome) {
    println!("{} -> {}", o.name, o.out_dir.display());
    for c in &o.checks {
        println!("  {:<34} {:>14.6e}  {:<24} {}", c.name, c.value, c.bound, if c.pass { "PASS" } else { "FAIL" });
    }
}

fn exit(passed: bool) -> ExitCode {
    ExitCode::from(if passed { 0 } else { 2 })
}

fn run(cli: Cli) -> Result<ExitCode, LabError> {
    let opts = RunOptions { out: cli.out.clone(), svg: cli.svg };
    let only = |analysis: &str| -> Result<ExitCode, LabError> {
        let mut ini = scenario_ini(&cli)?;
        ini.set(&format!("scenario.analyses={analysis}"))?;
        let o = run_scenario(&ini, &opts)?;
        print_outcome(&o);
        Ok(exit(o.passed()))
    };
    match &cli.command {
        Command::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<26} {}", p.name, p.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run => {
            let o = run_scenario(&scenario_ini(&cli)?, &opts)?;
            print_outcome(&o);
            Ok(exit(o.passed()))
        }
        Command::Simulate => only("decay"),
        Command::Resolvent => only("resolvent"),
        Command::Observability => only("observability"),
        Command::Invariants => only("invariants"),
        Command::VerifyPhi => {
            let o = verify_phi(&scenario_ini(&cli)?, &opts)?;
            print_outcome(&o);
            Ok(exit(o.passed()))
        }
        Command::FitDecay { input, window, predicted } => {
            let text = std::fs::read_to_string(input).map_err(|e| LabError::io(input, e))?;
            let (t, n) = read_norm_series(&text)?;
            let window = window
                .as_deref()
                .map(|w| {
                    let parts: Vec<f64> = w.split(',').filter_map(|p| p.trim().parse().ok()).collect();
                    match parts[..] {
                        [a, b] => Ok((a, b)),
                        _ => Err(LabError::config("--window", "expected lo,hi")),
                    }
                })
                .transpose()?;
            let fit = || -> Result<_, dampdecay_core::Error> {
                let r = fit_decay_series(&t, &n, window)?;
                match predicted {
                    Some(p) => r.with_prediction(&t, &n, *p),
                    None => Ok(r),
                }
            };
            let r = fit().map_err(|source| LabError::Stage { stage: "fit-decay", source })?;
            let mut kv = KeyValues::default();
            kv.float("theta_hat", r.theta_hat)
                .float("stderr", r.stderr)
                .float("window_lo", r.window.0)
                .float("window_hi", r.window.1)
                .text("samples", r.samples)
                .text("underflow_truncated", r.underflow_truncated);
            if let (Some(p), Some(s), Some(tail)) = (r.predicted, r.sup_scaled, r.tail_scaled) {
                kv.float("predicted", p).float("sup_scaled", s).float("tail_scaled", tail);
            }
            print!("{}", kv.to_csv());
            if let Some(dir) = &cli.out {
                let mut out = OutputDir::create(dir)?;
                out.write("decay_report.csv", &kv.to_csv())?;
                out.finish()?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { vary } => {
            let base = scenario_ini(&cli)?;
            let name = base.get("scenario.name").unwrap_or("scenario").to_string();
            let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(format!("{name}-sweep")));
            let variants = sweep_variants(&base, vary, &root)?;
            let outcomes = variants
                .par_iter()
                .map(|(ini, dir)| run_scenario(ini, &RunOptions { out: Some(dir.clone()), svg: cli.svg }))
                .collect::<Result<Vec<_>, _>>()?;
            for o in &outcomes {
                print_outcome(o);
            }
            Ok(exit(outcomes.iter().all(RunOutcome::passed)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
