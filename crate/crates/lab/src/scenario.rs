//! build -> simulate -> analyze -> report for one scenario.
//!
//! Random data come from ChaCha8 seeded with `scenario.seed`: stream 0 draws
//! the initial phases, stream 1 the second state of pair checks, stream 2 the
//! resolvent probes. Parallel stages collect in input order, so outputs do not
//! depend on the worker count.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dampdecay_core::decay::{
    contraction_check, derivative_monotonicity_check, entry_time, fit_decay_exponent, truncation_horizon,
};
use dampdecay_core::initial::{critical_data, smooth_data};
use dampdecay_core::integrator::{energy_balance_residual, integrate};
use dampdecay_core::model::{build_scole_fem, build_wave_modal, check_multiplier_condition, MultiplierConfig, Profile};
use dampdecay_core::spectral::{
    eigen_gap, fit_envelope, observability_constant, resolvent_grid, resolvent_norm, spectral_abscissa,
    wavepacket_margin, ResolventMethod,
};
use dampdecay_core::{DampedSystem, Method, Nonlinearity, Schedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Analysis, Ini, InitialKind, ModelSpec, ScenarioConfig};
use crate::report::{checks_csv, loglog_svg, trajectory_csv, Check, KeyValues, OutputDir};
use crate::{stage, LabError};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub svg: bool,
}

pub struct RunOutcome {
    pub name: String,
    pub out_dir: PathBuf,
    pub checks: Vec<Check>,
    /// Key-value reports by file name.
    pub reports: BTreeMap<String, KeyValues>,
    /// `(file, sha256)` as listed in the manifest.
    pub files: Vec<(String, String)>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn value(&self, file: &str, key: &str) -> Option<f64> {
        self.reports.get(file)?.get(key)?.parse().ok()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn build_system(model: &ModelSpec) -> Result<DampedSystem, LabError> {
    match model {
        ModelSpec::Wave { .. } => build_wave_modal(&model.wave_config().unwrap_or_else(|| unreachable!())),
        ModelSpec::Scole { .. } => build_scole_fem(&model.scole_config().unwrap_or_else(|| unreachable!())),
    }
    .map_err(stage("model"))
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn initial_state(system: &DampedSystem, kind: InitialKind, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LabError> {
    let phases: Vec<f64> = (0..system.dim() / 2).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    match kind {
        InitialKind::Critical => critical_data(system, &phases),
        InitialKind::Smooth(p) => smooth_data(system, p, &phases),
    }
    .map_err(stage("initial data"))
}

/// `|phi(u)| / |u|` at `|u| = 1e-8`: the gain the truncation horizon uses.
fn small_signal_gain(phi: &Nonlinearity, d: usize) -> f64 {
    let mut u = vec![0.0; d];
    u[0] = 1e-8;
    phi.eval(&u).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt() / 1e-8).unwrap_or(0.0)
}

/// `0.05`, `1e-10`: whichever reads shorter.
fn short(v: f64) -> String {
    let (plain, sci) = (format!("{v}"), format!("{v:e}"));
    if plain.len() <= sci.len() {
        plain
    } else {
        sci
    }
}

fn band(v: f64, lo: Option<f64>, hi: Option<f64>) -> (bool, String) {
    let ok = lo.is_none_or(|l| v >= l) && hi.is_none_or(|h| v <= h);
    let text = match (lo, hi) {
        (Some(l), Some(h)) => format!("[{}; {}]", short(l), short(h)),
        (Some(l), None) => format!(">= {}", short(l)),
        (None, Some(h)) => format!("<= {}", short(h)),
        (None, None) => "recorded".into(),
    };
    (ok, text)
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    system: DampedSystem,
    phi: Nonlinearity,
    x0: Vec<f64>,
    out: OutputDir,
    svg: bool,
    checks: Vec<Check>,
    reports: BTreeMap<String, KeyValues>,
}

impl Run<'_> {
    fn report(&mut self, file: &str, kv: KeyValues) -> Result<(), LabError> {
        self.out.write(file, &kv.to_csv())?;
        self.reports.insert(file.to_string(), kv);
        Ok(())
    }

    fn model_checks(&mut self) -> Result<(), LabError> {
        let mut kv = KeyValues::default();
        kv.text("label", self.system.label()).text("dim", self.system.dim()).text("input_dim", self.system.input_dim());
        let skew = self.system.skewness_residual();
        kv.float("skewness_residual", skew);
        if let Some(eig) = self.system.eigen_data() {
            for (j, w) in eig.block_frequencies().iter().take(5).enumerate() {
                kv.float(format!("frequency_{}", j + 1), *w);
            }
        }
        if let Some(tol) = self.cfg.checks.skew_tol {
            self.checks.push(Check::new("skewness_residual", skew, format!("<= {}", short(tol)), skew <= tol));
        }
        if let (Some((slope, a, b)), Some(beam)) = (self.cfg.checks.multiplier, self.cfg.model.scole_config()) {
            let mult = MultiplierConfig { zeta: Profile::Affine { offset: 0.0, slope }, a, b, grid_points: 1001 };
            let rep = check_multiplier_condition(&beam, &mult).map_err(stage("multiplier check"))?;
            kv.float("multiplier_mass_slack", rep.mass_slack)
                .float("multiplier_stiffness_slack", rep.stiffness_slack)
                .text("multiplier_pass", rep.pass);
            let worst = rep.mass_slack.max(rep.stiffness_slack);
            self.checks.push(Check::new("multiplier_inequalities", worst, "< 0", rep.pass));
        }
        self.report("model_report.csv", kv)
    }

    fn decay(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let spec = &cfg.decay;
        let traj =
            integrate(&self.system, &self.phi, &self.x0, &cfg.schedule, cfg.method).map_err(stage("simulate"))?;
        self.out.write("trajectory.csv", &trajectory_csv(&traj))?;
        let predicted = spec.predicted.unwrap_or(0.5 / cfg.model.rate_beta());
        let mut rep = fit_decay_exponent(&traj, spec.window)
            .and_then(|r| r.with_prediction(&traj.times, &traj.norms, predicted))
            .map_err(stage("fit-decay"))?;
        let gain = small_signal_gain(&self.phi, self.system.input_dim());
        let horizon = truncation_horizon(&self.system, gain).map_err(stage("fit-decay"))?;
        rep.past_horizon = rep.window.1 > horizon;
        let (sup, tail) = (rep.sup_scaled.unwrap_or(0.0), rep.tail_scaled.unwrap_or(0.0));

        let mut kv = KeyValues::default();
        kv.float("theta_hat", rep.theta_hat)
            .float("stderr", rep.stderr)
            .float("window_lo", rep.window.0)
            .float("window_hi", rep.window.1)
            .text("samples", rep.samples)
            .float("predicted", predicted)
            .float("sup_scaled", sup)
            .float("tail_scaled", tail)
            .text("underflow_truncated", rep.underflow_truncated)
            .float("truncation_horizon", horizon)
            .text("past_horizon", rep.past_horizon)
            .float("entry_delta", spec.entry_delta)
            .text("entry_time", entry_time(&traj, spec.entry_delta).map_or("none".into(), crate::report::num))
            .float("max_norm_increase", traj.max_norm_increase);

        let (ok, bound) = band(rep.theta_hat, spec.theta_min, spec.theta_max);
        self.checks.push(Check::new("theta_hat", rep.theta_hat, bound, ok));
        self.checks.push(Check::new(
            "window_inside_truncation_horizon",
            rep.window.1,
            format!("<= {horizon:.6e}"),
            !rep.past_horizon,
        ));
        if let Some(s) = spec.sharpness_min {
            let ratio = if sup > 0.0 { tail / sup } else { 0.0 };
            self.checks.push(Check::new("tail_over_sup", ratio, format!(">= {}", short(s)), ratio >= s));
        }
        if let Some(other) = &spec.compare_phi {
            let phi2 = other.build("decay.compare_phi")?;
            let traj2 = integrate(&self.system, &phi2, &self.x0, &cfg.schedule, cfg.method)
                .map_err(stage("simulate (reference)"))?;
            let theta2 = fit_decay_exponent(&traj2, spec.window).map_err(stage("fit-decay (reference)"))?.theta_hat;
            let diff = (rep.theta_hat - theta2).abs();
            kv.text("reference_phi", &other.name).float("theta_reference", theta2).float("theta_difference", diff);
            self.checks.push(Check::new(
                "theta_difference",
                diff,
                format!("<= {}", short(spec.compare_tol)),
                diff <= spec.compare_tol,
            ));
        }
        if self.svg {
            let k0 = traj.times.partition_point(|t| *t < rep.window.0).min(traj.len() - 1);
            let svg = loglog_svg(
                &format!("{}: |x(t)|, fitted theta = {:.4}", cfg.name, rep.theta_hat),
                "t",
                "|x(t)|",
                &traj.times,
                &traj.norms,
                Some((-predicted, traj.times[k0], traj.norms[k0])),
            );
            self.out.write("decay.svg", &svg)?;
        }
        self.report("decay_report.csv", kv)
    }

    fn resolvent(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let spec = &cfg.resolvent;
        let sys = &self.system;
        let (grid, fit_hi) =
            resolvent_grid(sys, spec.s_min, spec.s_max, spec.grid_density).map_err(stage("resolvent grid"))?;
        let values = grid
            .par_iter()
            .map(|s| resolvent_norm(sys, spec.kappa, *s, ResolventMethod::Woodbury))
            .collect::<Result<Vec<_>, _>>()
            .map_err(stage("resolvent"))?;
        let norms: Vec<f64> = values.iter().map(|v| v.norm).collect();
        let mut fallbacks = values.iter().filter(|v| v.fell_back).count();
        let curve = fit_envelope(&grid, &norms, spec.kappa, (spec.s_min, fit_hi), |s| {
            let v = resolvent_norm(sys, spec.kappa, s, ResolventMethod::Woodbury)?;
            fallbacks += v.fell_back as usize;
            Ok(v.norm)
        })
        .map_err(stage("resolvent envelope fit"))?;
        let mut csv = String::from("s,norm\n");
        for (s, n) in grid.iter().zip(&norms) {
            csv.push_str(&format!("{},{}\n", crate::report::num(*s), crate::report::num(*n)));
        }
        self.out.write("resolvent.csv", &csv)?;

        let abscissa = spectral_abscissa(sys, spec.kappa).map_err(stage("spectral abscissa"))?;
        let gap = eigen_gap(sys).map_err(stage("eigen gap"))?;
        let margin_beta = spec.margin_beta.unwrap_or(cfg.model.rate_beta());
        let margin = wavepacket_margin(sys, margin_beta).map_err(stage("wavepacket margin"))?;
        let mut kv = KeyValues::default();
        kv.float("kappa", spec.kappa)
            .float("envelope_slope", curve.envelope_slope)
            .float("slope_stderr", curve.slope_stderr)
            .text("peaks", curve.peaks.len())
            .float("fit_lo", spec.s_min)
            .float("fit_hi", fit_hi)
            .text("grid_points", grid.len())
            .text("fallbacks", fallbacks)
            .float("spectral_abscissa", abscissa)
            .float("eigen_gap", gap)
            .float("margin_beta", margin_beta)
            .float("wavepacket_margin", margin);
        let (ok, bound) = band(curve.envelope_slope, spec.slope_min, spec.slope_max);
        self.checks.push(Check::new("envelope_slope", curve.envelope_slope, bound, ok));
        self.checks.push(Check::new("spectral_abscissa", abscissa, "< 0", abscissa < 0.0));

        if spec.probes > 0 {
            let mut r = rng(cfg.seed, 2);
            let pairs: Vec<(f64, f64)> =
                (0..spec.probes).map(|_| (r.random_range(spec.s_min..fit_hi), r.random_range(0.1..5.0))).collect();
            let diffs = pairs
                .par_iter()
                .map(|(s, k)| {
                    let w = resolvent_norm(sys, *k, *s, ResolventMethod::Woodbury)?;
                    let d = resolvent_norm(sys, *k, *s, ResolventMethod::Dense)?;
                    Ok(((w.norm - d.norm) / d.norm).abs())
                })
                .collect::<Result<Vec<f64>, dampdecay_core::Error>>()
                .map_err(stage("resolvent probes"))?;
            let worst = diffs.iter().copied().fold(0.0, f64::max);
            kv.text("probes", spec.probes).float("probe_max_relative_difference", worst);
            self.checks.push(Check::new(
                "woodbury_vs_dense",
                worst,
                format!("<= {}", short(spec.probe_tol)),
                worst <= spec.probe_tol,
            ));
        }
        if self.svg {
            let guide = curve.peaks.first().map(|(s, n)| (2.0 * margin_beta, *s, *n));
            let svg = loglog_svg(
                &format!("{}: resolvent norm, envelope slope = {:.3}", cfg.name, curve.envelope_slope),
                "s",
                "|(is - A_k)^-1|",
                &grid,
                &norms,
                guide,
            );
            self.out.write("resolvent.svg", &svg)?;
        }
        self.report("resolvent_fit.csv", kv)
    }

    fn observability(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let spec = &cfg.observability;
        let beta = spec.beta.unwrap_or(cfg.model.rate_beta());
        let systems: Vec<(usize, DampedSystem)> = match (&cfg.model, spec.modes.is_empty()) {
            (ModelSpec::Wave { beta: b, coeffs, .. }, false) => spec
                .modes
                .iter()
                .map(|n| Ok((*n, build_system(&ModelSpec::Wave { beta: *b, modes: *n, coeffs: coeffs.clone() })?)))
                .collect::<Result<_, LabError>>()?,
            _ => vec![(self.system.dim() / 2, self.system.clone())],
        };
        let reports = systems
            .par_iter()
            .map(|(_, s)| observability_constant(s, spec.tau, beta))
            .collect::<Result<Vec<_>, _>>()
            .map_err(stage("observability"))?;
        let mut kv = KeyValues::default();
        kv.float("tau", spec.tau).float("beta", beta);
        for ((n, _), r) in systems.iter().zip(&reports) {
            kv.float(format!("c_tau_N{n}"), r.c_tau)
                .float(format!("gap_N{n}"), r.gap)
                .text(format!("n_used_N{n}"), r.n_used)
                .text(format!("ingham_N{n}"), r.ingham);
        }
        let (first, last) = (reports[0].c_tau, reports[reports.len() - 1].c_tau);
        self.checks.push(Check::new("c_tau_first_positive", first, "> 0", first > 0.0));
        if reports.len() > 1 {
            let ratio = last / first;
            self.checks.push(Check::new(
                "c_tau_last_over_first",
                ratio,
                format!(">= {}", short(spec.ratio_min)),
                ratio >= spec.ratio_min,
            ));
        }
        let ingham = reports.iter().all(|r| r.ingham);
        self.checks.push(Check::new("tau_above_ingham_threshold", spec.tau, "> 2 pi / gap", ingham));
        self.report("observability.csv", kv)
    }

    fn invariants(&mut self) -> Result<(), LabError> {
        let cfg = self.cfg;
        let spec = &cfg.invariants;
        let base = Schedule { t_end: spec.t_end, dt: spec.dt, sample_stride: 1, substep_tol: cfg.schedule.substep_tol };
        let sched = base.with_samples(200);
        let half = Schedule { dt: 0.5 * spec.dt, sample_stride: 2 * sched.sample_stride, ..sched };
        let (sys, phi, x0) = (&self.system, &self.phi, &self.x0);
        let n0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();

        let traj = integrate(sys, phi, x0, &sched, Method::Strang).map_err(stage("invariants: simulate"))?;
        let traj_half = integrate(sys, phi, x0, &half, Method::Strang).map_err(stage("invariants: simulate dt/2"))?;
        let r1 = energy_balance_residual(&traj).max_abs / (n0 * n0);
        let r2 = energy_balance_residual(&traj_half).max_abs / (n0 * n0);
        let halving = r1 / r2;

        let own = if cfg.method == Method::Strang {
            traj.clone()
        } else {
            integrate(sys, phi, x0, &sched, cfg.method).map_err(stage("invariants: simulate"))?
        };
        let norm_increase = own.max_norm_increase / n0;
        let xdot0 = own.xdot_norms.first().copied().unwrap_or(0.0);
        let xdot_increase = derivative_monotonicity_check(&own) / xdot0;

        let xb = initial_state(sys, cfg.initial, &mut rng(cfg.seed, 1))?;
        let pair =
            contraction_check(sys, phi, x0, &xb, &sched, cfg.method).map_err(stage("invariants: contraction"))?;
        let drift = pair.max_increase / pair.initial_distance;

        let free = integrate(&sys.undamped(), &Nonlinearity::Identity, x0, &sched, cfg.method)
            .map_err(stage("invariants: undamped"))?;
        let conservation = free.norms.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max) / n0;

        let mut kv = KeyValues::default();
        kv.float("t_end", spec.t_end)
            .float("dt", spec.dt)
            .float("energy_residual", r1)
            .float("energy_residual_half_dt", r2)
            .float("halving_ratio", halving)
            .float("max_norm_increase", norm_increase)
            .float("max_xdot_increase", xdot_increase)
            .float("pair_initial_distance", pair.initial_distance)
            .float("pair_max_increase", drift)
            .float("undamped_norm_drift", conservation);
        self.checks.push(Check::new(
            "energy_residual",
            r1,
            format!("<= {}", short(spec.energy_tol)),
            r1 <= spec.energy_tol,
        ));
        self.checks.push(Check::new(
            "energy_halving_ratio",
            halving,
            format!(">= {}", short(spec.halving_min)),
            halving >= spec.halving_min,
        ));
        self.checks.push(Check::new(
            "norm_monotone",
            norm_increase,
            format!("<= {}", short(spec.norm_tol)),
            norm_increase <= spec.norm_tol,
        ));
        self.checks.push(Check::new(
            "xdot_monotone",
            xdot_increase,
            format!("<= {}", short(spec.xdot_tol)),
            xdot_increase <= spec.xdot_tol,
        ));
        self.checks.push(Check::new(
            "pair_contraction",
            drift,
            format!("<= {}", short(spec.contraction_tol)),
            drift <= spec.contraction_tol,
        ));
        self.checks.push(Check::new(
            "undamped_conservation",
            conservation,
            format!("<= {}", short(spec.conservation_tol)),
            conservation <= spec.conservation_tol,
        ));
        self.report("invariants.csv", kv)
    }
}

/// Run every selected analysis and write the output directory.
pub fn run_scenario(ini: &Ini, opts: &RunOptions) -> Result<RunOutcome, LabError> {
    let cfg = ScenarioConfig::from_ini(ini)?;
    let out_dir =
        opts.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let mut out = OutputDir::create(&out_dir)?;
    out.write("config.ini", &ini.to_text())?;
    let system = build_system(&cfg.model)?;
    let phi = cfg.phi.build("phi.name")?;
    let x0 = initial_state(&system, cfg.initial, &mut rng(cfg.seed, 0))?;
    let mut run = Run { cfg: &cfg, system, phi, x0, out, svg: opts.svg, checks: Vec::new(), reports: BTreeMap::new() };
    run.model_checks()?;
    for a in &cfg.analyses {
        match a {
            Analysis::Decay => run.decay()?,
            Analysis::Resolvent => run.resolvent()?,
            Analysis::Observability => run.observability()?,
            Analysis::Invariants => run.invariants()?,
        }
    }
    run.out.write("checks.csv", &checks_csv(&run.checks))?;
    let files = run.out.finish()?;
    Ok(RunOutcome { name: cfg.name.clone(), out_dir, checks: run.checks, reports: run.reports, files })
}

/// Sector, monotonicity and linearization of the configured damping map,
/// written to `phi_report.csv`.
pub fn verify_phi(ini: &Ini, opts: &RunOptions) -> Result<RunOutcome, LabError> {
    use dampdecay_core::nonlinearity::{fit_linearization, verify_monotone, verify_sector};
    let cfg = ScenarioConfig::from_ini(ini)?;
    let out_dir =
        opts.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let mut out = OutputDir::create(&out_dir)?;
    out.write("config.ini", &ini.to_text())?;
    let phi = cfg.phi.build("phi.name")?;
    let d = match cfg.model {
        ModelSpec::Wave { .. } => 1,
        ModelSpec::Scole { .. } => 2,
    };
    let sector = verify_sector(&phi, d, 1.0, 1e3, 4000).map_err(stage("verify-phi: sector"))?;
    let mono = verify_monotone(&phi, d, 20_000).map_err(stage("verify-phi: monotone"))?;
    let mut kv = KeyValues::default();
    kv.text("phi", &phi)
        .text("input_dim", d)
        .float("sector_c_small", sector.c_small)
        .float("sector_c_large", sector.c_large)
        .float("lipschitz_near_zero", sector.lipschitz_delta)
        .float("min_monotone_pairing", mono.min_pairing)
        .text("monotone_pairs", mono.pairs)
        .text("monotone_violated", mono.violated);
    // the linearization only exists for radial maps; other maps just skip it
    if let Ok(lin) = fit_linearization(&phi, 1e-2) {
        kv.float("linear_gain", lin.kappa).float("remainder_exponent", lin.gamma).float("remainder_constant", lin.c);
    }
    let checks = vec![
        Check::new("sector_small", sector.c_small, "> 0", sector.c_small > 0.0),
        Check::new("sector_large", sector.c_large, "> 0", sector.c_large > 0.0),
        Check::new("monotone", mono.min_pairing, "no certified violation", !mono.violated),
    ];
    out.write("phi_report.csv", &kv.to_csv())?;
    out.write("checks.csv", &checks_csv(&checks))?;
    let files = out.finish()?;
    let reports = BTreeMap::from([("phi_report.csv".to_string(), kv)]);
    Ok(RunOutcome { name: cfg.name, out_dir, checks, reports, files })
}
