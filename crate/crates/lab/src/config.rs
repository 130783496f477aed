//! Flat `key = value` scenario files with `[section]` headers.
//!
//! Keys are addressed as `section.key` (also by `--set`). Later sources
//! override earlier ones: preset, then `--config`, then `--set`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use dampdecay_core::model::{Profile, ScoleConfig, WaveModelConfig};
use dampdecay_core::nonlinearity::RadialProfile;
use dampdecay_core::{Method, Nonlinearity, Schedule};

use crate::LabError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    entries: BTreeMap<String, String>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini, LabError> {
        let mut ini = Ini::default();
        let mut section = String::from("scenario");
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                section = name
                    .strip_suffix(']')
                    .ok_or_else(|| LabError::config(format!("line {}", no + 1), "unterminated section header"))?
                    .trim()
                    .to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(format!("line {}", no + 1), "expected `key = value`"))?;
            ini.entries.insert(format!("{section}.{}", k.trim()), v.trim().to_string());
        }
        Ok(ini)
    }

    pub fn merge(&mut self, other: &Ini) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Apply `section.key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<(), LabError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| LabError::config(assignment, "--set expects section.key=value"))?;
        let k = k.trim();
        if !k.contains('.') {
            return Err(LabError::config(k, "--set keys are written section.key"));
        }
        self.entries.insert(k.to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Canonical text form, sections in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (k, v) in &self.entries {
            let (section, key) = k.split_once('.').unwrap_or(("scenario", k));
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }
}

/// Typed access that remembers which keys were consumed.
struct Reader<'a> {
    ini: &'a Ini,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, key: &str) -> Option<&'a str> {
        self.used.insert(key.to_string());
        self.ini.get(key).filter(|v| !v.is_empty() && *v != "none")
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, LabError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| LabError::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, LabError> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Vec<T>, LabError> {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| LabError::config(key, format!("cannot parse `{s}`"))))
                .collect(),
        }
    }

    fn pair(&mut self, key: &str) -> Result<Option<(f64, f64)>, LabError> {
        let v: Vec<f64> = self.list(key)?;
        match v.len() {
            0 => Ok(None),
            2 => Ok(Some((v[0], v[1]))),
            _ => Err(LabError::config(key, "expected two comma-separated numbers")),
        }
    }

    fn finish(self) -> Result<(), LabError> {
        match self.ini.entries.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(LabError::config(k, "unknown key")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Analysis {
    Decay,
    Resolvent,
    Observability,
    Invariants,
}

impl std::str::FromStr for Analysis {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "decay" => Ok(Analysis::Decay),
            "resolvent" => Ok(Analysis::Resolvent),
            "observability" => Ok(Analysis::Observability),
            "invariants" => Ok(Analysis::Invariants),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Wave { beta: f64, modes: usize, coeffs: Option<Vec<f64>> },
    Scole { elements: usize, ei: f64, rho: f64, tip_mass: f64, tip_inertia: f64 },
}

impl ModelSpec {
    pub fn wave_config(&self) -> Option<WaveModelConfig> {
        match self {
            ModelSpec::Wave { beta, modes, coeffs } => {
                Some(WaveModelConfig { beta: *beta, coeffs: coeffs.clone(), modes: *modes })
            }
            _ => None,
        }
    }

    pub fn scole_config(&self) -> Option<ScoleConfig> {
        match self {
            ModelSpec::Scole { elements, ei, rho, tip_mass, tip_inertia } => Some(ScoleConfig {
                ei: Profile::Constant(*ei),
                rho: Profile::Constant(*rho),
                tip_mass: *tip_mass,
                tip_inertia: *tip_inertia,
                elements: *elements,
            }),
            _ => None,
        }
    }

    /// Exponent the decay rate `1/(2 beta)` refers to (1 for the beam).
    pub fn rate_beta(&self) -> f64 {
        match self {
            ModelSpec::Wave { beta, .. } => *beta,
            ModelSpec::Scole { .. } => 1.0,
        }
    }
}

/// Damping map by name: identity, gain, tanh, saturation, power, deadzone,
/// cubic, polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pub name: String,
    pub param: Option<f64>,
    pub coeffs: Vec<f64>,
}

impl PhiSpec {
    pub fn named(name: &str) -> Self {
        PhiSpec { name: name.to_string(), param: None, coeffs: Vec::new() }
    }

    pub fn build(&self, key: &str) -> Result<Nonlinearity, LabError> {
        let need =
            |what: &str| self.param.ok_or_else(|| LabError::config(key, format!("`{}` needs {what}", self.name)));
        Ok(match self.name.as_str() {
            "identity" => Nonlinearity::Identity,
            "gain" => Nonlinearity::LinearGain(need("param = gain")?),
            "tanh" => Nonlinearity::tanh(),
            "saturation" => Nonlinearity::Radial(RadialProfile::Saturation(self.param.unwrap_or(1.0))),
            "power" => Nonlinearity::Radial(RadialProfile::Power(need("param = exponent")?)),
            "deadzone" => Nonlinearity::Radial(RadialProfile::Deadzone(need("param = width")?)),
            "cubic" => Nonlinearity::cubic(),
            "polynomial" if !self.coeffs.is_empty() => {
                Nonlinearity::Radial(RadialProfile::Polynomial(self.coeffs.clone()))
            }
            other => return Err(LabError::config(key, format!("unknown nonlinearity `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    /// Tail energy above mode `j` equal to `w_j^-2`.
    Critical,
    /// Block amplitudes `(j + 1)^-exponent`.
    Smooth(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecaySpec {
    pub window: Option<(f64, f64)>,
    pub predicted: Option<f64>,
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    /// Require `tail_scaled >= sharpness_min * sup_scaled`.
    pub sharpness_min: Option<f64>,
    /// Rerun with this map and compare exponents.
    pub compare_phi: Option<PhiSpec>,
    pub compare_tol: f64,
    pub entry_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSpec {
    pub kappa: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub grid_density: usize,
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    /// Random `(s, kappa)` probes comparing the Woodbury and dense routes.
    pub probes: usize,
    pub probe_tol: f64,
    pub margin_beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilitySpec {
    pub tau: f64,
    pub beta: Option<f64>,
    /// Truncations to evaluate (wave only); empty means the configured model.
    pub modes: Vec<usize>,
    /// Require `c_tau(last) >= ratio_min * c_tau(first) > 0`.
    pub ratio_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSpec {
    pub t_end: f64,
    pub dt: f64,
    pub energy_tol: f64,
    pub halving_min: f64,
    pub norm_tol: f64,
    pub xdot_tol: f64,
    pub contraction_tol: f64,
    pub conservation_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelChecks {
    pub skew_tol: Option<f64>,
    /// `(zeta slope, a, b)` for the beam multiplier inequalities with `zeta(x) = slope x`.
    pub multiplier: Option<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub analyses: Vec<Analysis>,
    pub model: ModelSpec,
    pub checks: ModelChecks,
    pub phi: PhiSpec,
    pub initial: InitialKind,
    pub schedule: Schedule,
    pub method: Method,
    pub decay: DecaySpec,
    pub resolvent: ResolventSpec,
    pub observability: ObservabilitySpec,
    pub invariants: InvariantSpec,
}

impl ScenarioConfig {
    pub fn from_ini(ini: &Ini) -> Result<Self, LabError> {
        let mut r = Reader { ini, used: BTreeSet::new() };
        let name = r.or("scenario.name", String::from("scenario"))?;
        let seed = r.or("scenario.seed", 0u64)?;
        let out_dir = r.parse::<PathBuf>("scenario.out_dir")?;
        let mut analyses: Vec<Analysis> = r.list("scenario.analyses")?;
        analyses.sort();
        analyses.dedup();
        if analyses.is_empty() {
            return Err(LabError::config(
                "scenario.analyses",
                "select at least one of decay, resolvent, observability, invariants",
            ));
        }

        let kind = r.or("model.kind", String::from("wave"))?;
        let model = match kind.as_str() {
            "wave" => {
                let coeffs: Vec<f64> = r.list("model.coeffs")?;
                ModelSpec::Wave {
                    beta: r.or("model.beta", 1.0)?,
                    modes: r.or("model.modes", 128)?,
                    coeffs: (!coeffs.is_empty()).then_some(coeffs),
                }
            }
            "scole" => ModelSpec::Scole {
                elements: r.or("model.elements", 64)?,
                ei: r.or("model.ei", 1.0)?,
                rho: r.or("model.rho", 1.0)?,
                tip_mass: r.or("model.tip_mass", 1.0)?,
                tip_inertia: r.or("model.tip_inertia", 1.0)?,
            },
            other => return Err(LabError::config("model.kind", format!("unknown model `{other}` (wave, scole)"))),
        };
        let multiplier = match r.parse::<f64>("model.multiplier_zeta_slope")? {
            Some(slope) => Some((slope, r.or("model.multiplier_a", 0.5)?, r.or("model.multiplier_b", 0.5)?)),
            None => {
                r.raw("model.multiplier_a");
                r.raw("model.multiplier_b");
                None
            }
        };
        let checks = ModelChecks { skew_tol: r.parse("model.skew_tol")?, multiplier };

        let phi = PhiSpec {
            name: r.or("phi.name", String::from("identity"))?,
            param: r.parse("phi.param")?,
            coeffs: r.list("phi.coeffs")?,
        };
        phi.build("phi.name")?;

        let initial = match r.or("initial.kind", String::from("critical"))?.as_str() {
            "critical" => {
                r.raw("initial.exponent");
                InitialKind::Critical
            }
            "smooth" => InitialKind::Smooth(r.or("initial.exponent", 3.0)?),
            other => {
                return Err(LabError::config(
                    "initial.kind",
                    format!("unknown initial data `{other}` (critical, smooth)"),
                ))
            }
        };

        let defaults = Schedule::default();
        let schedule = Schedule {
            t_end: r.or("schedule.t_end", defaults.t_end)?,
            dt: r.or("schedule.dt", defaults.dt)?,
            sample_stride: r.or("schedule.sample_stride", defaults.sample_stride)?,
            substep_tol: r.or("schedule.substep_tol", defaults.substep_tol)?,
        };
        schedule.steps().map_err(|e| LabError::config("schedule", e.to_string()))?;
        let method: Method = r
            .or("schedule.method", String::from("strang"))?
            .parse()
            .map_err(|_| LabError::config("schedule.method", "expected strang or implicit_midpoint"))?;

        let compare_phi =
            r.parse::<String>("decay.compare_phi")?.map(|name| PhiSpec { name, param: None, coeffs: Vec::new() });
        if let Some(p) = &compare_phi {
            p.build("decay.compare_phi")?;
        }
        let decay = DecaySpec {
            window: r.pair("decay.window")?,
            predicted: r.parse("decay.predicted")?,
            theta_min: r.parse("decay.theta_min")?,
            theta_max: r.parse("decay.theta_max")?,
            sharpness_min: r.parse("decay.sharpness_min")?,
            compare_phi,
            compare_tol: r.or("decay.compare_tol", 0.05)?,
            entry_delta: r.or("decay.entry_delta", 0.1)?,
        };

        let resolvent = ResolventSpec {
            kappa: r.or("resolvent.kappa", 1.0)?,
            s_min: r.or("resolvent.s_min", 1.0)?,
            s_max: r.or("resolvent.s_max", 1000.0)?,
            grid_density: r.or("resolvent.grid_density", 20)?,
            slope_min: r.parse("resolvent.slope_min")?,
            slope_max: r.parse("resolvent.slope_max")?,
            probes: r.or("resolvent.probes", 0)?,
            probe_tol: r.or("resolvent.probe_tol", 1e-8)?,
            margin_beta: r.parse("resolvent.margin_beta")?,
        };

        let observability = ObservabilitySpec {
            tau: r.or("observability.tau", 3.0)?,
            beta: r.parse("observability.beta")?,
            modes: r.list("observability.modes")?,
            ratio_min: r.or("observability.ratio_min", 0.5)?,
        };

        let invariants = InvariantSpec {
            t_end: r.or("invariants.t_end", 20.0)?,
            dt: r.or("invariants.dt", 1e-3)?,
            energy_tol: r.or("invariants.energy_tol", 1e-6)?,
            halving_min: r.or("invariants.halving_min", 3.0)?,
            norm_tol: r.or("invariants.norm_tol", 1e-12)?,
            xdot_tol: r.or("invariants.xdot_tol", 1e-9)?,
            contraction_tol: r.or("invariants.contraction_tol", 1e-9)?,
            conservation_tol: r.or("invariants.conservation_tol", 1e-10)?,
        };
        r.finish()?;
        Ok(ScenarioConfig {
            name,
            seed,
            out_dir,
            analyses,
            model,
            checks,
            phi,
            initial,
            schedule,
            method,
            decay,
            resolvent,
            observability,
            invariants,
        })
    }
}
