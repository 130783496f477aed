//! Named scenarios, stored as config text so they read like user files.

use crate::config::Ini;
use crate::LabError;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

const WAVE_RATE: &str = "
analyses = decay
seed = 1
[model]
kind = wave
beta = 1
modes = 128
[initial]
kind = critical
[schedule]
t_end = 2000
dt = 2e-3
sample_stride = 500
[decay]
window = 100, 2000
";

const SCOLE_RATE: &str = "
analyses = decay, resolvent
seed = 1
[model]
kind = scole
elements = 64
skew_tol = 1e-10
multiplier_zeta_slope = 2
multiplier_a = 0.5
multiplier_b = 0.5
[initial]
kind = critical
[schedule]
t_end = 2000
dt = 1e-3
sample_stride = 1000
[decay]
window = 100, 2000
predicted = 0.5
theta_min = 0.4
theta_max = 0.6
[resolvent]
s_min = 1
s_max = 1e4
slope_min = 1.6
slope_max = 2.4
";

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "wave-beta1-linear",
        description: "string, b_n = 1/n, phi = identity: |x(t)| ~ t^-1/2, two-sided on (100, 2000)",
        text: "name = wave-beta1-linear
[phi]
name = identity
[decay]
theta_min = 0.4
theta_max = 0.6
sharpness_min = 0.1
",
    },
    Preset {
        name: "wave-beta1-tanh",
        description: "string, b_n = 1/n, phi = tanh (gain 1, cubic remainder): same exponent as linear damping",
        text: "name = wave-beta1-tanh
[phi]
name = tanh
[decay]
theta_min = 0.4
theta_max = 0.6
compare_phi = identity
compare_tol = 0.05
",
    },
    Preset {
        name: "wave-beta1-cubic-control",
        description: "string, b_n = 1/n, phi = r^3 (no linear sector at 0): decay clearly slower than t^-1/2",
        text: "name = wave-beta1-cubic-control
[phi]
name = cubic
[decay]
theta_max = 0.35
",
    },
    Preset {
        name: "wave-beta0.75-linear",
        description: "string, b_n = n^-3/4, phi = identity: |x(t)| ~ t^-2/3 (256 modes keep the window inside the truncation horizon)",
        text: "name = wave-beta0.75-linear
[model]
beta = 0.75
modes = 256
[schedule]
dt = 1e-3
sample_stride = 1000
[phi]
name = identity
[decay]
theta_min = 0.5667
theta_max = 0.7667
",
    },
    Preset {
        name: "wave-beta1.5-linear",
        description: "string, b_n = n^-3/2, phi = identity: |x(t)| ~ t^-1/3",
        text: "name = wave-beta1.5-linear
[model]
beta = 1.5
[phi]
name = identity
[decay]
theta_min = 0.2333
theta_max = 0.4333
",
    },
    Preset {
        name: "scole-linear",
        description: "clamped beam with tip body, tip force and moment feedback: t^-1/2 decay and resolvent growth s^2 claimed",
        text: "name = scole-linear
[phi]
name = identity
",
    },
    Preset {
        name: "scole-tanh",
        description: "beam with tip body, tanh feedback: exponent matches the linear feedback run",
        text: "name = scole-tanh
[phi]
name = tanh
[decay]
compare_phi = identity
compare_tol = 0.05
",
    },
    Preset {
        name: "wave-observability",
        description: "string, b_n = 1/n, window 3 > 2 pi / gap: weighted observability constant stable in the truncation",
        text: "name = wave-observability
analyses = observability
[model]
modes = 16
[observability]
tau = 3
beta = 1
modes = 16, 64, 256
ratio_min = 0.5
",
    },
    Preset {
        name: "wave-resolvent-sweep",
        description: "string, b_n = 1/n, 256 modes: resolvent envelope grows like s^2; Woodbury and dense norms agree",
        text: "name = wave-resolvent-sweep
analyses = resolvent
[model]
modes = 256
[resolvent]
kappa = 1
s_min = 1
s_max = 500
slope_min = 1.7
slope_max = 2.3
probes = 50
probe_tol = 1e-8
",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Full config text of a preset: its family base plus its own lines.
pub fn preset_ini(name: &str) -> Result<Ini, LabError> {
    let p = find(name).ok_or_else(|| LabError::config("--preset", format!("unknown preset `{name}`")))?;
    let base = if name.starts_with("scole") { SCOLE_RATE } else { WAVE_RATE };
    let mut ini = Ini::parse(base)?;
    ini.merge(&Ini::parse(p.text)?);
    Ok(ini)
}
