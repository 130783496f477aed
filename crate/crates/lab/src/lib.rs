//! Scenario runner for `dampdecay-core`: config files, presets, CSV/SVG output
//! with a hashed manifest, and parallel sweeps.

use std::path::{Path, PathBuf};

pub mod config;
pub mod presets;
pub mod report;
pub mod scenario;

pub use config::{Ini, ScenarioConfig};
pub use scenario::{run_scenario, RunOptions, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: dampdecay_core::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl LabError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config { key: key.into(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io { path: path.to_path_buf(), source }
    }
}

pub(crate) fn stage(name: &'static str) -> impl Fn(dampdecay_core::Error) -> LabError {
    move |source| LabError::Stage { stage: name, source }
}

/// Cartesian product of `key=v1,v2,...` overrides, one `Ini` per combination,
/// each with its own output directory under `root`.
pub fn sweep_variants(base: &Ini, vary: &[String], root: &Path) -> Result<Vec<(Ini, PathBuf)>, LabError> {
    let mut variants = vec![(base.clone(), root.to_path_buf())];
    for spec in vary {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| LabError::config(spec.as_str(), "--vary expects section.key=v1,v2,..."))?;
        let mut next = Vec::new();
        for (ini, dir) in &variants {
            for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let mut ini = ini.clone();
                ini.set(&format!("{key}={v}"))?;
                next.push((ini, dir.join(format!("{key}={v}"))));
            }
        }
        variants = next;
    }
    Ok(variants)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_takes_the_product_of_values() {
        let base = Ini::parse("name = s\n[model]\nbeta = 1\n").unwrap();
        let vary = ["model.beta=1,2".to_string(), "phi.name=tanh, identity".to_string()];
        let v = sweep_variants(&base, &vary, Path::new("root")).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[3].0.get("phi.name"), Some("identity"));
        assert_eq!(v[3].1, Path::new("root/model.beta=2/phi.name=identity"));
        assert!(sweep_variants(&base, &["model.beta".to_string()], Path::new("r")).is_err());
    }
}
