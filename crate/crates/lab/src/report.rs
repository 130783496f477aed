//! CSV rows, SVG plots and the hashed manifest.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round-trips
//! every `f64` and keeps reruns byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dampdecay_core::Trajectory;
use sha2::{Digest, Sha256};

use crate::LabError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A `key,value` table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    rows: Vec<(String, String)>,
}

impl KeyValues {
    pub fn float(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.rows.push((key.into(), num(v)));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl ToString) -> &mut Self {
        self.rows.push((key.into(), v.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,norm");
    for c in 0..traj.input_dim {
        let _ = write!(out, ",w{}", c + 1);
    }
    out.push_str(",dissipation,xdot_norm\n");
    for k in 0..traj.len() {
        let _ = write!(out, "{},{}", num(traj.times[k]), num(traj.norms[k]));
        for w in traj.w(k) {
            let _ = write!(out, ",{}", num(*w));
        }
        let _ = writeln!(out, ",{},{}", num(traj.dissipation[k]), num(traj.xdot_norms[k]));
    }
    out
}

/// `(times, norms)` from a trajectory CSV (the `t` and `norm` columns).
pub fn read_norm_series(text: &str) -> Result<(Vec<f64>, Vec<f64>), LabError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| LabError::config("--input", format!("missing `{name}` column")))
    };
    let (it, inorm) = (col("t")?, col("norm")?);
    let (mut t, mut n) = (Vec::new(), Vec::new());
    for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| {
            cells
                .get(i)
                .and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| LabError::config("--input", format!("bad number on data row {}", no + 1)))
        };
        t.push(get(it)?);
        n.push(get(inorm)?);
    }
    Ok((t, n))
}

pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, bound: impl Into<String>, pass: bool) -> Self {
        Check { name: name.to_string(), value, bound: bound.into(), pass }
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,value,bound,pass\n");
    for c in checks {
        let _ = writeln!(out, "{},{},{},{}", c.name, num(c.value), c.bound, c.pass);
    }
    out
}

/// Log-log polyline with decade grid lines and an optional dashed guide
/// `y = y0 (x / x0)^slope`.
pub fn loglog_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    guide: Option<(f64, f64, f64)>,
) -> String {
    let (w, h, m) = (720.0, 460.0, 60.0);
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        w / 2.0
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    let (x0, x1, y0, y1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0), y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">1e{d}</text>",
            py(y0),
            py(y1),
            h - m + 18.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">1e{d}</text>",
            px(x0),
            px(x1),
            m - 6.0,
            y + 4.0
        );
    }
    svg.push_str("<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"");
    for (x, y) in &pts {
        let _ = write!(svg, "{:.2},{:.2} ", px(*x), py(*y));
    }
    svg.push_str("\"/>\n");
    if let Some((slope, gx, gy)) = guide {
        if gx > 0.0 && gy > 0.0 {
            let line = |x: f64| gy.log10() + slope * (x - gx.log10());
            let (ya, yb) = (line(x0).clamp(y0, y1), line(x1).clamp(y0, y1));
            // endpoints recomputed so the clamped segment keeps its slope
            let xa = if slope != 0.0 { gx.log10() + (ya - gy.log10()) / slope } else { x0 };
            let xb = if slope != 0.0 { gx.log10() + (yb - gy.log10()) / slope } else { x1 };
            let _ = writeln!(
                svg,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/><text x=\"{:.2}\" y=\"{:.2}\" fill=\"#c0392b\" text-anchor=\"end\">slope {slope:.3}</text>",
                px(xa),
                py(ya),
                px(xb),
                py(yb),
                w - m,
                m - 8.0
            );
        }
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{xlabel}</text><text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{ylabel}</text>",
        w / 2.0,
        h - 12.0,
        h / 2.0,
        h / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Files written into one output directory, hashed on write.
pub struct OutputDir {
    pub dir: PathBuf,
    pub files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, LabError> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), LabError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| LabError::io(&path, e))?;
        let digest = Sha256::digest(contents.as_bytes());
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), format!("{digest:x}")));
        Ok(())
    }

    /// `manifest.txt` in `sha256sum` format, sorted by file name.
    pub fn finish(mut self) -> Result<Vec<(String, String)>, LabError> {
        self.files.sort();
        let mut text = String::new();
        for (name, hash) in &self.files {
            let _ = writeln!(text, "{hash}  {name}");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
        Ok(self.files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn norm_series_round_trip() {
        let text = "t,norm,w1,dissipation,xdot_norm\n0,1,0.5,0,2\n1.5,0.25,0.1,0.3,1\n";
        let (t, n) = read_norm_series(text).unwrap();
        assert_eq!((t, n), (vec![0.0, 1.5], vec![1.0, 0.25]));
        assert!(read_norm_series("t,x\n1,2\n").is_err());
        assert!(read_norm_series("t,norm\n1,abc\n").is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let xs: Vec<f64> = (1..100).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(-0.5)).collect();
        let svg = loglog_svg("t", "x", "y", &xs, &ys, Some((-0.5, 1.0, 1.0)));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("slope -0.500"));
        assert!(loglog_svg("t", "x", "y", &[], &[], None).ends_with("</svg>\n"));
    }

    #[test]
    fn kv_rows() {
        let mut kv = KeyValues::default();
        kv.float("theta_hat", 0.5).text("pass", true);
        assert_eq!(kv.to_csv(), "key,value\ntheta_hat,5.0000000000000000e-1\npass,true\n");
        assert_eq!(kv.get("pass"), Some("true"));
    }
}
