//! CSV curves, shot histograms and the run manifest.
//!
//! The manifest is itself a valid config file: every key with its value and
//! a trailing provenance tag, results as comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::runs::RunOutput;
use crate::error::Result;
use crate::observables::Curve;

pub const MANIFEST_NAME: &str = "manifest.txt";

pub fn curve_csv(c: &Curve) -> String {
    let mut s = String::from("time,value,stderr\n");
    for i in 0..c.len() {
        let _ = writeln!(s, "{},{},{}", c.times[i], c.values[i], c.std_errors[i]);
    }
    s
}

pub fn manifest_text(cfg: &ExperimentConfig, out: Option<&RunOutput>, files: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# hybrid-sim run manifest");
    let _ = writeln!(s, "# tool_version {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# units: energies rad/us, times us, grid in grid.unit");
    let _ = writeln!(s, "# tags: paper | calibrated | default | user");
    for (key, value, prov) in cfg.entries() {
        let _ = writeln!(s, "{key} = {value}  # {}", prov.name());
    }
    if let Some(out) = out {
        for c in &out.curves {
            let _ = writeln!(s, "# curve {} unit={} points={}", c.label, c.unit, c.len());
        }
        for (k, v) in &out.summary {
            let _ = writeln!(s, "# result {k} = {v}");
        }
    }
    for f in files {
        let _ = writeln!(s, "# file {f}");
    }
    s
}

/// Write CSVs, the optional counts file and the manifest into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for c in &out.curves {
        let name = format!("{}.csv", c.label);
        let path = dir.join(&name);
        fs::write(&path, curve_csv(c))?;
        written.push(path);
        names.push(name);
    }
    if let Some(counts) = &out.counts {
        let name = format!("{}_counts.csv", out.experiment);
        let mut s = String::from("bitstring,count\n");
        for (k, v) in counts {
            let _ = writeln!(s, "{k},{v}");
        }
        let path = dir.join(&name);
        fs::write(&path, s)?;
        written.push(path);
        names.push(name);
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest_text(cfg, Some(out), &names))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{ExperimentKind, KEYS};
    use crate::observables::AxisUnit;

    #[test]
    fn csv_layout() {
        let c = Curve::new("x", AxisUnit::Milliseconds, vec![0.0, 0.5], vec![1.0, 0.25], vec![0.0, 0.01])
            .unwrap();
        assert_eq!(curve_csv(&c), "time,value,stderr\n0,1,0\n0.5,0.25,0.01\n");
    }

    #[test]
    fn manifest_reloads_as_config() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Fidelity);
        cfg.set("noise.seed", "77").unwrap();
        let text = manifest_text(&cfg, None, &["fidelity.csv".into()]);
        assert!(text.contains("hamiltonian.d_zfs = 2870  # paper"));
        assert!(text.contains("hamiltonian.delta = 100  # default"));
        assert!(text.contains("noise.seed = 77  # user"));
        let back = ExperimentConfig::from_text(ExperimentKind::Fidelity, &text).unwrap();
        for k in KEYS {
            assert_eq!(back.get(k), cfg.get(k));
        }
    }
}
