//! Flat `key = value` experiment configuration.
//!
//! Lines are `namespace.key = value`; `#` starts a comment. Unknown keys,
//! duplicate keys and malformed values are errors. Every key has a
//! provenance tag that ends up in the run manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::decoupling::{DDKind, DDSequence};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianParams;
use crate::noise::{GateNoiseParams, NoiseModel, OuParams};
use crate::observables::AxisUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Relaxation,
    CoherenceEvolution,
    Fidelity,
    StepsSweep,
    Scaling,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Relaxation,
        ExperimentKind::CoherenceEvolution,
        ExperimentKind::Fidelity,
        ExperimentKind::StepsSweep,
        ExperimentKind::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Relaxation => "relaxation",
            ExperimentKind::CoherenceEvolution => "coherence_evolution",
            ExperimentKind::Fidelity => "fidelity",
            ExperimentKind::StepsSweep => "steps_sweep",
            ExperimentKind::Scaling => "scaling",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Where a parameter value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Constant quoted by the source publication.
    Paper,
    /// Produced by the calibration run.
    Calibrated,
    /// Tool default with no published value.
    Default,
    /// Set by a config file or command-line flag.
    User,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Paper => "paper",
            Provenance::Calibrated => "calibrated",
            Provenance::Default => "default",
            Provenance::User => "user",
        }
    }
}

/// Which lines feel the field noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseLines {
    /// Electron and NV lines.
    Spin,
    All,
}

/// Linear grid `start..=stop` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub unit: AxisUnit,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Config(format!("grid.points must be >= 2, got {}", self.points)));
        }
        if !(self.stop > self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config(format!(
                "grid must be strictly increasing, got {}..{}",
                self.start, self.stop
            )));
        }
        if self.start < 0.0 {
            return Err(Error::Config("grid.start must be >= 0".into()));
        }
        if self.unit.to_us().is_none() {
            return Err(Error::Config(format!("grid.unit `{}` is not a time unit", self.unit)));
        }
        Ok(())
    }

    /// Grid values in the grid's own unit.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.stop } else { self.start + step * k as f64 })
            .collect()
    }

    pub fn values_us(&self) -> Vec<f64> {
        let f = self.unit.to_us().unwrap_or(1.0);
        self.values().into_iter().map(|v| v * f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSettings {
    pub ou_tau_c: f64,
    pub ou_sigma_b: f64,
    /// `None` means `tau_c / 5`.
    pub ou_dt: Option<f64>,
    pub static_sigma: f64,
    pub gate: GateNoiseParams,
    pub lines: NoiseLines,
    pub trajectories: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl NoiseSettings {
    pub fn ou(&self) -> OuParams {
        OuParams {
            tau_c: self.ou_tau_c,
            sigma_b: self.ou_sigma_b,
            dt: self.ou_dt.unwrap_or(self.ou_tau_c / 5.0),
        }
    }

    /// Noise model over `n_qubits` with field noise on `spin_lines` (or all
    /// lines when so configured).
    pub fn model(&self, n_qubits: usize, spin_lines: &[usize]) -> NoiseModel {
        let all: Vec<usize> = (0..n_qubits).collect();
        let lines = match self.lines {
            NoiseLines::Spin => spin_lines,
            NoiseLines::All => &all,
        };
        let mut m = NoiseModel::noiseless().with_trajectories(self.trajectories, self.seed);
        m.threads = self.threads;
        if self.ou_sigma_b > 0.0 {
            m = m.with_ou(lines, self.ou());
        }
        if self.static_sigma > 0.0 {
            m = m.with_static(lines, self.static_sigma);
        }
        if !self.gate.is_trivial() {
            m = m.with_gate_noise(self.gate);
        }
        m
    }

    pub fn disabled(&self) -> bool {
        self.ou_sigma_b == 0.0 && self.static_sigma == 0.0 && self.gate.is_trivial()
    }

    pub fn disable(&mut self) {
        self.ou_sigma_b = 0.0;
        self.static_sigma = 0.0;
        self.gate = GateNoiseParams::default();
    }
}

/// Parameters a calibration may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FreeParam {
    TauC,
    SigmaB,
    SigmaStatic,
    PDepol1q,
    PDepol2q,
    T1,
}

impl FreeParam {
    pub const ALL: [FreeParam; 6] = [
        FreeParam::TauC,
        FreeParam::SigmaB,
        FreeParam::SigmaStatic,
        FreeParam::PDepol1q,
        FreeParam::PDepol2q,
        FreeParam::T1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::TauC => "tau_c",
            FreeParam::SigmaB => "sigma_b",
            FreeParam::SigmaStatic => "sigma_static",
            FreeParam::PDepol1q => "p_depol_1q",
            FreeParam::PDepol2q => "p_depol_2q",
            FreeParam::T1 => "t1",
        }
    }

    /// Config key holding this parameter.
    pub fn key(self) -> &'static str {
        match self {
            FreeParam::TauC => "noise.ou.tau_c",
            FreeParam::SigmaB => "noise.ou.sigma_b",
            FreeParam::SigmaStatic => "noise.static.sigma",
            FreeParam::PDepol1q => "noise.gate.p_depol_1q",
            FreeParam::PDepol2q => "noise.gate.p_depol_2q",
            FreeParam::T1 => "noise.gate.t1",
        }
    }

    /// Search bounds.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            FreeParam::TauC => (1.0, 1e5),
            FreeParam::SigmaB => (1e-7, 1e-2),
            FreeParam::SigmaStatic => (1e-4, 10.0),
            FreeParam::PDepol1q => (1e-6, 0.1),
            FreeParam::PDepol2q => (1e-6, 0.2),
            FreeParam::T1 => (1.0, 1e8),
        }
    }

    pub fn get(self, n: &NoiseSettings) -> f64 {
        match self {
            FreeParam::TauC => n.ou_tau_c,
            FreeParam::SigmaB => n.ou_sigma_b,
            FreeParam::SigmaStatic => n.static_sigma,
            FreeParam::PDepol1q => n.gate.p_depol_1q,
            FreeParam::PDepol2q => n.gate.p_depol_2q,
            FreeParam::T1 => n.gate.t1.unwrap_or(f64::INFINITY),
        }
    }

    pub fn set(self, n: &mut NoiseSettings, v: f64) {
        match self {
            FreeParam::TauC => n.ou_tau_c = v,
            FreeParam::SigmaB => n.ou_sigma_b = v,
            FreeParam::SigmaStatic => n.static_sigma = v,
            FreeParam::PDepol1q => n.gate.p_depol_1q = v,
            FreeParam::PDepol2q => n.gate.p_depol_2q = v,
            FreeParam::T1 => n.gate.t1 = Some(v),
        }
    }
}

impl FromStr for FreeParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FreeParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown free parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    /// Single-NV coherence time target, seconds.
    pub target_coherence_s: f64,
    pub target_plateau: f64,
    pub free: Vec<FreeParam>,
    pub budget: usize,
    /// Largest acceptable relative residual on any target.
    pub max_residual: f64,
    /// Relative residual below which a target counts as met.
    pub tolerance: f64,
    pub trajectories: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            target_coherence_s: 0.35,
            target_plateau: 0.82,
            free: vec![FreeParam::SigmaB, FreeParam::PDepol2q],
            budget: 500,
            max_residual: 0.25,
            tolerance: 0.02,
            trajectories: 1000,
        }
    }
}

/// Noise magnitudes produced by the shipped calibration run.
pub mod calibrated {
    pub const OU_TAU_C: f64 = 1000.0;
    pub const OU_SIGMA_B: f64 = 5.0665e-5;
    pub const P_DEPOL_1Q: f64 = 1.0e-3;
    pub const P_DEPOL_2Q: f64 = 3.3613e-3;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub hamiltonian: HamiltonianParams,
    pub trotter_steps: usize,
    pub noise: NoiseSettings,
    pub dd: DDSequence,
    /// `None` spans the whole evolution at each grid point.
    pub dd_window: Option<f64>,
    pub grid: TimeGrid,
    pub sweep_steps: Vec<usize>,
    /// Fixed evolution time of the steps sweep, us.
    pub sweep_time: f64,
    pub n_list: Vec<usize>,
    pub threshold: f64,
    pub shots: usize,
    pub output_path: String,
    pub calibration: CalibrationSettings,
    user_keys: Vec<String>,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_opt_f64(key: &str, v: &str, none_word: &str) -> Result<Option<f64>> {
    if v == none_word {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>, none_word: &str) -> String {
    v.map_or(none_word.to_string(), |x| x.to_string())
}

fn parse_unit(v: &str) -> Result<AxisUnit> {
    match v {
        "us" => Ok(AxisUnit::Microseconds),
        "ms" => Ok(AxisUnit::Milliseconds),
        "s" => Ok(AxisUnit::Seconds),
        other => Err(Error::Config(format!("unknown grid.unit `{other}`"))),
    }
}

/// Every recognised key, in manifest order.
pub const KEYS: &[&str] = &[
    "experiment",
    "hamiltonian.d_zfs",
    "hamiltonian.gamma_e",
    "hamiltonian.gamma_n",
    "hamiltonian.b0",
    "hamiltonian.q_quad",
    "hamiltonian.j_c",
    "hamiltonian.j_n",
    "hamiltonian.delta",
    "hamiltonian.g_f",
    "hamiltonian.n_nv",
    "trotter.steps",
    "noise.ou.tau_c",
    "noise.ou.sigma_b",
    "noise.ou.dt",
    "noise.static.sigma",
    "noise.gate.p_depol_1q",
    "noise.gate.p_depol_2q",
    "noise.gate.t1",
    "noise.lines",
    "noise.trajectories",
    "noise.seed",
    "noise.threads",
    "dd.kind",
    "dd.n_pulses",
    "dd.window",
    "grid.start",
    "grid.stop",
    "grid.points",
    "grid.unit",
    "sweep.steps",
    "sweep.time",
    "scaling.n_list",
    "scaling.threshold",
    "shots",
    "output.path",
    "calibrate.target_coherence",
    "calibrate.target_plateau",
    "calibrate.free",
    "calibrate.budget",
    "calibrate.max_residual",
    "calibrate.tolerance",
    "calibrate.trajectories",
];

impl ExperimentConfig {
    /// Built-in defaults for one experiment.
    pub fn defaults(kind: ExperimentKind) -> ExperimentConfig {
        let calibrated_noise = NoiseSettings {
            ou_tau_c: calibrated::OU_TAU_C,
            ou_sigma_b: calibrated::OU_SIGMA_B,
            ou_dt: None,
            static_sigma: 0.0,
            gate: GateNoiseParams {
                p_depol_1q: calibrated::P_DEPOL_1Q,
                p_depol_2q: calibrated::P_DEPOL_2Q,
                t1: None,
            },
            lines: NoiseLines::Spin,
            trajectories: 200,
            seed: 1,
            threads: None,
        };
        let mut cfg = ExperimentConfig {
            experiment: kind,
            hamiltonian: HamiltonianParams::default(),
            trotter_steps: 4,
            noise: calibrated_noise,
            dd: DDSequence::none(),
            dd_window: None,
            grid: TimeGrid {
                start: 0.0,
                stop: 5.0,
                points: 21,
                unit: AxisUnit::Microseconds,
            },
            sweep_steps: vec![1, 100, 200, 400, 700, 1000, 1300, 1400],
            sweep_time: 1000.0,
            n_list: vec![1, 2, 3, 4],
            threshold: 0.4,
            shots: 1024,
            output_path: "out".into(),
            calibration: CalibrationSettings::default(),
            user_keys: Vec::new(),
        };
        match kind {
            ExperimentKind::Relaxation => {
                cfg.trotter_steps = 10;
                cfg.noise.ou_sigma_b = 0.0;
                cfg.noise.static_sigma = 0.1;
                cfg.noise.gate = GateNoiseParams {
                    p_depol_1q: 0.0,
                    p_depol_2q: 0.0,
                    t1: Some(11.2),
                };
            }
            ExperimentKind::CoherenceEvolution => {
                cfg.noise.ou_sigma_b = 0.0;
                cfg.noise.static_sigma = 0.33;
                cfg.noise.gate = GateNoiseParams::default();
                cfg.noise.trajectories = 400;
            }
            ExperimentKind::Fidelity => {
                cfg.hamiltonian.n_nv = 3;
                cfg.grid = TimeGrid {
                    start: 0.0,
                    stop: 1.0,
                    points: 21,
                    unit: AxisUnit::Milliseconds,
                };
            }
            ExperimentKind::StepsSweep => {
                cfg.hamiltonian.n_nv = 3;
                cfg.noise.trajectories = 20;
            }
            ExperimentKind::Scaling => {
                cfg.trotter_steps = 1;
                cfg.grid = TimeGrid {
                    start: 0.0,
                    stop: 1000.0,
                    points: 41,
                    unit: AxisUnit::Milliseconds,
                };
            }
        }
        cfg
    }

    /// Defaults for `kind` overridden by the text of a config file.
    pub fn from_text(kind: ExperimentKind, text: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::defaults(kind);
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), idx + 1).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", idx + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", idx + 1, strip(e))))?;
        }
        if cfg.experiment != kind {
            return Err(Error::Config(format!(
                "config is for `{}` but `{}` was requested",
                cfg.experiment, kind
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let h = &mut self.hamiltonian;
        let n = &mut self.noise;
        match key {
            "experiment" => self.experiment = v.parse()?,
            "hamiltonian.d_zfs" => h.d_zfs = parse_num(key, v)?,
            "hamiltonian.gamma_e" => h.gamma_e = parse_num(key, v)?,
            "hamiltonian.gamma_n" => h.gamma_n = parse_num(key, v)?,
            "hamiltonian.b0" => h.b0 = parse_num(key, v)?,
            "hamiltonian.q_quad" => h.q_quad = parse_num(key, v)?,
            "hamiltonian.j_c" => h.j_c = parse_num(key, v)?,
            "hamiltonian.j_n" => h.j_n = parse_num(key, v)?,
            "hamiltonian.delta" => h.delta = parse_num(key, v)?,
            "hamiltonian.g_f" => h.g_f = parse_num(key, v)?,
            "hamiltonian.n_nv" => h.n_nv = parse_num(key, v)?,
            "trotter.steps" => self.trotter_steps = parse_num(key, v)?,
            "noise.ou.tau_c" => n.ou_tau_c = parse_num(key, v)?,
            "noise.ou.sigma_b" => n.ou_sigma_b = parse_num(key, v)?,
            "noise.ou.dt" => n.ou_dt = parse_opt_f64(key, v, "auto")?,
            "noise.static.sigma" => n.static_sigma = parse_num(key, v)?,
            "noise.gate.p_depol_1q" => n.gate.p_depol_1q = parse_num(key, v)?,
            "noise.gate.p_depol_2q" => n.gate.p_depol_2q = parse_num(key, v)?,
            "noise.gate.t1" => n.gate.t1 = parse_opt_f64(key, v, "none")?,
            "noise.lines" => {
                n.lines = match v {
                    "spin" => NoiseLines::Spin,
                    "all" => NoiseLines::All,
                    other => return Err(Error::Config(format!("unknown noise.lines `{other}`"))),
                }
            }
            "noise.trajectories" => n.trajectories = parse_num(key, v)?,
            "noise.seed" => n.seed = parse_num(key, v)?,
            "noise.threads" => {
                n.threads = if v == "auto" { None } else { Some(parse_num(key, v)?) }
            }
            "dd.kind" => self.dd.kind = v.parse::<DDKind>().map_err(|e| Error::Config(strip(e)))?,
            "dd.n_pulses" => self.dd.n_pulses = parse_num(key, v)?,
            "dd.window" => self.dd_window = parse_opt_f64(key, v, "auto")?,
            "grid.start" => self.grid.start = parse_num(key, v)?,
            "grid.stop" => self.grid.stop = parse_num(key, v)?,
            "grid.points" => self.grid.points = parse_num(key, v)?,
            "grid.unit" => self.grid.unit = parse_unit(v)?,
            "sweep.steps" => self.sweep_steps = parse_list(key, v)?,
            "sweep.time" => self.sweep_time = parse_num(key, v)?,
            "scaling.n_list" => self.n_list = parse_list(key, v)?,
            "scaling.threshold" => self.threshold = parse_num(key, v)?,
            "shots" => self.shots = parse_num(key, v)?,
            "output.path" => self.output_path = v.to_string(),
            "calibrate.target_coherence" => self.calibration.target_coherence_s = parse_num(key, v)?,
            "calibrate.target_plateau" => self.calibration.target_plateau = parse_num(key, v)?,
            "calibrate.free" => self.calibration.free = parse_list(key, v)?,
            "calibrate.budget" => self.calibration.budget = parse_num(key, v)?,
            "calibrate.max_residual" => self.calibration.max_residual = parse_num(key, v)?,
            "calibrate.tolerance" => self.calibration.tolerance = parse_num(key, v)?,
            "calibrate.trajectories" => self.calibration.trajectories = parse_num(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        if !self.user_keys.iter().any(|k| k == key) {
            self.user_keys.push(key.to_string());
        }
        Ok(())
    }

    /// Text value of one key, in the form `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let h = &self.hamiltonian;
        let n = &self.noise;
        let c = &self.calibration;
        Some(match key {
            "experiment" => self.experiment.to_string(),
            "hamiltonian.d_zfs" => h.d_zfs.to_string(),
            "hamiltonian.gamma_e" => h.gamma_e.to_string(),
            "hamiltonian.gamma_n" => h.gamma_n.to_string(),
            "hamiltonian.b0" => h.b0.to_string(),
            "hamiltonian.q_quad" => h.q_quad.to_string(),
            "hamiltonian.j_c" => h.j_c.to_string(),
            "hamiltonian.j_n" => h.j_n.to_string(),
            "hamiltonian.delta" => h.delta.to_string(),
            "hamiltonian.g_f" => h.g_f.to_string(),
            "hamiltonian.n_nv" => h.n_nv.to_string(),
            "trotter.steps" => self.trotter_steps.to_string(),
            "noise.ou.tau_c" => n.ou_tau_c.to_string(),
            "noise.ou.sigma_b" => n.ou_sigma_b.to_string(),
            "noise.ou.dt" => opt(n.ou_dt, "auto"),
            "noise.static.sigma" => n.static_sigma.to_string(),
            "noise.gate.p_depol_1q" => n.gate.p_depol_1q.to_string(),
            "noise.gate.p_depol_2q" => n.gate.p_depol_2q.to_string(),
            "noise.gate.t1" => opt(n.gate.t1, "none"),
            "noise.lines" => match n.lines {
                NoiseLines::Spin => "spin".into(),
                NoiseLines::All => "all".into(),
            },
            "noise.trajectories" => n.trajectories.to_string(),
            "noise.seed" => n.seed.to_string(),
            "noise.threads" => n.threads.map_or("auto".into(), |t| t.to_string()),
            "dd.kind" => self.dd.kind.to_string(),
            "dd.n_pulses" => self.dd.n_pulses.to_string(),
            "dd.window" => opt(self.dd_window, "auto"),
            "grid.start" => self.grid.start.to_string(),
            "grid.stop" => self.grid.stop.to_string(),
            "grid.points" => self.grid.points.to_string(),
            "grid.unit" => self.grid.unit.to_string(),
            "sweep.steps" => join(&self.sweep_steps),
            "sweep.time" => self.sweep_time.to_string(),
            "scaling.n_list" => join(&self.n_list),
            "scaling.threshold" => self.threshold.to_string(),
            "shots" => self.shots.to_string(),
            "output.path" => self.output_path.clone(),
            "calibrate.target_coherence" => c.target_coherence_s.to_string(),
            "calibrate.target_plateau" => c.target_plateau.to_string(),
            "calibrate.free" => c.free.iter().map(|p| p.name()).collect::<Vec<_>>().join(","),
            "calibrate.budget" => c.budget.to_string(),
            "calibrate.max_residual" => c.max_residual.to_string(),
            "calibrate.tolerance" => c.tolerance.to_string(),
            "calibrate.trajectories" => c.trajectories.to_string(),
            _ => return None,
        })
    }

    /// Provenance of the current value of `key`.
    pub fn provenance(&self, key: &str) -> Provenance {
        if self.user_keys.iter().any(|k| k == key) {
            return Provenance::User;
        }
        match key {
            "hamiltonian.d_zfs" | "hamiltonian.gamma_e" | "hamiltonian.gamma_n"
            | "hamiltonian.q_quad" | "hamiltonian.j_c" | "hamiltonian.j_n"
            | "calibrate.target_coherence" | "calibrate.target_plateau" => Provenance::Paper,
            "noise.ou.sigma_b" | "noise.gate.p_depol_2q"
                if self.uses_calibrated_noise() =>
            {
                Provenance::Calibrated
            }
            _ => Provenance::Default,
        }
    }

    fn uses_calibrated_noise(&self) -> bool {
        matches!(
            self.experiment,
            ExperimentKind::Fidelity | ExperimentKind::StepsSweep | ExperimentKind::Scaling
        )
    }

    /// Mark a key as explicitly set (used for command-line overrides).
    pub fn mark_user(&mut self, key: &str) {
        if !self.user_keys.iter().any(|k| k == key) {
            self.user_keys.push(key.to_string());
        }
    }

    /// `(key, value, provenance)` for every key, in manifest order.
    pub fn entries(&self) -> Vec<(&'static str, String, Provenance)> {
        KEYS.iter()
            .map(|&k| (k, self.get(k).unwrap_or_default(), self.provenance(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(strip(e));
        self.hamiltonian.validate().map_err(cfg)?;
        if self.trotter_steps == 0 {
            return Err(Error::Config("trotter.steps must be >= 1".into()));
        }
        self.grid.validate()?;
        if self.shots == 0 {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        let n = &self.noise;
        if n.trajectories == 0 {
            return Err(Error::Config("noise.trajectories must be >= 1".into()));
        }
        if n.threads == Some(0) {
            return Err(Error::Config("noise.threads must be >= 1 or auto".into()));
        }
        if n.ou_sigma_b > 0.0 {
            n.ou().validate().map_err(cfg)?;
        } else if n.ou_sigma_b < 0.0 || n.ou_sigma_b.is_nan() {
            return Err(Error::Config("noise.ou.sigma_b must be >= 0".into()));
        }
        if !(n.static_sigma >= 0.0) {
            return Err(Error::Config("noise.static.sigma must be >= 0".into()));
        }
        n.gate.validate().map_err(cfg)?;
        if self.dd.kind != DDKind::None {
            let probe = DDSequence {
                total_window: self.dd_window.unwrap_or(1.0),
                ..self.dd
            };
            probe.validate().map_err(cfg)?;
        }
        if self.sweep_steps.is_empty() || self.sweep_steps.contains(&0) {
            return Err(Error::Config("sweep.steps must be a non-empty list of counts >= 1".into()));
        }
        if self.sweep_steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep.steps must be strictly increasing".into()));
        }
        if !(self.sweep_time > 0.0) {
            return Err(Error::Config("sweep.time must be > 0".into()));
        }
        if self.n_list.is_empty()
            || self.n_list.iter().any(|&n| !(1..=crate::hamiltonian::MAX_NV).contains(&n))
        {
            return Err(Error::Config("scaling.n_list entries must be in [1, 4]".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("scaling.threshold must be in (0, 1)".into()));
        }
        let c = &self.calibration;
        if c.free.is_empty() || c.budget == 0 || c.trajectories == 0 {
            return Err(Error::Config(
                "calibrate.free, calibrate.budget and calibrate.trajectories must be non-empty".into(),
            ));
        }
        if !(c.target_coherence_s > 0.0) || !(c.target_plateau > 0.0 && c.target_plateau <= 1.0) {
            return Err(Error::Config("calibration targets out of range".into()));
        }
        Ok(())
    }
}

/// Drop an error's category prefix so it nests cleanly in a config message.
fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
