use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hybrid_sim::circuit::export_qasm;
use hybrid_sim::experiments::output::manifest_text;
use hybrid_sim::experiments::{
    calibrate_noise, fidelity_config_for, preset_circuits, run_experiment, write_run,
    ExperimentConfig, ExperimentKind, RunOutput, MANIFEST_NAME,
};
use hybrid_sim::Error;

/// Print a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "hybrid-sim", version, about = "Hybrid NV-centre / flux-qubit circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Electron relaxation for three preparations
    Relaxation(Common),
    /// Electron coherence through the entangling circuit
    Coherence(Common),
    /// Extended-register fidelity against the noise-free state
    Fidelity(Common),
    /// Fidelity and branch coherence against Trotter step count
    StepsSweep(Common),
    /// Decoherence curves and coherence time against NV count
    Scaling(Common),
    /// Fit the free noise parameters and write calibrated.cfg
    Calibrate(Common),
    /// Write the preset circuits as OpenQASM 2.0
    ExportQasm(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for noise trajectories
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte-Carlo trajectories per point
    #[arg(long)]
    trajectories: Option<usize>,
}

enum Failure {
    Config(String),
    Calibration,
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

/// The `experiment` value of a config text, if present.
fn declared_kind(text: &str) -> Result<Option<ExperimentKind>, Error> {
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "experiment" {
                return v.trim().parse().map(Some);
            }
        }
    }
    Ok(None)
}

fn load(kind: Option<ExperimentKind>, common: &Common) -> Result<ExperimentConfig, Error> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let kind = match kind {
        Some(k) => k,
        None => declared_kind(&text)?.unwrap_or(ExperimentKind::Fidelity),
    };
    let mut cfg = ExperimentConfig::from_text(kind, &text)?;
    let overrides = [
        ("noise.seed", common.seed.map(|s| s.to_string())),
        ("noise.trajectories", common.trajectories.map(|n| n.to_string())),
        ("output.path", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
            cfg.mark_user(key);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(kind: ExperimentKind, common: &Common) -> Result<(), Failure> {
    let cfg = load(Some(kind), common)?;
    let out = run_experiment(&cfg)?;
    let files = write_run(Path::new(&cfg.output_path), &cfg, &out)?;
    for (k, v) in &out.summary {
        say!("{k} = {v}");
    }
    for f in files {
        say!("wrote {}", f.display());
    }
    Ok(())
}

fn calibrate(common: &Common) -> Result<(), Failure> {
    let cfg = load(Some(ExperimentKind::Scaling), common)?;
    let fid = fidelity_config_for(&cfg);
    let report = calibrate_noise(&cfg, &fid)?;
    let dir = Path::new(&cfg.output_path);
    fs::create_dir_all(dir).map_err(Error::from)?;
    fs::write(dir.join("calibrated.cfg"), report.config_text()).map_err(Error::from)?;
    fs::write(dir.join("calibration.csv"), report.report_text()).map_err(Error::from)?;

    let mut fitted = cfg.clone();
    fitted.noise = report.noise.clone();
    let mut summary: Vec<(String, String)> = report
        .params
        .iter()
        .map(|(p, v)| (format!("fitted_{}", p.name()), v.to_string()))
        .collect();
    for t in report.targets.iter().chain(std::iter::once(&report.out_of_sample)) {
        summary.push((format!("{}_simulated", t.name), t.simulated.to_string()));
        summary.push((format!("{}_residual", t.name), t.residual.to_string()));
    }
    summary.push(("evaluations".into(), report.evaluations.to_string()));
    summary.push(("budget_exhausted".into(), report.budget_exhausted.to_string()));
    summary.push(("passed".into(), report.passed.to_string()));
    let out = RunOutput {
        experiment: ExperimentKind::Scaling,
        curves: Vec::new(),
        summary,
        counts: None,
    };
    let files = ["calibrated.cfg".to_string(), "calibration.csv".to_string()];
    fs::write(dir.join(MANIFEST_NAME), manifest_text(&fitted, Some(&out), &files))
        .map_err(Error::from)?;
    for (k, v) in &out.summary {
        say!("{k} = {v}");
    }
    say!("wrote {}", dir.display());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Calibration)
    }
}

fn export(common: &Common) -> Result<(), Failure> {
    let cfg = load(None, common)?;
    let dir = Path::new(&cfg.output_path);
    fs::create_dir_all(dir).map_err(Error::from)?;
    let mut files = Vec::new();
    for (name, c) in preset_circuits(&cfg)? {
        let file = format!("{name}.qasm");
        fs::write(dir.join(&file), export_qasm(&c)).map_err(Error::from)?;
        say!("wrote {}", dir.join(&file).display());
        files.push(file);
    }
    fs::write(dir.join(MANIFEST_NAME), manifest_text(&cfg, None, &files)).map_err(Error::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Relaxation(c) => run(ExperimentKind::Relaxation, c),
        Command::Coherence(c) => run(ExperimentKind::CoherenceEvolution, c),
        Command::Fidelity(c) => run(ExperimentKind::Fidelity, c),
        Command::StepsSweep(c) => run(ExperimentKind::StepsSweep, c),
        Command::Scaling(c) => run(ExperimentKind::Scaling, c),
        Command::Calibrate(c) => calibrate(c),
        Command::ExportQasm(c) => export(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Calibration) => {
            eprintln!("error: calibration residual above limit");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
