//! The five virtual experiments.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use super::config::{ExperimentConfig, ExperimentKind, TimeGrid};
use crate::circuit::{
    build_entangling_circuit, build_extended_circuit, run_circuit, sample_counts, trotterize,
    Circuit, Gate, QubitRole, TrotterPlan,
};
use crate::decoupling::{interleave, DDKind, DDSequence};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_extended_hamiltonian, build_hamiltonian, pauli_decompose, PauliSum};
use crate::linalg::{DensityMatrix, QuantumState, StateVector, C64};
use crate::noise::{monte_carlo_evolve, monte_carlo_observe, monte_carlo_observe_many, Estimate, NoiseModel};
use crate::observables::{coherence_time, uhlmann_fidelity, AxisUnit, CoherenceTime, Curve};

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub experiment: ExperimentKind,
    /// One CSV each, named after the curve label.
    pub curves: Vec<Curve>,
    /// Scalar results recorded in the manifest.
    pub summary: Vec<(String, String)>,
    /// Shot histogram of the readout lines at the last grid point.
    pub counts: Option<BTreeMap<String, usize>>,
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.experiment, kind
        )));
    }
    cfg.validate()
}

fn zero_state(n: usize) -> QuantumState {
    QuantumState::Pure(StateVector::zero(n))
}

fn curve_from(label: String, unit: AxisUnit, times: Vec<f64>, est: &[Estimate]) -> Result<Curve> {
    Curve::new(
        label,
        unit,
        times,
        est.iter().map(|e| e.value).collect(),
        est.iter().map(|e| e.std_error).collect(),
    )
}

/// `exp(-i H t)` compiled with the configured step count; empty at `t = 0`.
fn evolution(sum: &PauliSum, t: f64, steps: usize) -> Result<Circuit> {
    trotterize(sum, &TrotterPlan::new(t, steps)?)
}

/// Apply the configured decoupling sequence on each of `targets`.
fn decouple(cfg: &ExperimentConfig, c: Circuit, targets: &[usize], step: f64) -> Result<Circuit> {
    if cfg.dd.kind == DDKind::None || c.ticks().is_empty() || !(step > 0.0) {
        return Ok(c);
    }
    let span = c.ticks().len() as f64 * step;
    let seq = DDSequence {
        total_window: cfg.dd_window.unwrap_or(span),
        ..cfg.dd
    };
    let mut out = c;
    for &q in targets {
        out = interleave(&out, &seq, q, step)?;
    }
    Ok(out)
}

fn readout(cfg: &ExperimentConfig, c: &Circuit, model: &NoiseModel) -> Result<BTreeMap<String, usize>> {
    let rho = monte_carlo_evolve(c, model, &zero_state(c.n_qubits()))?;
    sample_counts(
        &QuantumState::Mixed(rho),
        &c.measured_qubits(),
        cfg.shots,
        cfg.noise.seed,
    )
}

fn three_qubit_register() -> Result<Circuit> {
    let mut c = Circuit::new(3);
    c.set_role(0, QubitRole::Electron)?;
    c.set_role(1, QubitRole::Nitrogen)?;
    c.set_role(2, QubitRole::Flux)?;
    Ok(c)
}

fn three_qubit_sum(cfg: &ExperimentConfig) -> Result<PauliSum> {
    let h = crate::hamiltonian::HamiltonianParams {
        n_nv: 1,
        ..cfg.hamiltonian
    };
    pauli_decompose(&build_hamiltonian(&h)?)
}

fn extended_sum(cfg: &ExperimentConfig, n_nv: usize) -> Result<PauliSum> {
    let h = crate::hamiltonian::HamiltonianParams {
        n_nv,
        ..cfg.hamiltonian
    };
    pauli_decompose(&build_extended_hamiltonian(&h)?)
}

/// Electron relaxation for three initial preparations: ms=0 (no pulse),
/// ms=+1 (X) and the ms=-1 analog (U3(pi/2, 0, 0)). Each curve is the
/// fidelity of the electron's reduced state with its noise-free counterpart.
pub fn run_relaxation(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(cfg, ExperimentKind::Relaxation)?;
    let sum = three_qubit_sum(cfg)?;
    let times = cfg.grid.values();
    let times_us = cfg.grid.values_us();
    let preps: [(&str, Option<Gate>); 3] = [
        ("relaxation_ms0", None),
        ("relaxation_ms_plus1", Some(Gate::x(0))),
        ("relaxation_ms_minus1", Some(Gate::u3(0, FRAC_PI_2, 0.0, 0.0))),
    ];
    let model = cfg.noise.model(3, &[0]);
    let mut curves = Vec::new();
    for (label, prep) in preps {
        let mut circuits = Vec::with_capacity(times_us.len());
        for &t in &times_us {
            let mut c = three_qubit_register()?;
            if let Some(g) = &prep {
                c.push(g.clone())?;
            }
            c.append(&evolution(&sum, t, cfg.trotter_steps)?)?;
            circuits.push(decouple(cfg, c, &[0], t / cfg.trotter_steps as f64)?);
        }
        let refs: Vec<DensityMatrix> = circuits
            .iter()
            .map(|c| run_circuit(c, &zero_state(3))?.reduced(&[0]))
            .collect::<Result<_>>()?;
        let est = monte_carlo_observe(
            &circuits,
            &model,
            &zero_state(3),
            |_, s| s.reduced(&[0]).map(|r| r.entries().to_vec()).unwrap_or_default(),
            |k, m| {
                DensityMatrix::from_entries_unchecked(m.to_vec())
                    .and_then(|r| uhlmann_fidelity(&r, &refs[k]))
                    .unwrap_or(f64::NAN)
            },
        )?;
        curves.push(curve_from(label.into(), cfg.grid.unit, times.clone(), &est)?);
    }
    let drop = |c: &Curve, t: f64| c.values[0] - c.value_at(t);
    let at = 2.5 / cfg.grid.unit.to_us().unwrap_or(1.0);
    let summary = vec![
        ("drop_ms0_2.5us".to_string(), drop(&curves[0], at).to_string()),
        ("drop_ms_plus1_2.5us".to_string(), drop(&curves[1], at).to_string()),
        ("drop_ms_minus1_2.5us".to_string(), drop(&curves[2], at).to_string()),
        ("reference".to_string(), FIDELITY_REFERENCE.to_string()),
    ];
    Ok(RunOutput {
        experiment: ExperimentKind::Relaxation,
        curves,
        summary,
        counts: None,
    })
}

/// Electron coherence after fan-out, `U1`, `U1^-1` and un-fan-out; the
/// electron ends in |+> when noise-free and field noise acts for `2t`.
pub fn run_coherence_evolution(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(cfg, ExperimentKind::CoherenceEvolution)?;
    let sum = three_qubit_sum(cfg)?;
    let times_us = cfg.grid.values_us();
    let mut circuits = Vec::with_capacity(times_us.len());
    for &t in &times_us {
        let u1 = evolution(&sum, t, cfg.trotter_steps)?;
        let c = build_entangling_circuit(3, &u1, true)?;
        circuits.push(decouple(cfg, c, &[0], t / cfg.trotter_steps as f64)?);
    }
    let model = cfg.noise.model(3, &[0]);
    let est = monte_carlo_observe(
        &circuits,
        &model,
        &zero_state(3),
        |_, s| vec![s.reduced(&[0]).map(|r| r.get(0, 1)).unwrap_or_default()],
        |_, m| (2.0 * m[0].norm()).min(1.0),
    )?;
    let curve = curve_from(
        "coherence_evolution".into(),
        cfg.grid.unit,
        cfg.grid.values(),
        &est,
    )?;
    let f = cfg.grid.unit.to_us().unwrap_or(1.0);
    let summary = vec![
        ("coherence_1us".to_string(), curve.value_at(1.0 / f).to_string()),
        ("coherence_3us".to_string(), curve.value_at(3.0 / f).to_string()),
        ("coherence_4us".to_string(), curve.value_at(4.0 / f).to_string()),
        ("coherence_5us".to_string(), curve.value_at(5.0 / f).to_string()),
    ];
    let counts = Some(readout(cfg, circuits.last().expect("grid has points"), &model)?);
    Ok(RunOutput {
        experiment: ExperimentKind::CoherenceEvolution,
        curves: vec![curve],
        summary,
        counts,
    })
}

/// Target state of every fidelity curve, recorded in the manifest.
pub const FIDELITY_REFERENCE: &str = "noise-free state of the same circuit";

/// Start of the late-time window whose mean defines the fidelity plateau.
pub fn plateau_start(grid: &TimeGrid) -> f64 {
    grid.start + 0.75 * (grid.stop - grid.start)
}

fn extended_circuit_at(cfg: &ExperimentConfig, sum: &PauliSum, n: usize, t: f64, steps: usize) -> Result<(Circuit, Circuit)> {
    let u1 = evolution(sum, t, steps)?;
    let c = build_extended_circuit(n, &u1)?;
    let nv: Vec<usize> = (0..n).collect();
    let c = decouple(cfg, c, &nv, t / steps as f64)?;
    Ok((c, u1))
}

/// Fidelity of the noisy extended register against its noise-free state at
/// each of `times_us`.
pub fn fidelity_estimates(cfg: &ExperimentConfig, times_us: &[f64]) -> Result<Vec<Estimate>> {
    let n = cfg.hamiltonian.n_nv;
    let sum = extended_sum(cfg, n)?;
    let mut circuits = Vec::with_capacity(times_us.len());
    for &t in times_us {
        circuits.push(extended_circuit_at(cfg, &sum, n, t, cfg.trotter_steps)?.0);
    }
    let ideal: Vec<Vec<C64>> = circuits
        .iter()
        .map(|c| match run_circuit(c, &zero_state(n + 1))? {
            QuantumState::Pure(s) => Ok(s.amplitudes().to_vec()),
            QuantumState::Mixed(_) => unreachable!("pure input stays pure"),
        })
        .collect::<Result<_>>()?;
    let nv: Vec<usize> = (0..n).collect();
    monte_carlo_observe(
        &circuits,
        &cfg.noise.model(n + 1, &nv),
        &zero_state(n + 1),
        |k, s| vec![s.sandwich(&ideal[k], &ideal[k])],
        |_, m| m[0].re.clamp(0.0, 1.0),
    )
}

/// Extended register (`n_nv` NV lines plus flux) fidelity over time.
pub fn run_fidelity(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(cfg, ExperimentKind::Fidelity)?;
    let est = fidelity_estimates(cfg, &cfg.grid.values_us())?;
    let curve = curve_from("fidelity".into(), cfg.grid.unit, cfg.grid.values(), &est)?;
    let plateau = curve.tail_mean(plateau_start(&cfg.grid));
    let n = cfg.hamiltonian.n_nv;
    let sum = extended_sum(cfg, n)?;
    let last = *cfg.grid.values_us().last().expect("grid has points");
    let (c, _) = extended_circuit_at(cfg, &sum, n, last, cfg.trotter_steps)?;
    let nv: Vec<usize> = (0..n).collect();
    let counts = Some(readout(cfg, &c, &cfg.noise.model(n + 1, &nv))?);
    Ok(RunOutput {
        experiment: ExperimentKind::Fidelity,
        curves: vec![curve],
        summary: vec![
            ("plateau".to_string(), plateau.to_string()),
            ("reference".to_string(), FIDELITY_REFERENCE.to_string()),
        ],
        counts,
    })
}

/// Branch states `U|0...0>` and `U|1...1>` of the extended register.
fn branches(u1: &Circuit) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = u1.n_qubits();
    let run = |idx: usize| -> Result<Vec<C64>> {
        match run_circuit(u1, &QuantumState::Pure(StateVector::basis(n, idx)))? {
            QuantumState::Pure(s) => {
                let phase = C64::from_polar(1.0, u1.global_phase());
                Ok(s.amplitudes().iter().map(|a| a * phase).collect())
            }
            QuantumState::Mixed(_) => unreachable!("pure input stays pure"),
        }
    };
    Ok((run(0)?, run((1 << n) - 1)?))
}

/// Fixed physical time, varying Trotter step count: fidelity and branch
/// coherence against the step count.
pub fn run_steps_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(cfg, ExperimentKind::StepsSweep)?;
    let n = cfg.hamiltonian.n_nv;
    let sum = extended_sum(cfg, n)?;
    let mut circuits = Vec::new();
    let mut ideal = Vec::new();
    let mut branch = Vec::new();
    for &s in &cfg.sweep_steps {
        let (c, u1) = extended_circuit_at(cfg, &sum, n, cfg.sweep_time, s)?;
        match run_circuit(&c, &zero_state(n + 1))? {
            QuantumState::Pure(v) => ideal.push(v.amplitudes().to_vec()),
            QuantumState::Mixed(_) => unreachable!("pure input stays pure"),
        }
        branch.push(branches(&u1)?);
        circuits.push(c);
    }
    let nv: Vec<usize> = (0..n).collect();
    let est = monte_carlo_observe_many(
        &circuits,
        &cfg.noise.model(n + 1, &nv),
        &zero_state(n + 1),
        |k, s| {
            vec![
                s.sandwich(&ideal[k], &ideal[k]),
                s.sandwich(&branch[k].0, &branch[k].1),
            ]
        },
        |_, m| vec![m[0].re.clamp(0.0, 1.0), (2.0 * m[1].norm()).min(1.0)],
    )?;
    let steps: Vec<f64> = cfg.sweep_steps.iter().map(|&s| s as f64).collect();
    let fid: Vec<Estimate> = est.iter().map(|e| e[0]).collect();
    let coh: Vec<Estimate> = est.iter().map(|e| e[1]).collect();
    let fidelity = curve_from("steps_sweep_fidelity".into(), AxisUnit::Steps, steps.clone(), &fid)?;
    let coherence = curve_from("steps_sweep_coherence".into(), AxisUnit::Steps, steps, &coh)?;
    let summary = vec![
        ("final_fidelity".to_string(), fidelity.values.last().copied().unwrap_or(f64::NAN).to_string()),
        ("final_coherence".to_string(), coherence.values.last().copied().unwrap_or(f64::NAN).to_string()),
        ("reference".to_string(), FIDELITY_REFERENCE.to_string()),
    ];
    Ok(RunOutput {
        experiment: ExperimentKind::StepsSweep,
        curves: vec![fidelity, coherence],
        summary,
        counts: None,
    })
}

/// Branch-coherence decay of the `n`-NV extended register over the grid.
pub fn scaling_curve(cfg: &ExperimentConfig, n: usize) -> Result<Curve> {
    let sum = extended_sum(cfg, n)?;
    let mut circuits = Vec::new();
    let mut branch = Vec::new();
    for &t in &cfg.grid.values_us() {
        let (c, u1) = extended_circuit_at(cfg, &sum, n, t, cfg.trotter_steps)?;
        branch.push(branches(&u1)?);
        circuits.push(c);
    }
    let nv: Vec<usize> = (0..n).collect();
    let est = monte_carlo_observe(
        &circuits,
        &cfg.noise.model(n + 1, &nv),
        &zero_state(n + 1),
        |k, s| vec![s.sandwich(&branch[k].0, &branch[k].1)],
        |_, m| (2.0 * m[0].norm()).min(1.0),
    )?;
    curve_from(format!("scaling_n{n}"), cfg.grid.unit, cfg.grid.values(), &est)
}

/// Threshold crossing; a curve that starts at or below the threshold has
/// coherence time zero.
pub fn crossing(curve: &Curve, threshold: f64) -> Result<CoherenceTime> {
    match coherence_time(curve, threshold) {
        Err(Error::ThresholdAboveStart { .. }) => Ok(CoherenceTime {
            time: curve.times[0],
            crossed: true,
            std_error: 0.0,
        }),
        other => other,
    }
}

/// Per-n decoherence curves and coherence time against n.
pub fn run_scaling(cfg: &ExperimentConfig) -> Result<RunOutput> {
    expect_kind(cfg, ExperimentKind::Scaling)?;
    let mut curves = Vec::new();
    let mut times = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.n_list {
        let curve = scaling_curve(cfg, n)?;
        let ct = crossing(&curve, cfg.threshold)?;
        summary.push((format!("coherence_time_n{n}_{}", cfg.grid.unit), ct.time.to_string()));
        summary.push((format!("crossed_n{n}"), ct.crossed.to_string()));
        times.push(ct);
        curves.push(curve);
    }
    let mut order: Vec<usize> = (0..cfg.n_list.len()).collect();
    order.sort_by_key(|&i| cfg.n_list[i]);
    let summary_curve = Curve::new(
        "scaling_coherence_time",
        AxisUnit::Qubits,
        order.iter().map(|&i| cfg.n_list[i] as f64).collect(),
        order.iter().map(|&i| times[i].time).collect(),
        order.iter().map(|&i| times[i].std_error).collect(),
    )
    .map_err(|_| Error::Config("scaling.n_list must not repeat".into()))?;
    curves.push(summary_curve);
    Ok(RunOutput {
        experiment: ExperimentKind::Scaling,
        curves,
        summary,
        counts: None,
    })
}

/// Evolution time of the exported preset circuits, in us.
pub const PRESET_TIME_US: f64 = 0.05;

/// Named preset circuits: the three-qubit Trotter block, the entangling
/// circuit built on it, and the extended circuit for each NV count.
pub fn preset_circuits(cfg: &ExperimentConfig) -> Result<Vec<(String, Circuit)>> {
    let u1 = evolution(&three_qubit_sum(cfg)?, PRESET_TIME_US, cfg.trotter_steps)?;
    let mut out = vec![
        ("entangling".to_string(), build_entangling_circuit(3, &u1, true)?),
        ("trotter_u1".to_string(), u1),
    ];
    for n in 1..=crate::hamiltonian::MAX_NV {
        let u = evolution(&extended_sum(cfg, n)?, PRESET_TIME_US, cfg.trotter_steps)?;
        out.push((format!("extended_n{n}"), build_extended_circuit(n, &u)?));
    }
    Ok(out)
}

/// Dispatch on the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment {
        ExperimentKind::Relaxation => run_relaxation(cfg),
        ExperimentKind::CoherenceEvolution => run_coherence_evolution(cfg),
        ExperimentKind::Fidelity => run_fidelity(cfg),
        ExperimentKind::StepsSweep => run_steps_sweep(cfg),
        ExperimentKind::Scaling => run_scaling(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(kind);
        cfg.noise.disable();
        cfg.grid.points = 4;
        cfg.sweep_steps = vec![1, 3];
        cfg.n_list = vec![1, 2];
        cfg
    }

    #[test]
    fn noise_free_runs_are_flat_at_one() {
        for kind in ExperimentKind::ALL {
            let out = run_experiment(&quiet(kind)).unwrap();
            for c in out.curves.iter().filter(|c| c.label != "scaling_coherence_time") {
                for v in &c.values {
                    assert!((v - 1.0).abs() < 1e-9, "{} {v}", c.label);
                }
            }
        }
    }

    #[test]
    fn wrong_kind_is_a_config_error() {
        let cfg = quiet(ExperimentKind::Fidelity);
        assert!(matches!(run_scaling(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn echo_on_the_coherence_run_keeps_the_noise_free_value() {
        let mut cfg = quiet(ExperimentKind::CoherenceEvolution);
        cfg.dd = DDSequence::cpmg(2, 1.0);
        let out = run_coherence_evolution(&cfg).unwrap();
        assert!(out.curves[0].values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }
}
