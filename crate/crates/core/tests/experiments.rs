use hybrid_sim::experiments::{
    calibrate_noise, fidelity_config_for, run_coherence_evolution, run_experiment, run_relaxation,
    run_steps_sweep, ExperimentConfig, ExperimentKind, FreeParam,
};
use hybrid_sim::observables::Curve;

fn curve<'a>(curves: &'a [Curve], label: &str) -> &'a Curve {
    curves.iter().find(|c| c.label == label).unwrap_or_else(|| panic!("no curve {label}"))
}

#[test]
fn relaxation_orders_preparations() {
    let out = run_relaxation(&ExperimentConfig::defaults(ExperimentKind::Relaxation)).unwrap();
    let ms0 = curve(&out.curves, "relaxation_ms0");
    let plus = curve(&out.curves, "relaxation_ms_plus1");
    let minus = curve(&out.curves, "relaxation_ms_minus1");
    for c in [ms0, plus, minus] {
        assert!((c.values[0] - 1.0).abs() < 1e-9, "{}", c.label);
    }
    for i in 1..ms0.len() {
        assert!(ms0.values[i] > plus.values[i], "point {i}");
        assert!(minus.values[i] > plus.values[i], "point {i}");
    }
    let drop = 1.0 - plus.value_at(2.5);
    assert!((drop - 0.2).abs() < 0.05, "drop {drop}");
}

#[test]
fn coherence_declines_then_settles() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::CoherenceEvolution);
    let c = &run_coherence_evolution(&cfg).unwrap().curves[0];
    assert!((c.values[0] - 1.0).abs() < 1e-9);
    let (c1, c3) = (c.value_at(1.0), c.value_at(3.0));
    assert!(c3 < c1, "{c3} !< {c1}");
    // the 1-3 us interval falls faster than 0-1 us
    assert!(c1 - c3 > 1.0 - c1);
    assert!((c.value_at(5.0) - c.value_at(4.0)).abs() < 0.05);
}

#[test]
fn steps_sweep_decreases_then_stabilizes() {
    let out = run_steps_sweep(&ExperimentConfig::defaults(ExperimentKind::StepsSweep)).unwrap();
    let f = curve(&out.curves, "steps_sweep_fidelity");
    let c = curve(&out.curves, "steps_sweep_coherence");
    assert!(f.values[1] < f.values[0]);
    let n = f.len();
    for i in n - 3..n {
        let per_100 = (f.values[i] - f.values[i - 1]).abs() / (f.times[i] - f.times[i - 1]) * 100.0;
        assert!(per_100 < 0.01, "tail slope {per_100}");
    }
    assert!(c.value_at(1400.0) < 0.05);
    assert!(c.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn fidelity_drops_within_sixty_microseconds() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Fidelity);
    cfg.set("grid.stop", "0.06").unwrap();
    cfg.set("grid.points", "4").unwrap();
    let f = &run_experiment(&cfg).unwrap().curves[0];
    let last = *f.values.last().unwrap();
    assert!(last < 1.0 - 5.0 * f.std_errors.last().unwrap().max(1e-4), "F(0.06 ms) = {last}");
}

#[test]
fn calibration_stops_when_targets_already_met() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Scaling);
    let report = calibrate_noise(&cfg, &fidelity_config_for(&cfg)).unwrap();
    assert!(report.evaluations <= 2, "{} evaluations", report.evaluations);
    assert!(report.passed);
    assert_eq!(report.targets.len(), 2);
}

#[test]
fn single_parameter_fit_recovers_coherence_time() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Scaling);
    cfg.set("noise.ou.sigma_b", "2e-4").unwrap();
    cfg.set("calibrate.free", "sigma_b").unwrap();
    cfg.set("calibrate.trajectories", "300").unwrap();
    let report = calibrate_noise(&cfg, &fidelity_config_for(&cfg)).unwrap();
    assert_eq!(report.params.len(), 1);
    assert_eq!(report.params[0].0, FreeParam::SigmaB);
    let t = &report.targets[0];
    assert_eq!(t.name, "coherence_time_s");
    assert!(t.residual.abs() < 0.05, "residual {}", t.residual);
    assert!(!report.budget_exhausted);
}
