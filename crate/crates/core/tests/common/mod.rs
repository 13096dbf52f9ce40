//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use hybrid_sim::circuit::Circuit;
use hybrid_sim::linalg::{Operator, QuantumState, StateVector, C64};
use hybrid_sim::noise::{monte_carlo_observe, Estimate, NoiseModel};

/// `exp(-i H t)` by scaling and squaring around a plain Taylor series.
pub fn taylor_expm(h: &Operator, t: f64) -> Operator {
    let dim = h.dim();
    let a = h.scale(C64::new(0.0, -t));
    let norm = (0..dim)
        .map(|r| (0..dim).map(|c| a.get(r, c).norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut s = 1.0;
    while norm / s > 0.25 {
        s *= 2.0;
        squarings += 1;
    }
    let a = a.scale(C64::new(1.0 / s, 0.0));
    let mut sum = Operator::identity(dim);
    let mut term = Operator::identity(dim);
    for k in 1..=30 {
        term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Coherence of |+> under stationary OU frequency noise.
pub fn ou_coherence(sigma: f64, tau_c: f64, t: f64) -> f64 {
    let x = t / tau_c;
    (-(sigma * tau_c).powi(2) * ((-x).exp() - 1.0 + x)).exp()
}

/// Coherence of |+> under a Gaussian static detuning.
pub fn static_coherence(sigma: f64, t: f64) -> f64 {
    (-(sigma * t).powi(2) / 2.0).exp()
}

pub fn plus_state() -> QuantumState {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    QuantumState::Pure(StateVector::from_amplitudes(vec![C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap())
}

/// Trajectory-averaged `2|rho01|` of qubit 0 after each circuit.
pub fn mean_coherence(circuits: &[Circuit], model: &NoiseModel, initial: &QuantumState) -> Vec<Estimate> {
    monte_carlo_observe(
        circuits,
        model,
        initial,
        |_, s| vec![s.reduced(&[0]).unwrap().get(0, 1)],
        |_, m| 2.0 * m[0].norm(),
    )
    .unwrap()
}
