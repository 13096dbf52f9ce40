//! Classical field noise (Ornstein-Uhlenbeck and static detuning), gate
//! channels (depolarizing, amplitude damping) and the trajectory engine.
//!
//! Field noise enters as `RZ(phi)` at every circuit tick, where `phi` is the
//! integral of the sampled field over the tick. Channels force a density
//! matrix; otherwise trajectories stay pure.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circuit::{apply_gate, apply_phase, Circuit};
use crate::error::{Error, Result};
use crate::linalg::{bit, DensityMatrix, QuantumState, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Correlation time, us.
    pub tau_c: f64,
    /// Stationary standard deviation, rad/us.
    pub sigma_b: f64,
    /// Sampling interval, us.
    pub dt: f64,
}

impl OuParams {
    /// Sampling interval defaults to `tau_c / 5`.
    pub fn new(tau_c: f64, sigma_b: f64) -> OuParams {
        OuParams {
            tau_c,
            sigma_b,
            dt: tau_c / 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_c > 0.0) || !self.tau_c.is_finite() {
            return Err(Error::InvalidParams(format!("ou tau_c must be > 0, got {}", self.tau_c)));
        }
        if !(self.sigma_b >= 0.0) || !self.sigma_b.is_finite() {
            return Err(Error::InvalidParams(format!(
                "ou sigma_b must be >= 0, got {}",
                self.sigma_b
            )));
        }
        if !(self.dt > 0.0) || self.dt > self.tau_c / 5.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidParams(format!(
                "ou dt must be in (0, tau_c/5], got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticBathParams {
    /// Standard deviation of the per-trajectory detuning, rad/us.
    pub sigma_static: f64,
}

impl StaticBathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_static >= 0.0) || !self.sigma_static.is_finite() {
            return Err(Error::InvalidParams(format!(
                "sigma_static must be >= 0, got {}",
                self.sigma_static
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateNoiseParams {
    pub p_depol_1q: f64,
    pub p_depol_2q: f64,
    /// Amplitude-damping time in us; `None` disables damping.
    pub t1: Option<f64>,
}

impl GateNoiseParams {
    pub fn validate(&self) -> Result<()> {
        for p in [self.p_depol_1q, self.p_depol_2q] {
            check_probability(p)?;
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return Err(Error::InvalidParams(format!("t1 must be > 0, got {t1}")));
            }
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.p_depol_1q == 0.0 && self.p_depol_2q == 0.0 && self.t1.is_none()
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub ou: BTreeMap<usize, OuParams>,
    pub static_bath: BTreeMap<usize, StaticBathParams>,
    pub gate: Option<GateNoiseParams>,
    pub n_trajectories: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> NoiseModel {
        NoiseModel {
            ou: BTreeMap::new(),
            static_bath: BTreeMap::new(),
            gate: None,
            n_trajectories: 1,
            base_seed: 0,
            threads: None,
        }
    }

    pub fn with_ou(mut self, qubits: &[usize], p: OuParams) -> Self {
        for &q in qubits {
            self.ou.insert(q, p);
        }
        self
    }

    pub fn with_static(mut self, qubits: &[usize], sigma_static: f64) -> Self {
        for &q in qubits {
            self.static_bath.insert(q, StaticBathParams { sigma_static });
        }
        self
    }

    pub fn with_gate_noise(mut self, g: GateNoiseParams) -> Self {
        self.gate = Some(g);
        self
    }

    pub fn with_trajectories(mut self, n: usize, base_seed: u64) -> Self {
        self.n_trajectories = n;
        self.base_seed = base_seed;
        self
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidParams("n_trajectories must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParams("threads must be >= 1".into()));
        }
        for (&q, p) in &self.ou {
            check_index(q, n_qubits)?;
            p.validate()?;
        }
        for (&q, p) in &self.static_bath {
            check_index(q, n_qubits)?;
            p.validate()?;
        }
        if let Some(g) = &self.gate {
            g.validate()?;
        }
        Ok(())
    }

    /// True when trajectories differ from one another.
    pub fn is_stochastic(&self) -> bool {
        self.ou.values().any(|p| p.sigma_b > 0.0)
            || self.static_bath.values().any(|p| p.sigma_static > 0.0)
    }

    pub fn needs_density_matrix(&self) -> bool {
        self.gate.is_some_and(|g| !g.is_trivial())
    }

    /// Trajectories actually run: one when nothing is random.
    pub fn effective_trajectories(&self) -> usize {
        if self.is_stochastic() {
            self.n_trajectories
        } else {
            1
        }
    }

    fn noisy_lines(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.ou.keys().chain(self.static_bath.keys()).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn check_index(q: usize, n_qubits: usize) -> Result<()> {
    if q >= n_qubits {
        return Err(Error::IndexOutOfRange { index: q, n_qubits });
    }
    Ok(())
}

fn ou_path(p: &OuParams, n_steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return b;
    }
    let decay = (-p.dt / p.tau_c).exp();
    let kick = p.sigma_b * (1.0 - decay * decay).sqrt();
    let mut x = p.sigma_b * rng.sample::<f64, _>(StandardNormal);
    b.push(x);
    for _ in 1..n_steps {
        x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
        b.push(x);
    }
    b
}

/// Exact-discretization OU samples `b[0..n_steps]` at spacing `p.dt`.
pub fn sample_ou_trajectory(p: &OuParams, n_steps: usize, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ou_path(p, n_steps, &mut rng))
}

/// Per-step RZ angles `b[k] * dt`.
pub fn dephasing_angles(trajectory: &[f64], dt: f64) -> Vec<f64> {
    trajectory.iter().map(|b| b * dt).collect()
}

pub(crate) fn depolarize_in_place(rho: &mut DensityMatrix, qubit: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    let n = rho.n_qubits();
    let d = rho.dim();
    let m = bit(n, qubit);
    let keep = 1.0 - 2.0 * p / 3.0;
    let swap = 2.0 * p / 3.0;
    let off = 1.0 - 4.0 * p / 3.0;
    let data = rho.entries_mut();
    for r in (0..d).filter(|r| r & m == 0) {
        for c in (0..d).filter(|c| c & m == 0) {
            let i00 = r * d + c;
            let i11 = (r | m) * d + (c | m);
            let (a, b) = (data[i00], data[i11]);
            data[i00] = a * keep + b * swap;
            data[i11] = b * keep + a * swap;
            data[r * d + (c | m)] *= off;
            data[(r | m) * d + c] *= off;
        }
    }
}

pub(crate) fn amplitude_damp_in_place(rho: &mut DensityMatrix, qubit: usize, gamma: f64) {
    if gamma == 0.0 {
        return;
    }
    let n = rho.n_qubits();
    let d = rho.dim();
    let m = bit(n, qubit);
    let s = (1.0 - gamma).sqrt();
    let data = rho.entries_mut();
    for r in (0..d).filter(|r| r & m == 0) {
        for c in (0..d).filter(|c| c & m == 0) {
            let i11 = (r | m) * d + (c | m);
            let b = data[i11];
            data[r * d + c] += b * gamma;
            data[i11] = b * (1.0 - gamma);
            data[r * d + (c | m)] *= s;
            data[(r | m) * d + c] *= s;
        }
    }
}

/// `rho -> (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)` on one qubit.
pub fn apply_depolarizing(rho: &DensityMatrix, qubit: usize, p: f64) -> Result<DensityMatrix> {
    check_probability(p)?;
    check_index(qubit, rho.n_qubits())?;
    let mut out = rho.clone();
    depolarize_in_place(&mut out, qubit, p);
    Ok(out)
}

/// Amplitude damping with `gamma = 1 - exp(-duration / t1)`.
pub fn apply_amplitude_damping(
    rho: &DensityMatrix,
    qubit: usize,
    duration: f64,
    t1: f64,
) -> Result<DensityMatrix> {
    if !(duration >= 0.0) || !(t1 > 0.0) {
        return Err(Error::InvalidParams(format!(
            "amplitude damping needs duration >= 0 and t1 > 0, got {duration}, {t1}"
        )));
    }
    check_index(qubit, rho.n_qubits())?;
    let mut out = rho.clone();
    amplitude_damp_in_place(&mut out, qubit, 1.0 - (-duration / t1).exp());
    Ok(out)
}

/// Accumulated field phase of one line, `Phi(t) = int_0^t b(s) ds`.
#[derive(Debug, Clone, PartialEq)]
struct PhaseTrack {
    detuning: f64,
    dt: f64,
    samples: Vec<f64>,
    /// Trapezoid integral up to each sample.
    cumulative: Vec<f64>,
}

impl PhaseTrack {
    fn phase(&self, t: f64) -> f64 {
        let mut phi = self.detuning * t;
        if self.samples.len() >= 2 {
            let pos = t / self.dt;
            let k = (pos.floor() as usize).min(self.samples.len() - 2);
            let tau = t - k as f64 * self.dt;
            let (b0, b1) = (self.samples[k], self.samples[k + 1]);
            phi += self.cumulative[k] + b0 * tau + (b1 - b0) * tau * tau / (2.0 * self.dt);
        }
        phi
    }
}

/// One draw of every classical noise source, long enough for `horizon` us.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    tracks: BTreeMap<usize, PhaseTrack>,
}

const OU_STREAM: u64 = 0;
const STATIC_STREAM: u64 = 1;

impl Realization {
    /// Trajectory `index` draws from seed `base_seed + index`, with one
    /// independent stream per (line, source).
    pub fn sample(model: &NoiseModel, horizon: f64, index: usize) -> Realization {
        let seed = model.base_seed.wrapping_add(index as u64);
        let mut tracks = BTreeMap::new();
        for q in model.noisy_lines() {
            let mut track = PhaseTrack {
                detuning: 0.0,
                dt: 1.0,
                samples: Vec::new(),
                cumulative: Vec::new(),
            };
            if let Some(p) = model.static_bath.get(&q) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 * q as u64 + STATIC_STREAM);
                track.detuning = p.sigma_static * rng.sample::<f64, _>(StandardNormal);
            }
            if let Some(p) = model.ou.get(&q) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(2 * q as u64 + OU_STREAM);
                let n = (horizon / p.dt).ceil() as usize + 2;
                let samples = ou_path(p, n, &mut rng);
                let mut cumulative = Vec::with_capacity(n);
                let mut acc = 0.0;
                cumulative.push(0.0);
                for w in samples.windows(2) {
                    acc += 0.5 * (w[0] + w[1]) * p.dt;
                    cumulative.push(acc);
                }
                track.dt = p.dt;
                track.samples = samples;
                track.cumulative = cumulative;
            }
            tracks.insert(q, track);
        }
        Realization { tracks }
    }

    /// Field phase accrued by line `qubit` over `[t0, t1]`.
    pub fn phase(&self, qubit: usize, t0: f64, t1: f64) -> f64 {
        self.tracks
            .get(&qubit)
            .map_or(0.0, |tr| tr.phase(t1) - tr.phase(t0))
    }
}

fn initial_for(model: &NoiseModel, initial: &QuantumState) -> QuantumState {
    if model.needs_density_matrix() {
        initial.clone().into_mixed()
    } else {
        initial.clone()
    }
}

/// Run one circuit under a fixed realization.
pub fn evolve_trajectory(
    c: &Circuit,
    model: &NoiseModel,
    initial: &QuantumState,
    realization: &Realization,
) -> Result<QuantumState> {
    if initial.n_qubits() != c.n_qubits() {
        return Err(Error::RegisterMismatch {
            expected: c.n_qubits(),
            found: initial.n_qubits(),
        });
    }
    let gate_noise = model.gate.filter(|g| !g.is_trivial());
    let mut state = initial_for(model, initial);
    let ticks = c.ticks();
    let lines: Vec<usize> = realization.tracks.keys().copied().collect();
    let mut t = 0.0;
    let mut ti = 0;
    let mut tick = |state: &mut QuantumState, duration: f64| {
        let t_next = t + duration;
        for &q in &lines {
            let phi = realization.phase(q, t, t_next);
            if phi != 0.0 {
                apply_phase(
                    state,
                    q,
                    C64::from_polar(1.0, -phi / 2.0),
                    C64::from_polar(1.0, phi / 2.0),
                );
            }
        }
        if let (Some(t1), QuantumState::Mixed(rho)) = (gate_noise.and_then(|g| g.t1), &mut *state) {
            let gamma = 1.0 - (-duration / t1).exp();
            for q in 0..rho.n_qubits() {
                amplitude_damp_in_place(rho, q, gamma);
            }
        }
        t = t_next;
    };
    for (i, g) in c.gates().iter().enumerate() {
        while ti < ticks.len() && ticks[ti].after <= i {
            tick(&mut state, ticks[ti].duration);
            ti += 1;
        }
        apply_gate(&mut state, g);
        if let (Some(noise), QuantumState::Mixed(rho)) = (gate_noise, &mut state) {
            if !g.ideal && !g.is_measurement() {
                let p = if g.targets.len() == 1 {
                    noise.p_depol_1q
                } else {
                    noise.p_depol_2q
                };
                for &q in &g.targets {
                    depolarize_in_place(rho, q, p);
                }
            }
        }
    }
    while ti < ticks.len() {
        tick(&mut state, ticks[ti].duration);
        ti += 1;
    }
    Ok(state)
}

/// State of trajectory `index` for a single circuit.
pub fn run_trajectory(
    c: &Circuit,
    model: &NoiseModel,
    initial: &QuantumState,
    index: usize,
) -> Result<QuantumState> {
    model.validate(c.n_qubits())?;
    let realization = Realization::sample(model, c.duration(), index);
    evolve_trajectory(c, model, initial, &realization)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Trajectory-averaged density matrix.
pub fn monte_carlo_evolve(
    c: &Circuit,
    model: &NoiseModel,
    initial: &QuantumState,
) -> Result<DensityMatrix> {
    model.validate(c.n_qubits())?;
    if initial.n_qubits() != c.n_qubits() {
        return Err(Error::RegisterMismatch {
            expected: c.n_qubits(),
            found: initial.n_qubits(),
        });
    }
    let n = model.effective_trajectories();
    const CHUNK: usize = 256;
    let mut sum = DensityMatrix::zeros(c.n_qubits());
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let states: Vec<DensityMatrix> = in_pool(model.threads, || {
            (start..end)
                .into_par_iter()
                .map(|j| {
                    let r = Realization::sample(model, c.duration(), j);
                    evolve_trajectory(c, model, initial, &r).map(|s| s.to_density_matrix())
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for s in &states {
            sum.add_scaled(s, 1.0);
        }
        start = end;
    }
    let scale = 1.0 / n as f64;
    for x in sum.entries_mut() {
        *x *= scale;
    }
    Ok(sum)
}

/// Ensemble estimate with a jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Run every circuit under the same per-trajectory realization, reduce each
/// trajectory's final state to linear features with `observe`, average them
/// in trajectory order, and map the mean through `finish`.
pub fn monte_carlo_observe<F, G>(
    circuits: &[Circuit],
    model: &NoiseModel,
    initial: &QuantumState,
    observe: F,
    finish: G,
) -> Result<Vec<Estimate>>
where
    F: Fn(usize, &QuantumState) -> Vec<C64> + Sync,
    G: Fn(usize, &[C64]) -> f64 + Sync,
{
    let many = monte_carlo_observe_many(circuits, model, initial, observe, |k, m| vec![finish(k, m)])?;
    Ok(many.into_iter().map(|v| v[0]).collect())
}

/// As [`monte_carlo_observe`] with several derived quantities per circuit.
pub fn monte_carlo_observe_many<F, G>(
    circuits: &[Circuit],
    model: &NoiseModel,
    initial: &QuantumState,
    observe: F,
    finish: G,
) -> Result<Vec<Vec<Estimate>>>
where
    F: Fn(usize, &QuantumState) -> Vec<C64> + Sync,
    G: Fn(usize, &[C64]) -> Vec<f64> + Sync,
{
    let Some(first) = circuits.first() else {
        return Ok(Vec::new());
    };
    for c in circuits {
        if c.n_qubits() != first.n_qubits() || initial.n_qubits() != c.n_qubits() {
            return Err(Error::RegisterMismatch {
                expected: initial.n_qubits(),
                found: c.n_qubits(),
            });
        }
    }
    model.validate(first.n_qubits())?;
    let horizon = circuits.iter().map(Circuit::duration).fold(0.0, f64::max);
    let n = model.effective_trajectories();

    // features[j][k] = observation of circuit k in trajectory j
    let features: Vec<Vec<Vec<C64>>> = in_pool(model.threads, || {
        (0..n)
            .into_par_iter()
            .map(|j| {
                let r = Realization::sample(model, horizon, j);
                circuits
                    .iter()
                    .enumerate()
                    .map(|(k, c)| evolve_trajectory(c, model, initial, &r).map(|s| observe(k, &s)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut out = Vec::with_capacity(circuits.len());
    for k in 0..circuits.len() {
        let width = features[0][k].len();
        let mut sum = vec![C64::new(0.0, 0.0); width];
        for traj in &features {
            for (s, x) in sum.iter_mut().zip(&traj[k]) {
                *s += x;
            }
        }
        let mean: Vec<C64> = sum.iter().map(|s| s / n as f64).collect();
        let values = finish(k, &mean);
        let mut errors = vec![0.0; values.len()];
        if n >= 2 {
            // jackknife over trajectories
            let loo: Vec<Vec<f64>> = features
                .iter()
                .map(|traj| {
                    let m: Vec<C64> = sum
                        .iter()
                        .zip(&traj[k])
                        .map(|(s, x)| (s - x) / (n - 1) as f64)
                        .collect();
                    finish(k, &m)
                })
                .collect();
            for (q, e) in errors.iter_mut().enumerate() {
                let avg = loo.iter().map(|v| v[q]).sum::<f64>() / n as f64;
                let ss: f64 = loo.iter().map(|v| (v[q] - avg) * (v[q] - avg)).sum();
                *e = ((n - 1) as f64 / n as f64 * ss).sqrt();
            }
        }
        out.push(
            values
                .into_iter()
                .zip(errors)
                .map(|(value, std_error)| Estimate { value, std_error })
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{run_circuit, Gate};
    use crate::linalg::{StateVector, ONE, ZERO};

    fn plus() -> QuantumState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        QuantumState::Pure(StateVector::from_amplitudes(vec![C64::new(s, 0.0); 2]).unwrap())
    }

    fn rho1(a: [C64; 4]) -> DensityMatrix {
        DensityMatrix::from_entries(a.to_vec()).unwrap()
    }

    #[test]
    fn ou_zero_sigma_is_flat_and_seeded() {
        let p = OuParams::new(10.0, 0.0);
        assert!(sample_ou_trajectory(&p, 50, 3).unwrap().iter().all(|&b| b == 0.0));
        let q = OuParams::new(10.0, 1.0);
        assert_eq!(
            sample_ou_trajectory(&q, 20, 9).unwrap(),
            sample_ou_trajectory(&q, 20, 9).unwrap()
        );
        assert_ne!(
            sample_ou_trajectory(&q, 20, 9).unwrap(),
            sample_ou_trajectory(&q, 20, 10).unwrap()
        );
    }

    #[test]
    fn ou_params_are_checked() {
        assert!(OuParams { tau_c: 1.0, sigma_b: 1.0, dt: 0.5 }.validate().is_err());
        assert!(OuParams { tau_c: 0.0, sigma_b: 1.0, dt: 0.0 }.validate().is_err());
        assert!(OuParams { tau_c: 1.0, sigma_b: -1.0, dt: 0.1 }.validate().is_err());
        assert!(OuParams::new(1.0, 1.0).validate().is_ok());
    }

    #[test]
    fn dephasing_angles_are_linear() {
        assert_eq!(dephasing_angles(&[0.0; 3], 0.1), vec![0.0; 3]);
        let total: f64 = dephasing_angles(&[2.0; 5], 0.25).iter().sum();
        assert!((total - 2.5).abs() < 1e-15);
        let a = dephasing_angles(&[1.0, -3.0], 0.5);
        let b = dephasing_angles(&[2.0, -6.0], 0.5);
        assert_eq!(b, a.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    }

    #[test]
    fn depolarizing_channel_algebra() {
        let zero = rho1([ONE, ZERO, ZERO, ZERO]);
        assert_eq!(apply_depolarizing(&zero, 0, 0.0).unwrap(), zero);
        let mixed = apply_depolarizing(&zero, 0, 0.75).unwrap();
        assert!(mixed.max_abs_diff(&DensityMatrix::maximally_mixed(1)) < 1e-12);
        let p = 0.3;
        let out = apply_depolarizing(&zero, 0, p).unwrap();
        assert!((out.get(0, 0).re - (1.0 - 2.0 * p / 3.0)).abs() < 1e-15);
        assert!(matches!(apply_depolarizing(&zero, 0, 1.5), Err(Error::InvalidProbability(_))));
        assert!(apply_depolarizing(&zero, 1, 0.1).is_err());
    }

    #[test]
    fn depolarizing_matches_pauli_sum_on_two_qubits() {
        use crate::linalg::{embed_single, gates};
        let psi = StateVector::normalized(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.5),
            C64::new(0.7, 0.0),
            C64::new(0.1, -0.3),
        ])
        .unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let p = 0.37;
        let op = rho.to_operator();
        let mut expect = op.scale(C64::new(1.0 - p, 0.0));
        for m in [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()] {
            let e = embed_single(&m, 1, 2);
            expect = expect.add(&e.matmul(&op).matmul(&e).scale(C64::new(p / 3.0, 0.0)));
        }
        let got = apply_depolarizing(&rho, 1, p).unwrap().to_operator();
        assert!(got.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn amplitude_damping_algebra() {
        let one = rho1([ZERO, ZERO, ZERO, ONE]);
        assert_eq!(apply_amplitude_damping(&one, 0, 0.0, 5.0).unwrap(), one);
        let out = apply_amplitude_damping(&one, 0, 5.0, 5.0).unwrap();
        assert!((out.get(1, 1).re - (-1.0f64).exp()).abs() < 1e-10);
        assert!((out.trace().re - 1.0).abs() < 1e-12);
        let h = C64::new(0.5, 0.0);
        let plus = rho1([h, h, h, h]);
        let out = apply_amplitude_damping(&plus, 0, 2.0, 5.0).unwrap();
        assert!((out.get(0, 1).norm() / 0.5 - (-0.2f64).exp()).abs() < 1e-12);
        assert!(apply_amplitude_damping(&one, 0, -1.0, 5.0).is_err());
        assert!(apply_amplitude_damping(&one, 0, 1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_model_reproduces_ideal_run() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cnot(0, 1)).unwrap();
        c.tick(1.0);
        c.push(Gate::ry(1, 0.4)).unwrap();
        let init = QuantumState::Pure(StateVector::zero(2));
        let ideal = run_circuit(&c, &init).unwrap().to_density_matrix();
        let got = monte_carlo_evolve(&c, &NoiseModel::noiseless(), &init).unwrap();
        assert!(got.max_abs_diff(&ideal) < 1e-12);
    }

    #[test]
    fn deterministic_channels_need_no_sampling() {
        let mut c = Circuit::new(1);
        c.push(Gate::x(0)).unwrap();
        c.tick(2.0);
        let g = GateNoiseParams {
            p_depol_1q: 0.1,
            p_depol_2q: 0.0,
            t1: Some(4.0),
        };
        let model = NoiseModel::noiseless().with_gate_noise(g).with_trajectories(50, 1);
        assert_eq!(model.effective_trajectories(), 1);
        let got = monte_carlo_evolve(&c, &model, &QuantumState::Pure(StateVector::zero(1))).unwrap();
        let one = rho1([ZERO, ZERO, ZERO, ONE]);
        let expect =
            apply_amplitude_damping(&apply_depolarizing(&one, 0, 0.1).unwrap(), 0, 2.0, 4.0).unwrap();
        assert!(got.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn ideal_pulses_skip_depolarizing() {
        let mut c = Circuit::new(1);
        c.push(Gate::x(0).as_pulse()).unwrap();
        let model = NoiseModel::noiseless().with_gate_noise(GateNoiseParams {
            p_depol_1q: 0.5,
            ..Default::default()
        });
        let got = monte_carlo_evolve(&c, &model, &QuantumState::Pure(StateVector::zero(1))).unwrap();
        assert!((got.get(1, 1).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phase_track_integrates_piecewise_linear_field() {
        let model = NoiseModel::noiseless()
            .with_ou(&[0], OuParams::new(5.0, 2.0))
            .with_trajectories(1, 4);
        let r = Realization::sample(&model, 10.0, 0);
        let tr = &r.tracks[&0];
        let fine = 20000;
        let h = 10.0 / fine as f64;
        let field = |t: f64| {
            let k = ((t / tr.dt) as usize).min(tr.samples.len() - 2);
            let f = t / tr.dt - k as f64;
            tr.samples[k] * (1.0 - f) + tr.samples[k + 1] * f
        };
        let numeric: f64 = (0..fine).map(|i| field((i as f64 + 0.5) * h) * h).sum();
        assert!((r.phase(0, 0.0, 10.0) - numeric).abs() < 1e-6);
        let split = r.phase(0, 0.0, 3.3) + r.phase(0, 3.3, 10.0);
        assert!((split - r.phase(0, 0.0, 10.0)).abs() < 1e-12);
        assert_eq!(r.phase(1, 0.0, 10.0), 0.0);
    }

    #[test]
    fn static_dephasing_is_gaussian() {
        let sigma = 0.8;
        let t = 1.5;
        let c = Circuit::idle(1, 3, t / 3.0);
        let model = NoiseModel::noiseless()
            .with_static(&[0], sigma)
            .with_trajectories(4000, 17);
        let est = monte_carlo_observe(
            &[c],
            &model,
            &plus(),
            |_, s| vec![s.sandwich(&[ONE, ZERO], &[ZERO, ONE])],
            |_, m| 2.0 * m[0].norm(),
        )
        .unwrap();
        let exact = (-sigma * sigma * t * t / 2.0).exp();
        assert!((est[0].value - exact).abs() < 4.0 * est[0].std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn trajectory_order_and_threads_do_not_change_the_average() {
        let c = Circuit::idle(1, 4, 0.5);
        let mut model = NoiseModel::noiseless()
            .with_ou(&[0], OuParams::new(1.0, 1.0))
            .with_static(&[0], 0.3)
            .with_trajectories(40, 5);
        let init = plus();
        let avg = monte_carlo_evolve(&c, &model, &init).unwrap();
        let mut order: Vec<usize> = (0..40).collect();
        order.reverse();
        order.swap(3, 17);
        let mut sum = DensityMatrix::zeros(1);
        for j in order {
            sum.add_scaled(&run_trajectory(&c, &model, &init, j).unwrap().to_density_matrix(), 1.0 / 40.0);
        }
        assert!(sum.max_abs_diff(&avg) < 1e-14);
        model.threads = Some(2);
        assert_eq!(monte_carlo_evolve(&c, &model, &init).unwrap(), avg);
    }

    #[test]
    fn register_mismatch_is_reported() {
        let c = Circuit::idle(2, 1, 1.0);
        let init = QuantumState::Pure(StateVector::zero(1));
        assert!(matches!(
            monte_carlo_evolve(&c, &NoiseModel::noiseless(), &init),
            Err(Error::RegisterMismatch { .. })
        ));
    }
}
