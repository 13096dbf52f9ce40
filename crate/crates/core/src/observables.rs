//! Populations, coherence, fidelity and threshold-crossing summaries.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_function, DensityMatrix, QuantumState, C64};

/// Unit of a curve's abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisUnit {
    Microseconds,
    Milliseconds,
    Seconds,
    Steps,
    Qubits,
}

impl AxisUnit {
    pub fn name(self) -> &'static str {
        match self {
            AxisUnit::Microseconds => "us",
            AxisUnit::Milliseconds => "ms",
            AxisUnit::Seconds => "s",
            AxisUnit::Steps => "steps",
            AxisUnit::Qubits => "n_nv",
        }
    }

    /// Factor converting this unit to microseconds.
    pub fn to_us(self) -> Option<f64> {
        match self {
            AxisUnit::Microseconds => Some(1.0),
            AxisUnit::Milliseconds => Some(1e3),
            AxisUnit::Seconds => Some(1e6),
            AxisUnit::Steps | AxisUnit::Qubits => None,
        }
    }
}

impl fmt::Display for AxisUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub unit: AxisUnit,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl Curve {
    pub fn new(
        label: impl Into<String>,
        unit: AxisUnit,
        times: Vec<f64>,
        values: Vec<f64>,
        std_errors: Vec<f64>,
    ) -> Result<Curve> {
        if values.len() != times.len() || std_errors.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                found: values.len().max(std_errors.len()),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("curve times must be strictly increasing".into()));
        }
        Ok(Curve {
            label: label.into(),
            unit,
            times,
            values,
            std_errors,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation; clamps outside the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }

    /// Mean of the values with `times >= from`.
    pub fn tail_mean(&self, from: f64) -> f64 {
        let tail: Vec<f64> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .collect();
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    for i in 1..xs.len() {
        if x <= xs[i] {
            let f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return ys[i - 1] + f * (ys[i] - ys[i - 1]);
        }
    }
    ys[ys.len() - 1]
}

fn reduced_qubit(rho: &DensityMatrix, qubit: usize) -> Result<DensityMatrix> {
    if qubit >= rho.n_qubits() {
        return Err(Error::IndexOutOfRange {
            index: qubit,
            n_qubits: rho.n_qubits(),
        });
    }
    rho.partial_trace(&[qubit])
}

/// Probability of finding `qubit` in `level` (0 or 1).
pub fn population(rho: &DensityMatrix, qubit: usize, level: u8) -> Result<f64> {
    if level > 1 {
        return Err(Error::InvalidParams(format!("level must be 0 or 1, got {level}")));
    }
    let r = reduced_qubit(rho, qubit)?;
    let l = level as usize;
    Ok(r.get(l, l).re.clamp(0.0, 1.0))
}

/// `2 |rho_01|` of the reduced single-qubit state.
pub fn coherence(rho: &DensityMatrix, qubit: usize) -> Result<f64> {
    let r = reduced_qubit(rho, qubit)?;
    Ok((2.0 * r.get(0, 1).norm()).min(1.0))
}

/// `<psi|rho|psi>` for pure targets, Uhlmann fidelity for mixed ones.
pub fn state_fidelity(rho: &DensityMatrix, target: &QuantumState) -> Result<f64> {
    if rho.n_qubits() != target.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: 1 << target.n_qubits(),
        });
    }
    match target {
        QuantumState::Pure(psi) => {
            let a = psi.amplitudes();
            Ok(rho.sandwich(a, a).re.clamp(0.0, 1.0))
        }
        QuantumState::Mixed(sigma) => uhlmann_fidelity(rho, sigma),
    }
}

/// `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    if rho.dim() == 2 {
        // Tr(rho sigma) + 2 sqrt(det rho det sigma)
        let det = |m: &DensityMatrix| (m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0)).re;
        let overlap: C64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| rho.get(i, j) * sigma.get(j, i))
            .sum();
        let f = overlap.re + 2.0 * (det(rho).max(0.0) * det(sigma).max(0.0)).sqrt();
        return Ok(f.clamp(0.0, 1.0));
    }
    let a = rho.to_operator();
    let sqrt_rho = hermitian_function(&a, |l| C64::new(l.max(0.0).sqrt(), 0.0));
    let m = sqrt_rho.matmul(&sigma.to_operator()).matmul(&sqrt_rho);
    let m = m.add(&m.adjoint()).scale(C64::new(0.5, 0.0));
    let (eig, _) = hermitian_eigen(&m);
    let top = eig.iter().copied().fold(0.0, f64::max);
    let clip = top * 1e-13;
    let root: f64 = eig.iter().filter(|&&l| l > clip).map(|l| l.sqrt()).sum();
    Ok((root * root).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceTime {
    /// Interpolated crossing time; `f64::INFINITY` when never crossed.
    pub time: f64,
    pub crossed: bool,
    /// Propagated from the curve's standard errors through the local slope.
    pub std_error: f64,
}

/// First downward crossing of `threshold`, linearly interpolated.
pub fn coherence_time(curve: &Curve, threshold: f64) -> Result<CoherenceTime> {
    let Some(&start) = curve.values.first() else {
        return Err(Error::InvalidParams("empty curve".into()));
    };
    if !(start > threshold) {
        return Err(Error::ThresholdAboveStart { threshold, start });
    }
    for i in 1..curve.len() {
        let (v0, v1) = (curve.values[i - 1], curve.values[i]);
        if v1 <= threshold {
            let (t0, t1) = (curve.times[i - 1], curve.times[i]);
            let f = (v0 - threshold) / (v0 - v1);
            let time = t0 + f * (t1 - t0);
            let slope = (v1 - v0) / (t1 - t0);
            let se = curve.std_errors[i - 1] * (1.0 - f) + curve.std_errors[i] * f;
            return Ok(CoherenceTime {
                time,
                crossed: true,
                std_error: se / slope.abs(),
            });
        }
    }
    Ok(CoherenceTime {
        time: f64::INFINITY,
        crossed: false,
        std_error: 0.0,
    })
}
