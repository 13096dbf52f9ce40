//! Dynamical-decoupling sequences and their insertion into a circuit.
//!
//! Pulses are ideal pi rotations placed on tick boundaries. The pulsed line
//! is tracked in a Pauli frame: while the frame is not the identity, every
//! gate touching the line is conjugated by the frame, and a corrective pulse
//! closes the frame before readout. Noise-free behaviour is unchanged while
//! field noise between pulses is refocused.

use std::fmt;
use std::str::FromStr;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DDKind {
    #[default]
    None,
    Echo,
    Cpmg,
    Xy4,
}

impl fmt::Display for DDKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DDKind::None => "none",
            DDKind::Echo => "echo",
            DDKind::Cpmg => "cpmg",
            DDKind::Xy4 => "xy4",
        })
    }
}

impl FromStr for DDKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<DDKind> {
        match s {
            "none" => Ok(DDKind::None),
            "echo" => Ok(DDKind::Echo),
            "cpmg" => Ok(DDKind::Cpmg),
            "xy4" => Ok(DDKind::Xy4),
            other => Err(Error::InvalidSequence(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseAxis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DDSequence {
    pub kind: DDKind,
    pub n_pulses: usize,
    /// us
    pub total_window: f64,
}

impl DDSequence {
    pub fn none() -> DDSequence {
        DDSequence::default()
    }

    pub fn echo(window: f64) -> DDSequence {
        DDSequence {
            kind: DDKind::Echo,
            n_pulses: 1,
            total_window: window,
        }
    }

    pub fn cpmg(n_pulses: usize, window: f64) -> DDSequence {
        DDSequence {
            kind: DDKind::Cpmg,
            n_pulses,
            total_window: window,
        }
    }

    pub fn xy4(n_pulses: usize, window: f64) -> DDSequence {
        DDSequence {
            kind: DDKind::Xy4,
            n_pulses,
            total_window: window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSequence(m));
        match self.kind {
            DDKind::None => return Ok(()),
            DDKind::Echo if self.n_pulses != 1 => {
                return bad(format!("echo has exactly 1 pulse, got {}", self.n_pulses))
            }
            DDKind::Cpmg if self.n_pulses == 0 => return bad("cpmg needs >= 1 pulse".into()),
            DDKind::Xy4 if self.n_pulses == 0 || !self.n_pulses.is_multiple_of(4) => {
                return bad(format!("xy4 needs a multiple of 4 pulses, got {}", self.n_pulses))
            }
            _ => {}
        }
        if !(self.total_window > 0.0) || !self.total_window.is_finite() {
            return bad(format!("window must be > 0, got {}", self.total_window));
        }
        Ok(())
    }

    pub fn axes(&self) -> Vec<PulseAxis> {
        match self.kind {
            DDKind::None => vec![],
            DDKind::Echo => vec![PulseAxis::X],
            DDKind::Cpmg => vec![PulseAxis::Y; self.n_pulses],
            DDKind::Xy4 => (0..self.n_pulses)
                .map(|k| if k % 2 == 0 { PulseAxis::X } else { PulseAxis::Y })
                .collect(),
        }
    }
}

/// `t_k = T (2k - 1) / (2N)` for `k = 1..N`.
pub fn pulse_times(seq: &DDSequence) -> Result<Vec<f64>> {
    seq.validate()?;
    if seq.kind == DDKind::None {
        return Ok(vec![]);
    }
    let n = seq.n_pulses as f64;
    Ok((1..=seq.n_pulses)
        .map(|k| seq.total_window * (2 * k - 1) as f64 / (2.0 * n))
        .collect())
}

/// Single-qubit Pauli frame, phases dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    I,
    X,
    Y,
    Z,
}

impl Frame {
    fn then(self, axis: PulseAxis) -> Frame {
        use Frame::*;
        match (self, axis) {
            (I, PulseAxis::X) => X,
            (I, PulseAxis::Y) => Y,
            (X, PulseAxis::X) | (Y, PulseAxis::Y) => I,
            (X, PulseAxis::Y) | (Y, PulseAxis::X) => Z,
            (Z, PulseAxis::X) => Y,
            (Z, PulseAxis::Y) => X,
        }
    }

    fn gate(self, q: usize) -> Option<Gate> {
        match self {
            Frame::I => None,
            Frame::X => Some(Gate::x(q).as_pulse()),
            Frame::Y => Some(Gate::y(q).as_pulse()),
            Frame::Z => Some(Gate::z(q).as_pulse()),
        }
    }
}

fn pulse(axis: PulseAxis, q: usize) -> Gate {
    match axis {
        PulseAxis::X => Gate::x(q).as_pulse(),
        PulseAxis::Y => Gate::y(q).as_pulse(),
    }
}

/// Insert the sequence on `target`, snapping each pulse to the nearest
/// boundary `m * step_duration` between ticks.
pub fn interleave(c: &Circuit, seq: &DDSequence, target: usize, step_duration: f64) -> Result<Circuit> {
    seq.validate()?;
    if seq.kind == DDKind::None {
        return Ok(c.clone());
    }
    if target >= c.n_qubits() {
        return Err(Error::IndexOutOfRange {
            index: target,
            n_qubits: c.n_qubits(),
        });
    }
    if !(step_duration > 0.0) {
        return Err(Error::InvalidParams(format!(
            "step_duration must be > 0, got {step_duration}"
        )));
    }
    let n_ticks = c.ticks().len();
    let span = n_ticks as f64 * step_duration;
    if seq.total_window > span * (1.0 + 1e-12) {
        return Err(Error::WindowTooLong {
            window: seq.total_window,
            span,
        });
    }
    // pulses_at[m] fire right after tick m (m = 0: before the first tick)
    let mut pulses_at: Vec<Vec<PulseAxis>> = vec![Vec::new(); n_ticks + 1];
    for (t, axis) in pulse_times(seq)?.into_iter().zip(seq.axes()) {
        let m = ((t / step_duration).round() as usize).min(n_ticks);
        pulses_at[m].push(axis);
    }

    let mut out = Circuit::new(c.n_qubits());
    for (&q, &role) in c.roles() {
        out.set_role(q, role)?;
    }
    out.set_global_phase(c.global_phase());
    let mut frame = Frame::I;
    let fire = |out: &mut Circuit, frame: &mut Frame, m: usize| -> Result<()> {
        for &axis in &pulses_at[m] {
            out.push(pulse(axis, target))?;
            *frame = frame.then(axis);
        }
        Ok(())
    };

    let ticks = c.ticks();
    let mut ti = 0;
    let mut fired_start = false;
    for (index, g) in c.gates().iter().enumerate() {
        while ti < n_ticks && ticks[ti].after <= index {
            if !fired_start {
                fire(&mut out, &mut frame, 0)?;
                fired_start = true;
            }
            out.tick(ticks[ti].duration);
            ti += 1;
            fire(&mut out, &mut frame, ti)?;
        }
        if g.is_measurement() {
            if let Some(fix) = frame.gate(target) {
                out.push(fix)?;
                frame = Frame::I;
            }
            out.push(g.clone())?;
            continue;
        }
        match frame.gate(target) {
            Some(f) if g.targets.contains(&target) => {
                out.push(f.clone())?;
                out.push(g.clone())?;
                out.push(f)?;
            }
            _ => out.push(g.clone())?,
        }
    }
    while ti < n_ticks {
        if !fired_start {
            fire(&mut out, &mut frame, 0)?;
            fired_start = true;
        }
        out.tick(ticks[ti].duration);
        ti += 1;
        fire(&mut out, &mut frame, ti)?;
    }
    if let Some(fix) = frame.gate(target) {
        out.push(fix)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{run_circuit, GateKind};
    use crate::linalg::{QuantumState, StateVector};

    #[test]
    fn pulse_time_formulas() {
        assert_eq!(pulse_times(&DDSequence::echo(2.0)).unwrap(), vec![1.0]);
        assert_eq!(pulse_times(&DDSequence::cpmg(2, 4.0)).unwrap(), vec![1.0, 3.0]);
        let xy = DDSequence::xy4(4, 8.0);
        assert_eq!(pulse_times(&xy).unwrap(), vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(
            xy.axes(),
            vec![PulseAxis::X, PulseAxis::Y, PulseAxis::X, PulseAxis::Y]
        );
        assert!(pulse_times(&DDSequence::none()).unwrap().is_empty());
    }

    #[test]
    fn invalid_sequences() {
        for s in [
            DDSequence { kind: DDKind::Echo, n_pulses: 2, total_window: 1.0 },
            DDSequence::cpmg(0, 1.0),
            DDSequence::xy4(6, 1.0),
            DDSequence::cpmg(2, 0.0),
        ] {
            assert!(matches!(pulse_times(&s), Err(Error::InvalidSequence(_))), "{s:?}");
        }
        assert!("bogus".parse::<DDKind>().is_err());
        assert_eq!("xy4".parse::<DDKind>().unwrap(), DDKind::Xy4);
    }

    #[test]
    fn none_leaves_circuit_unchanged() {
        let mut c = Circuit::idle(1, 3, 1.0);
        c.push(Gate::h(0)).unwrap();
        assert_eq!(interleave(&c, &DDSequence::none(), 0, 1.0).unwrap(), c);
    }

    #[test]
    fn window_longer_than_span_is_rejected() {
        let c = Circuit::idle(1, 4, 0.5);
        assert!(matches!(
            interleave(&c, &DDSequence::echo(3.0), 0, 0.5),
            Err(Error::WindowTooLong { .. })
        ));
    }

    #[test]
    fn echo_snaps_to_middle_and_closes_the_frame() {
        let c = Circuit::idle(1, 4, 0.5);
        let d = interleave(&c, &DDSequence::echo(2.0), 0, 0.5).unwrap();
        assert_eq!(d.gate_count(), 2);
        assert_eq!(d.ticks().len(), 4);
        assert_eq!(d.ticks()[1].after, 0);
        assert_eq!(d.ticks()[2].after, 1);
        assert!(d.gates().iter().all(|g| g.ideal && g.kind == GateKind::X));
    }

    #[test]
    fn gates_in_a_nontrivial_frame_are_conjugated() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.tick(1.0);
        c.push(Gate::rz(0, 0.3)).unwrap();
        c.push(Gate::cnot(0, 1)).unwrap();
        c.tick(1.0);
        c.push(Gate::ry(1, 0.2)).unwrap();
        c.push(Gate::measure(0)).unwrap();
        let d = interleave(&c, &DDSequence::echo(2.0), 0, 1.0).unwrap();
        assert_eq!(d.gates().last().unwrap().kind, GateKind::MeasureZ);
        let ideal = c.unitary();
        assert!(d.unitary().phase_aligned_distance(&ideal) < 1e-12);
    }

    #[test]
    fn every_sequence_preserves_noise_free_output() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        for k in 0..8 {
            c.push(Gate::rx(0, 0.1 * k as f64)).unwrap();
            c.push(Gate::cnot(1, 0)).unwrap();
            c.tick(0.25);
        }
        let init = QuantumState::Pure(StateVector::zero(2));
        let ideal = run_circuit(&c, &init).unwrap().to_density_matrix();
        for seq in [
            DDSequence::echo(2.0),
            DDSequence::cpmg(1, 2.0),
            DDSequence::cpmg(3, 2.0),
            DDSequence::xy4(4, 2.0),
            DDSequence::xy4(8, 1.5),
        ] {
            let d = interleave(&c, &seq, 0, 0.25).unwrap();
            let got = run_circuit(&d, &init).unwrap().to_density_matrix();
            assert!(got.max_abs_diff(&ideal) < 1e-12, "{seq:?}");
            assert!(d.unitary().phase_aligned_distance(&c.unitary()) < 1e-9, "{seq:?}");
        }
    }
}
