//! Gates, circuits, the first-order Trotter compiler, the preset
//! entangling circuits, and shot sampling.

mod qasm;

pub use qasm::{export_qasm, parse_qasm};

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::{Pauli, PauliString, PauliSum, MAX_NV};
use crate::linalg::{
    apply_1q, apply_cnot, apply_diag_1q, gates, Operator, QuantumState, C64, ONE, ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    U1,
    U3,
    CNOT,
    MeasureZ,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::CNOT => 2,
            _ => 1,
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::U1 => 1,
            GateKind::U3 => 3,
            _ => 0,
        }
    }

    /// OpenQASM 2.0 mnemonic.
    pub fn qasm_name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::RX => "rx",
            GateKind::RY => "ry",
            GateKind::RZ => "rz",
            GateKind::U1 => "u1",
            GateKind::U3 => "u3",
            GateKind::CNOT => "cx",
            GateKind::MeasureZ => "measure",
        }
    }

    pub fn from_qasm_name(name: &str) -> Result<GateKind> {
        Ok(match name {
            "h" => GateKind::H,
            "x" => GateKind::X,
            "y" => GateKind::Y,
            "z" => GateKind::Z,
            "rx" => GateKind::RX,
            "ry" => GateKind::RY,
            "rz" => GateKind::RZ,
            "u1" => GateKind::U1,
            "u3" => GateKind::U3,
            "cx" => GateKind::CNOT,
            "measure" => GateKind::MeasureZ,
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

/// A gate on explicit qubit indices. `ideal` marks zero-duration control
/// pulses that bypass the gate-noise channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub params: Vec<f64>,
    pub ideal: bool,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Result<Gate> {
        if targets.len() != kind.arity() {
            return Err(Error::InvalidParams(format!(
                "{} takes {} qubit(s), got {}",
                kind.qasm_name(),
                kind.arity(),
                targets.len()
            )));
        }
        if params.len() != kind.n_params() {
            return Err(Error::InvalidParams(format!(
                "{} takes {} angle(s), got {}",
                kind.qasm_name(),
                kind.n_params(),
                params.len()
            )));
        }
        if kind == GateKind::CNOT && targets[0] == targets[1] {
            return Err(Error::DuplicateIndex(targets[0]));
        }
        if let Some(p) = params.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidParams(format!("angle {p} is not finite")));
        }
        Ok(Gate {
            kind,
            targets,
            params,
            ideal: false,
        })
    }

    fn fixed(kind: GateKind, targets: Vec<usize>, params: Vec<f64>) -> Gate {
        Gate {
            kind,
            targets,
            params,
            ideal: false,
        }
    }

    pub fn h(q: usize) -> Gate {
        Self::fixed(GateKind::H, vec![q], vec![])
    }
    pub fn x(q: usize) -> Gate {
        Self::fixed(GateKind::X, vec![q], vec![])
    }
    pub fn y(q: usize) -> Gate {
        Self::fixed(GateKind::Y, vec![q], vec![])
    }
    pub fn z(q: usize) -> Gate {
        Self::fixed(GateKind::Z, vec![q], vec![])
    }
    pub fn rx(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RX, vec![q], vec![theta])
    }
    pub fn ry(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RY, vec![q], vec![theta])
    }
    pub fn rz(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RZ, vec![q], vec![theta])
    }
    pub fn u1(q: usize, lambda: f64) -> Gate {
        Self::fixed(GateKind::U1, vec![q], vec![lambda])
    }
    pub fn u3(q: usize, theta: f64, phi: f64, lambda: f64) -> Gate {
        Self::fixed(GateKind::U3, vec![q], vec![theta, phi, lambda])
    }
    pub fn cnot(control: usize, target: usize) -> Gate {
        Self::fixed(GateKind::CNOT, vec![control, target], vec![])
    }
    pub fn measure(q: usize) -> Gate {
        Self::fixed(GateKind::MeasureZ, vec![q], vec![])
    }

    /// Same gate flagged as an ideal control pulse.
    pub fn as_pulse(mut self) -> Gate {
        self.ideal = true;
        self
    }

    pub fn is_measurement(&self) -> bool {
        self.kind == GateKind::MeasureZ
    }

    /// Exact inverse as a single gate.
    pub fn inverse(&self) -> Gate {
        let p = &self.params;
        let params = match self.kind {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::U1 => vec![-p[0]],
            GateKind::U3 => vec![-p[0], -p[2], -p[1]],
            _ => vec![],
        };
        Gate {
            kind: self.kind,
            targets: self.targets.clone(),
            params,
            ideal: self.ideal,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.qasm_name())?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            write!(f, "({})", ps.join(","))?;
        }
        let ts: Vec<String> = self.targets.iter().map(|t| format!("q[{t}]")).collect();
        write!(f, " {}", ts.join(","))
    }
}

/// 2x2 row-major matrix of a single-qubit gate.
fn single_qubit_matrix(kind: GateKind, p: &[f64]) -> [C64; 4] {
    let cis = |a: f64| C64::from_polar(1.0, a);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => [
            C64::new(s2, 0.0),
            C64::new(s2, 0.0),
            C64::new(s2, 0.0),
            C64::new(-s2, 0.0),
        ],
        GateKind::X => [ZERO, ONE, ONE, ZERO],
        GateKind::Y => [ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO],
        GateKind::Z => [ONE, ZERO, ZERO, -ONE],
        GateKind::RX => {
            let (c, s) = ((p[0] / 2.0).cos(), (p[0] / 2.0).sin());
            [C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)]
        }
        GateKind::RY => {
            let (c, s) = ((p[0] / 2.0).cos(), (p[0] / 2.0).sin());
            [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]
        }
        GateKind::RZ => [cis(-p[0] / 2.0), ZERO, ZERO, cis(p[0] / 2.0)],
        GateKind::U1 => [ONE, ZERO, ZERO, cis(p[0])],
        GateKind::U3 => {
            let (theta, phi, lambda) = (p[0], p[1], p[2]);
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            [
                C64::new(c, 0.0),
                -cis(lambda) * s,
                cis(phi) * s,
                cis(phi + lambda) * c,
            ]
        }
        GateKind::CNOT | GateKind::MeasureZ => unreachable!("not a single-qubit unitary"),
    }
}

/// Unitary of a gate on its own targets (dimension `2^arity`).
pub fn gate_matrix(g: &Gate) -> Result<Operator> {
    match g.kind {
        GateKind::MeasureZ => Err(Error::UnknownKind(
            "measure has no unitary matrix".to_string(),
        )),
        GateKind::CNOT => Ok(gates::cnot()),
        kind => Operator::new(2, single_qubit_matrix(kind, &g.params).to_vec()),
    }
}

/// Apply a gate in place. Measurements are no-ops here.
pub(crate) fn apply_gate(state: &mut QuantumState, g: &Gate) {
    match g.kind {
        GateKind::MeasureZ => {}
        GateKind::CNOT => match state {
            QuantumState::Pure(s) => {
                let n = s.n_qubits();
                apply_cnot(s.amplitudes_mut(), n, g.targets[0], g.targets[1]);
            }
            QuantumState::Mixed(r) => r.apply_cnot_in_place(g.targets[0], g.targets[1]),
        },
        GateKind::Z | GateKind::RZ | GateKind::U1 => {
            let m = single_qubit_matrix(g.kind, &g.params);
            apply_phase(state, g.targets[0], m[0], m[3]);
        }
        kind => {
            let m = single_qubit_matrix(kind, &g.params);
            match state {
                QuantumState::Pure(s) => {
                    let n = s.n_qubits();
                    apply_1q(s.amplitudes_mut(), n, g.targets[0], &m);
                }
                QuantumState::Mixed(r) => r.apply_1q_in_place(g.targets[0], &m),
            }
        }
    }
}

pub(crate) fn apply_phase(state: &mut QuantumState, qubit: usize, d0: C64, d1: C64) {
    match state {
        QuantumState::Pure(s) => {
            let n = s.n_qubits();
            apply_diag_1q(s.amplitudes_mut(), n, qubit, d0, d1);
        }
        QuantumState::Mixed(r) => r.apply_diag_1q_in_place(qubit, d0, d1),
    }
}

/// Physical role of a register line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QubitRole {
    Electron,
    Nitrogen,
    Flux,
    Nv(usize),
}

impl QubitRole {
    pub fn name(self) -> String {
        match self {
            QubitRole::Electron => "electron".into(),
            QubitRole::Nitrogen => "nitrogen".into(),
            QubitRole::Flux => "flux".into(),
            QubitRole::Nv(i) => format!("nv{i}"),
        }
    }

    pub fn parse(s: &str) -> Option<QubitRole> {
        match s {
            "electron" => Some(QubitRole::Electron),
            "nitrogen" => Some(QubitRole::Nitrogen),
            "flux" => Some(QubitRole::Flux),
            _ => s.strip_prefix("nv")?.parse().ok().map(QubitRole::Nv),
        }
    }

    /// Electron-spin lines exposed to the spin-bath noise.
    pub fn is_spin_line(self) -> bool {
        matches!(self, QubitRole::Electron | QubitRole::Nv(_))
    }
}

/// Simulation-clock marker: after the first `after` gates, `duration` us elapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub after: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    roles: BTreeMap<usize, QubitRole>,
    ticks: Vec<Tick>,
    global_phase: f64,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Circuit {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            roles: BTreeMap::new(),
            ticks: Vec::new(),
            global_phase: 0.0,
        }
    }

    /// Gate-free circuit with `steps` ticks of `step_duration`.
    pub fn idle(n_qubits: usize, steps: usize, step_duration: f64) -> Circuit {
        let mut c = Circuit::new(n_qubits);
        for _ in 0..steps {
            c.tick(step_duration);
        }
        c
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn ticks(&self) -> &[Tick] {
        &self.ticks
    }

    pub fn roles(&self) -> &BTreeMap<usize, QubitRole> {
        &self.roles
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn set_global_phase(&mut self, phase: f64) {
        self.global_phase = phase;
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Total simulated time in us.
    pub fn duration(&self) -> f64 {
        self.ticks.iter().map(|t| t.duration).sum()
    }

    pub fn set_role(&mut self, qubit: usize, role: QubitRole) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        self.roles.insert(qubit, role);
        Ok(())
    }

    pub fn role(&self, qubit: usize) -> Option<QubitRole> {
        self.roles.get(&qubit).copied()
    }

    pub fn qubits_with(&self, pred: impl Fn(QubitRole) -> bool) -> Vec<usize> {
        self.roles
            .iter()
            .filter(|(_, &r)| pred(r))
            .map(|(&q, _)| q)
            .collect()
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        self.gates
            .iter()
            .filter(|g| g.is_measurement())
            .map(|g| g.targets[0])
            .collect()
    }

    fn has_measurement(&self) -> bool {
        self.gates.last().is_some_and(|g| g.is_measurement())
    }

    /// Append a gate, enforcing register bounds and terminal-measurement rules.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        for &t in &gate.targets {
            if t >= self.n_qubits {
                return Err(Error::IndexOutOfRange {
                    index: t,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if gate.is_measurement() {
            if self.measured_qubits().contains(&gate.targets[0]) {
                return Err(Error::InvalidParams(format!(
                    "qubit {} measured twice",
                    gate.targets[0]
                )));
            }
        } else if self.has_measurement() {
            return Err(Error::InvalidParams(
                "measurements must come after every other gate".into(),
            ));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn tick(&mut self, duration: f64) {
        self.ticks.push(Tick {
            after: self.gates.len(),
            duration,
        });
    }

    /// Append `other` (same register), shifting its ticks and adding its phase.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::RegisterMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let offset = self.gates.len();
        let mut ti = 0;
        for (i, g) in other.gates.iter().enumerate() {
            while ti < other.ticks.len() && other.ticks[ti].after == i {
                self.tick(other.ticks[ti].duration);
                ti += 1;
            }
            self.push(g.clone())?;
        }
        for t in &other.ticks[ti..] {
            self.ticks.push(Tick {
                after: offset + t.after,
                duration: t.duration,
            });
        }
        self.global_phase += other.global_phase;
        Ok(())
    }

    /// Inverse circuit with mirrored clock; measurements are dropped.
    pub fn inverse(&self) -> Circuit {
        let body: Vec<&Gate> = self.gates.iter().filter(|g| !g.is_measurement()).collect();
        let m = body.len();
        let mut out = Circuit::new(self.n_qubits);
        out.roles = self.roles.clone();
        out.global_phase = -self.global_phase;
        let mut ticks: Vec<Tick> = self
            .ticks
            .iter()
            .rev()
            .map(|t| Tick {
                after: m - t.after.min(m),
                duration: t.duration,
            })
            .collect();
        ticks.sort_by_key(|t| t.after);
        out.gates = body.iter().rev().map(|g| g.inverse()).collect();
        out.ticks = ticks;
        out
    }

    /// Full unitary of the non-measurement gates including the global phase.
    pub fn unitary(&self) -> Operator {
        let dim = 1 << self.n_qubits;
        let mut columns = Vec::with_capacity(dim);
        for col in 0..dim {
            let mut state = QuantumState::Pure(crate::linalg::StateVector::basis(self.n_qubits, col));
            for g in &self.gates {
                apply_gate(&mut state, g);
            }
            match state {
                QuantumState::Pure(s) => columns.push(s.amplitudes().to_vec()),
                QuantumState::Mixed(_) => unreachable!(),
            }
        }
        let phase = C64::from_polar(1.0, self.global_phase);
        let mut op = Operator::zeros(dim);
        for (col, amps) in columns.iter().enumerate() {
            for (row, a) in amps.iter().enumerate() {
                op.set(row, col, a * phase);
            }
        }
        op
    }

    pub(crate) fn from_parts(
        n_qubits: usize,
        gates: Vec<Gate>,
        roles: BTreeMap<usize, QubitRole>,
        ticks: Vec<Tick>,
        global_phase: f64,
    ) -> Circuit {
        Circuit {
            n_qubits,
            gates,
            roles,
            ticks,
            global_phase,
        }
    }
}

/// First-order product-formula schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterPlan {
    /// Evolution time in us.
    pub total_time: f64,
    pub steps: usize,
}

impl TrotterPlan {
    pub fn new(total_time: f64, steps: usize) -> Result<TrotterPlan> {
        let plan = TrotterPlan { total_time, steps };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidParams("Trotter steps must be >= 1".into()));
        }
        if !(self.total_time >= 0.0) || !self.total_time.is_finite() {
            return Err(Error::InvalidParams(format!(
                "Trotter total_time must be finite and >= 0, got {}",
                self.total_time
            )));
        }
        Ok(())
    }

    pub fn step_duration(&self) -> f64 {
        self.total_time / self.steps as f64
    }
}

/// Gates for `exp(-i c P dt)`: basis change, CNOT ladder onto the last
/// active qubit, `RZ(2 c dt)`, then the mirror image.
fn pauli_exponential(term: &PauliString, dt: f64, out: &mut Vec<Gate>) {
    let support = term.support();
    let Some(&last) = support.last() else {
        return;
    };
    for &q in &support {
        match term.letters[q] {
            Pauli::X => out.push(Gate::h(q)),
            Pauli::Y => out.push(Gate::rx(q, FRAC_PI_2)),
            _ => {}
        }
    }
    for w in support.windows(2) {
        out.push(Gate::cnot(w[0], w[1]));
    }
    out.push(Gate::rz(last, 2.0 * term.coefficient * dt));
    for w in support.windows(2).rev() {
        out.push(Gate::cnot(w[0], w[1]));
    }
    for &q in support.iter().rev() {
        match term.letters[q] {
            Pauli::X => out.push(Gate::h(q)),
            Pauli::Y => out.push(Gate::rx(q, -FRAC_PI_2)),
            _ => {}
        }
    }
}

/// Compile `exp(-i H t)` into gates with one tick per Trotter step.
pub fn trotterize(terms: &PauliSum, plan: &TrotterPlan) -> Result<Circuit> {
    if terms.is_empty() {
        return Err(Error::EmptySum);
    }
    plan.validate()?;
    let mut circuit = Circuit::new(terms.n_qubits);
    if plan.total_time == 0.0 {
        return Ok(circuit);
    }
    let dt = plan.step_duration();
    let ordered = terms.ordered_terms();
    let mut step_gates = Vec::new();
    for term in &ordered {
        pauli_exponential(term, dt, &mut step_gates);
    }
    for _ in 0..plan.steps {
        for g in &step_gates {
            circuit.push(g.clone())?;
        }
        circuit.tick(dt);
    }
    circuit.set_global_phase(-terms.identity_coefficient() * plan.total_time);
    Ok(circuit)
}

/// Electron = 0, nitrogen = 1, flux = 2 register with a GHZ fan-out from the
/// electron, `u1`, optionally its inverse plus the mirrored fan-out, and a
/// Z readout on the electron only.
pub fn build_entangling_circuit(
    n_qubits: usize,
    u1: &Circuit,
    include_inverse: bool,
) -> Result<Circuit> {
    if n_qubits != 3 {
        return Err(Error::RegisterMismatch {
            expected: 3,
            found: n_qubits,
        });
    }
    if u1.n_qubits() != 3 {
        return Err(Error::RegisterMismatch {
            expected: 3,
            found: u1.n_qubits(),
        });
    }
    let mut c = Circuit::new(3);
    c.set_role(0, QubitRole::Electron)?;
    c.set_role(1, QubitRole::Nitrogen)?;
    c.set_role(2, QubitRole::Flux)?;
    c.push(Gate::h(0))?;
    c.push(Gate::cnot(0, 1))?;
    c.push(Gate::cnot(0, 2))?;
    c.append(u1)?;
    if include_inverse {
        c.append(&u1.inverse())?;
        c.push(Gate::cnot(0, 2))?;
        c.push(Gate::cnot(0, 1))?;
    }
    c.push(Gate::measure(0))?;
    Ok(c)
}

/// `n_nv` NV lines then the flux line: H on flux, CNOT fan-out onto each NV,
/// `u1`, flux readout.
pub fn build_extended_circuit(n_nv: usize, u1: &Circuit) -> Result<Circuit> {
    let mut c = extended_preparation(n_nv)?;
    if u1.n_qubits() != n_nv + 1 {
        return Err(Error::RegisterMismatch {
            expected: n_nv + 1,
            found: u1.n_qubits(),
        });
    }
    c.append(u1)?;
    c.push(Gate::measure(n_nv))?;
    Ok(c)
}

/// State preparation of the extended circuit alone.
pub fn extended_preparation(n_nv: usize) -> Result<Circuit> {
    if !(1..=MAX_NV).contains(&n_nv) {
        return Err(Error::InvalidParams(format!(
            "n_nv must be in [1, {MAX_NV}], got {n_nv}"
        )));
    }
    let flux = n_nv;
    let mut c = Circuit::new(n_nv + 1);
    for i in 0..n_nv {
        c.set_role(i, QubitRole::Nv(i))?;
    }
    c.set_role(flux, QubitRole::Flux)?;
    c.push(Gate::h(flux))?;
    for i in 0..n_nv {
        c.push(Gate::cnot(flux, i))?;
    }
    Ok(c)
}

/// Noise-free execution. Measurement gates only mark readout lines.
pub fn run_circuit(c: &Circuit, initial: &QuantumState) -> Result<QuantumState> {
    if initial.n_qubits() != c.n_qubits() {
        return Err(Error::RegisterMismatch {
            expected: c.n_qubits(),
            found: initial.n_qubits(),
        });
    }
    let mut state = initial.clone();
    for g in c.gates() {
        apply_gate(&mut state, g);
    }
    Ok(state)
}

/// Born-rule marginal over `qubits`, indexed by the bitstring read in list order.
pub fn marginal_probabilities(state: &QuantumState, qubits: &[usize]) -> Result<Vec<f64>> {
    let n = state.n_qubits();
    for &q in qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, n_qubits: n });
        }
    }
    let k = qubits.len();
    let mut out = vec![0.0; 1 << k];
    for (idx, p) in state.probabilities().into_iter().enumerate() {
        let local: usize = qubits
            .iter()
            .enumerate()
            .filter(|(_, &q)| idx & crate::linalg::bit(n, q) != 0)
            .map(|(b, _)| 1 << (k - 1 - b))
            .sum();
        out[local] += p.max(0.0);
    }
    Ok(out)
}

/// Multinomial shot sampling of `qubits`; deterministic for a given seed.
pub fn sample_counts(
    state: &QuantumState,
    qubits: &[usize],
    shots: usize,
    seed: u64,
) -> Result<BTreeMap<String, usize>> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be >= 1".into()));
    }
    let probs = marginal_probabilities(state, qubits)?;
    let k = qubits.len();
    let dist = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidState(format!("bad probabilities: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = vec![0usize; probs.len()];
    for _ in 0..shots {
        tally[dist.sample(&mut rng)] += 1;
    }
    Ok(tally
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(idx, c)| (format!("{idx:0k$b}"), c))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, pauli_decompose, HamiltonianParams};
    use crate::linalg::{matrix_exponential, DensityMatrix, StateVector};
    use std::f64::consts::PI;

    fn pure(n: usize) -> QuantumState {
        QuantumState::Pure(StateVector::zero(n))
    }

    fn amps(s: &QuantumState) -> Vec<C64> {
        match s {
            QuantumState::Pure(v) => v.amplitudes().to_vec(),
            _ => panic!("expected pure state"),
        }
    }

    #[test]
    fn u1_zero_is_identity_and_h_is_involution() {
        let u = gate_matrix(&Gate::u1(0, 0.0)).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(2)) < 1e-15);
        let h = gate_matrix(&Gate::h(0)).unwrap();
        assert!(h.matmul(&h).max_abs_diff(&Operator::identity(2)) < 1e-15);
    }

    #[test]
    fn u3_pi_0_pi_is_x() {
        let u = gate_matrix(&Gate::u3(0, PI, 0.0, PI)).unwrap();
        assert!(u.max_abs_diff(&gates::pauli_x()) < 1e-12);
    }

    #[test]
    fn u3_with_zero_phases_is_ry() {
        let a = gate_matrix(&Gate::u3(0, 0.77, 0.0, 0.0)).unwrap();
        let b = gate_matrix(&Gate::ry(0, 0.77)).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn every_gate_matrix_is_unitary_and_inverse_is_exact() {
        let gs = [
            Gate::h(0),
            Gate::x(0),
            Gate::y(0),
            Gate::z(0),
            Gate::rx(0, 0.3),
            Gate::ry(0, -1.1),
            Gate::rz(0, 2.5),
            Gate::u1(0, 0.9),
            Gate::u3(0, 0.4, 1.3, -2.2),
            Gate::cnot(0, 1),
        ];
        for g in gs {
            let u = gate_matrix(&g).unwrap();
            assert!(u.is_unitary(1e-12), "{g}");
            let inv = gate_matrix(&g.inverse()).unwrap();
            assert!(inv.matmul(&u).max_abs_diff(&Operator::identity(u.dim())) < 1e-12, "{g}");
        }
        assert!(matches!(gate_matrix(&Gate::measure(0)), Err(Error::UnknownKind(_))));
    }

    #[test]
    fn gate_constructor_checks_arity() {
        assert!(Gate::new(GateKind::CNOT, vec![0], vec![]).is_err());
        assert!(Gate::new(GateKind::U3, vec![0], vec![1.0]).is_err());
        assert!(Gate::new(GateKind::H, vec![0], vec![1.0]).is_err());
        assert!(Gate::new(GateKind::CNOT, vec![1, 1], vec![]).is_err());
        assert!(Gate::new(GateKind::RZ, vec![0], vec![0.5]).is_ok());
    }

    #[test]
    fn measurement_rules() {
        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::measure(0)).unwrap();
        assert!(c.push(Gate::measure(0)).is_err());
        assert!(c.push(Gate::x(1)).is_err());
        c.push(Gate::measure(1)).unwrap();
        assert!(matches!(c.push(Gate::x(2)), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn zero_time_trotterization_is_empty() {
        let sum = PauliSum::new(1, vec![PauliString::parse("Z", 1.0).unwrap()]).unwrap();
        let c = trotterize(&sum, &TrotterPlan::new(0.0, 4).unwrap()).unwrap();
        assert!(c.is_empty());
        let empty = PauliSum::new(1, vec![]).unwrap();
        assert!(matches!(
            trotterize(&empty, &TrotterPlan::new(1.0, 1).unwrap()),
            Err(Error::EmptySum)
        ));
    }

    #[test]
    fn single_z_term_compiles_to_one_rz() {
        let (c, t) = (1.3, 0.7);
        let sum = PauliSum::new(1, vec![PauliString::parse("Z", c).unwrap()]).unwrap();
        let circ = trotterize(&sum, &TrotterPlan::new(t, 1).unwrap()).unwrap();
        assert_eq!(circ.gates(), &[Gate::rz(0, 2.0 * c * t)]);
        let exact = matrix_exponential(&sum.to_operator(), t).unwrap();
        assert!(circ.unitary().max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn pauli_exponentials_match_exact_for_every_letter_pattern() {
        for label in ["XZY", "YIX", "ZZZ", "IYI", "XXI", "IIZ"] {
            let sum = PauliSum::new(3, vec![PauliString::parse(label, 0.37).unwrap()]).unwrap();
            let circ = trotterize(&sum, &TrotterPlan::new(1.9, 1).unwrap()).unwrap();
            let exact = matrix_exponential(&sum.to_operator(), 1.9).unwrap();
            assert!(circ.unitary().max_abs_diff(&exact) < 1e-12, "{label}");
        }
    }

    #[test]
    fn identity_term_becomes_global_phase() {
        let sum = PauliSum::new(
            1,
            vec![
                PauliString::parse("I", 2.0).unwrap(),
                PauliString::parse("X", 0.5).unwrap(),
            ],
        )
        .unwrap();
        let circ = trotterize(&sum, &TrotterPlan::new(0.3, 1).unwrap()).unwrap();
        assert_eq!(circ.gate_count(), 3);
        let exact = matrix_exponential(&sum.to_operator(), 0.3).unwrap();
        assert!(circ.unitary().max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn commuting_sum_is_exact_in_one_step() {
        let p = HamiltonianParams {
            delta: 0.0,
            ..HamiltonianParams::default()
        };
        let h = build_hamiltonian(&p).unwrap();
        let sum = pauli_decompose(&h).unwrap();
        let circ = trotterize(&sum, &TrotterPlan::new(0.05, 1).unwrap()).unwrap();
        let exact = matrix_exponential(&h, 0.05).unwrap();
        assert!(circ.unitary().max_abs_diff(&exact) < 1e-9);
    }

    #[test]
    fn inverse_circuit_undoes_and_mirrors_ticks() {
        let h = build_hamiltonian(&HamiltonianParams::default()).unwrap();
        let sum = pauli_decompose(&h).unwrap();
        let u1 = trotterize(&sum, &TrotterPlan::new(0.02, 3).unwrap()).unwrap();
        let mut both = u1.clone();
        both.append(&u1.inverse()).unwrap();
        assert!(both.unitary().max_abs_diff(&Operator::identity(8)) < 1e-10);
        assert_eq!(both.ticks().len(), 6);
        assert!((both.duration() - 0.04).abs() < 1e-15);
        let inv = u1.inverse();
        assert_eq!(inv.ticks()[0].after, 0);
        assert_eq!(inv.ticks().last().unwrap().after, 2 * u1.gate_count() / 3);
    }

    #[test]
    fn ghz_preparation() {
        let c = build_entangling_circuit(3, &Circuit::new(3), false).unwrap();
        let out = run_circuit(&c, &pure(3)).unwrap();
        let a = amps(&out);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((a[0].re - s).abs() < 1e-15 && (a[7].re - s).abs() < 1e-15);
        let p = marginal_probabilities(&out, &[0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert_eq!(c.measured_qubits(), vec![0]);
    }

    #[test]
    fn entangling_gate_count_with_inverse() {
        let h = build_hamiltonian(&HamiltonianParams::default()).unwrap();
        let u1 = trotterize(&pauli_decompose(&h).unwrap(), &TrotterPlan::new(0.01, 2).unwrap())
            .unwrap();
        let c = build_entangling_circuit(3, &u1, true).unwrap();
        assert_eq!(c.gate_count(), 3 + 2 * u1.gate_count() + 1 + 2);
        let with = run_circuit(&c, &pure(3)).unwrap();
        let without = run_circuit(&build_entangling_circuit(3, &Circuit::new(3), false).unwrap(), &pure(3)).unwrap();
        let a = marginal_probabilities(&with, &[0]).unwrap();
        let b = marginal_probabilities(&without, &[0]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-10);
        assert!(build_entangling_circuit(4, &u1, true).is_err());
        assert!(matches!(
            build_entangling_circuit(3, &Circuit::new(2), true),
            Err(Error::RegisterMismatch { .. })
        ));
    }

    #[test]
    fn extended_circuit_shapes() {
        let c = build_extended_circuit(1, &Circuit::new(2)).unwrap();
        let p = marginal_probabilities(&run_circuit(&c, &pure(2)).unwrap(), &[1]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15);
        let c4 = build_extended_circuit(4, &Circuit::new(5)).unwrap();
        assert_eq!(c4.n_qubits(), 5);
        assert_eq!(c4.gates().iter().filter(|g| g.kind == GateKind::CNOT).count(), 4);
        assert!(matches!(build_extended_circuit(5, &Circuit::new(6)), Err(Error::InvalidParams(_))));
        assert!(matches!(build_extended_circuit(0, &Circuit::new(1)), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn run_circuit_basics() {
        let empty = Circuit::new(2);
        let init = pure(2);
        assert_eq!(run_circuit(&empty, &init).unwrap(), init);
        let mut xx = Circuit::new(1);
        xx.push(Gate::x(0)).unwrap();
        xx.push(Gate::x(0)).unwrap();
        assert_eq!(run_circuit(&xx, &pure(1)).unwrap(), pure(1));
        assert!(matches!(run_circuit(&xx, &pure(2)), Err(Error::RegisterMismatch { .. })));
    }

    #[test]
    fn mixed_and_pure_paths_agree() {
        let h = build_hamiltonian(&HamiltonianParams::default()).unwrap();
        let u1 = trotterize(&pauli_decompose(&h).unwrap(), &TrotterPlan::new(0.01, 2).unwrap())
            .unwrap();
        let c = build_entangling_circuit(3, &u1, false).unwrap();
        let p = run_circuit(&c, &pure(3)).unwrap().to_density_matrix();
        let m = run_circuit(&c, &QuantumState::Mixed(DensityMatrix::from_pure(&StateVector::zero(3))))
            .unwrap()
            .to_density_matrix();
        assert!(p.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_sums_to_shots() {
        let zero = pure(1);
        let counts = sample_counts(&zero, &[0], 1024, 7).unwrap();
        assert_eq!(counts.get("0"), Some(&1024));
        assert_eq!(counts.len(), 1);

        let mut c = Circuit::new(2);
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cnot(0, 1)).unwrap();
        let bell = run_circuit(&c, &pure(2)).unwrap();
        let a = sample_counts(&bell, &[0, 1], 5000, 11).unwrap();
        let b = sample_counts(&bell, &[0, 1], 5000, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<usize>(), 5000);
        assert!(a.keys().all(|k| k == "00" || k == "11"));
        assert!(matches!(sample_counts(&bell, &[2], 10, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(sample_counts(&bell, &[0], 0, 0).is_err());
    }
}
