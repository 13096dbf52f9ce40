//! Dense complex linear algebra over few-qubit registers.
//!
//! Qubit 0 is the most significant bit of a basis-state index, so
//! `tensor_product(a, b)` places `a` on the lower-numbered qubits and reads
//! in the same order as ket notation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when validating unitarity of user-supplied operators.
pub const UNITARY_TOL: f64 = 1e-8;
/// Tolerance used when validating hermiticity of user-supplied operators.
pub const HERMITIAN_TOL: f64 = 1e-8;
/// Norm / trace slack accepted for states.
pub const STATE_TOL: f64 = 1e-10;

/// Square complex matrix of dimension `2^k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "operator dimension {dim} is not a power of two"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[&[C64]]) -> Result<Self> {
        let dim = rows.len();
        let data: Vec<C64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim.is_power_of_two());
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.data[i * dim + i] = ONE;
        }
        op
    }

    pub fn diagonal(diag: &[C64]) -> Result<Self> {
        let dim = diag.len();
        let mut data = vec![ZERO; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * d..(k + 1) * d];
                let dst = &mut out[i * d..(i + 1) * d];
                for (o, b) in dst.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Operator { dim: d, data: out }
    }

    pub fn adjoint(&self) -> Operator {
        let d = self.dim;
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            for j in 0..d {
                out[j * d + i] = self.data[i * d + j].conj();
            }
        }
        Operator { dim: d, data: out }
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            dim: self.dim,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn add(&self, other: &Operator) -> Operator {
        assert_eq!(self.dim, other.dim, "add dimension mismatch");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Entrywise maximum of `|self - other|`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn unitary_deviation(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&Operator::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_deviation() <= tol
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                self.data[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `1 - |Tr(U^dagger V)| / dim`; zero iff the operators agree up to a global phase.
    pub fn trace_distance_mod_phase(&self, other: &Operator) -> f64 {
        let overlap: C64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        1.0 - overlap.norm() / self.dim as f64
    }

    /// Frobenius distance after removing the best global phase, normalised by `sqrt(dim)`.
    /// Scales linearly with the generator error, unlike [`Self::trace_distance_mod_phase`].
    pub fn phase_aligned_distance(&self, other: &Operator) -> f64 {
        let overlap: C64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        let sq: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a * phase - b).norm_sqr())
            .sum();
        (sq / self.dim as f64).sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

}

/// Kronecker product; the first operand acts on the more significant qubits.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    let (da, db) = (a.dim, b.dim);
    let d = da * db;
    let mut data = vec![ZERO; d * d];
    for ia in 0..da {
        for ja in 0..da {
            let x = a.data[ia * da + ja];
            if x == ZERO {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    data[(ia * db + ib) * d + ja * db + jb] = x * b.data[ib * db + jb];
                }
            }
        }
    }
    Operator { dim: d, data }
}

/// Embed a single-qubit operator on `qubit` of an `n_qubits` register.
pub fn embed_single(op: &Operator, qubit: usize, n_qubits: usize) -> Operator {
    assert_eq!(op.dim, 2);
    let mut out = Operator::identity(1);
    for q in 0..n_qubits {
        let factor = if q == qubit {
            op.clone()
        } else {
            Operator::identity(2)
        };
        out = tensor_product(&out, &factor);
    }
    out
}

/// Hermitian eigendecomposition: eigenvalues and column eigenvectors.
pub(crate) fn hermitian_eigen(h: &Operator) -> (Vec<f64>, DMatrix<C64>) {
    let m = h.to_nalgebra();
    let eig = m.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// `f(H)` for Hermitian `H` through its spectral decomposition.
pub(crate) fn hermitian_function(h: &Operator, f: impl Fn(f64) -> C64) -> Operator {
    let (vals, vecs) = hermitian_eigen(h);
    let d = h.dim;
    let mut out = Operator::zeros(d);
    for (k, lambda) in vals.iter().enumerate() {
        let fk = f(*lambda);
        if fk == ZERO {
            continue;
        }
        for i in 0..d {
            let vi = vecs[(i, k)] * fk;
            for j in 0..d {
                out.data[i * d + j] += vi * vecs[(j, k)].conj();
            }
        }
    }
    out
}

/// `exp(-i h t)` by eigendecomposition. `t` is in microseconds and `h` in rad/us.
pub fn matrix_exponential(h: &Operator, t: f64) -> Result<Operator> {
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NonHermitian(dev));
    }
    if t == 0.0 {
        return Ok(Operator::identity(h.dim));
    }
    Ok(hermitian_function(h, |lambda| C64::from_polar(1.0, -lambda * t)))
}

#[inline]
pub(crate) fn bit(n_bits: usize, qubit: usize) -> usize {
    1usize << (n_bits - 1 - qubit)
}

/// In-place 2x2 kernel on one bit of a `2^n_bits` vector. `m` is row-major.
pub(crate) fn apply_1q(v: &mut [C64], n_bits: usize, qubit: usize, m: &[C64; 4]) {
    let mask = bit(n_bits, qubit);
    let len = v.len();
    let mut block = 0;
    while block < len {
        for i in block..block + mask {
            let j = i | mask;
            let (a, b) = (v[i], v[j]);
            v[i] = m[0] * a + m[1] * b;
            v[j] = m[2] * a + m[3] * b;
        }
        block += 2 * mask;
    }
}

pub(crate) fn apply_diag_1q(v: &mut [C64], n_bits: usize, qubit: usize, d0: C64, d1: C64) {
    let mask = bit(n_bits, qubit);
    for (i, x) in v.iter_mut().enumerate() {
        *x *= if i & mask == 0 { d0 } else { d1 };
    }
}

pub(crate) fn apply_cnot(v: &mut [C64], n_bits: usize, control: usize, target: usize) {
    let cm = bit(n_bits, control);
    let tm = bit(n_bits, target);
    for i in 0..v.len() {
        if i & cm != 0 && i & tm == 0 {
            v.swap(i, i | tm);
        }
    }
}

/// General k-qubit kernel; `targets[0]` is the most significant local bit.
pub(crate) fn apply_kq(v: &mut [C64], n_bits: usize, targets: &[usize], m: &Operator) {
    let k = targets.len();
    let local = 1usize << k;
    debug_assert_eq!(m.dim, local);
    let masks: Vec<usize> = targets.iter().map(|&q| bit(n_bits, q)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..local)
        .map(|l| {
            (0..k)
                .filter(|&b| l & (1 << (k - 1 - b)) != 0)
                .map(|b| masks[b])
                .sum()
        })
        .collect();
    let mut buf = vec![ZERO; local];
    for base in 0..v.len() {
        if base & all != 0 {
            continue;
        }
        for (l, off) in offsets.iter().enumerate() {
            buf[l] = v[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            let row = &m.data[r * local..(r + 1) * local];
            v[base + off] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
        }
    }
}

fn check_targets(targets: &[usize], n_qubits: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= n_qubits {
            return Err(Error::IndexOutOfRange {
                index: t,
                n_qubits,
            });
        }
        if targets[..i].contains(&t) {
            return Err(Error::DuplicateIndex(t));
        }
    }
    Ok(())
}

fn check_unitary_for(u: &Operator, targets: &[usize], n_qubits: usize) -> Result<()> {
    check_targets(targets, n_qubits)?;
    if u.dim != 1 << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << targets.len(),
            found: u.dim,
        });
    }
    let dev = u.unitary_deviation();
    if dev > UNITARY_TOL {
        return Err(Error::NonUnitary(dev));
    }
    Ok(())
}

/// Pure state over `n_qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Self { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(Self {
            n_qubits: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    /// Normalise arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalise zero vector".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector {
            n_qubits: self.n_qubits + other.n_qubits,
            amps,
        }
    }

    pub fn apply_unitary(&self, u: &Operator, targets: &[usize]) -> Result<StateVector> {
        check_unitary_for(u, targets, self.n_qubits)?;
        let mut out = self.clone();
        apply_kq(&mut out.amps, self.n_qubits, targets, u);
        Ok(out)
    }
}

/// Mixed state over `n_qubits`, row-major `2^n x 2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        let d = psi.dim();
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            let a = psi.amps[i];
            for j in 0..d {
                data[i * d + j] = a * psi.amps[j].conj();
            }
        }
        Self {
            n_qubits: psi.n_qubits,
            data,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        let mut data = vec![ZERO; d * d];
        for i in 0..d {
            data[i * d + i] = C64::new(1.0 / d as f64, 0.0);
        }
        Self { n_qubits, data }
    }

    /// Build from entries, checking Hermiticity, unit trace and positivity.
    pub fn from_entries(data: Vec<C64>) -> Result<Self> {
        let rho = Self::from_entries_unchecked(data)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_entries_unchecked(data: Vec<C64>) -> Result<Self> {
        let len = data.len();
        let d = (len as f64).sqrt().round() as usize;
        if d * d != len || !d.is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "{len} entries do not form a 2^n x 2^n matrix"
            )));
        }
        Ok(Self {
            n_qubits: d.trailing_zeros() as usize,
            data,
        })
    }

    pub fn from_operator(op: &Operator) -> Result<Self> {
        Self::from_entries(op.entries().to_vec())
    }

    pub fn to_operator(&self) -> Operator {
        Operator {
            dim: self.dim(),
            data: self.data.clone(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.to_operator()).0
    }

    /// Check the density-matrix invariants.
    pub fn validate(&self) -> Result<()> {
        let op = self.to_operator();
        let herm = op.hermitian_deviation();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let op = tensor_product(&self.to_operator(), &other.to_operator());
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            data: op.data,
        }
    }

    /// `<a| rho |b>`.
    pub fn sandwich(&self, a: &[C64], b: &[C64]) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for (row, ai) in self.data.chunks(d).zip(a) {
            let ai = ai.conj();
            if ai == ZERO {
                continue;
            }
            let s: C64 = row.iter().zip(b).map(|(r, x)| r * x).sum();
            acc += ai * s;
        }
        acc
    }

    pub fn apply_unitary(&self, u: &Operator, targets: &[usize]) -> Result<DensityMatrix> {
        check_unitary_for(u, targets, self.n_qubits)?;
        let mut out = self.clone();
        out.apply_kq_in_place(targets, u);
        Ok(out)
    }

    pub(crate) fn apply_kq_in_place(&mut self, targets: &[usize], u: &Operator) {
        let n = self.n_qubits;
        apply_kq(&mut self.data, 2 * n, targets, u);
        let col_targets: Vec<usize> = targets.iter().map(|t| t + n).collect();
        let conj = Operator {
            dim: u.dim,
            data: u.data.iter().map(|x| x.conj()).collect(),
        };
        apply_kq(&mut self.data, 2 * n, &col_targets, &conj);
    }

    pub(crate) fn apply_1q_in_place(&mut self, qubit: usize, m: &[C64; 4]) {
        let n = self.n_qubits;
        apply_1q(&mut self.data, 2 * n, qubit, m);
        let c = [m[0].conj(), m[1].conj(), m[2].conj(), m[3].conj()];
        apply_1q(&mut self.data, 2 * n, qubit + n, &c);
    }

    pub(crate) fn apply_diag_1q_in_place(&mut self, qubit: usize, d0: C64, d1: C64) {
        let n = self.n_qubits;
        let dim = self.dim();
        let mask = bit(n, qubit);
        // rho_rc picks up d_r * conj(d_c)
        let f = [
            [d0 * d0.conj(), d0 * d1.conj()],
            [d1 * d0.conj(), d1 * d1.conj()],
        ];
        for r in 0..dim {
            let rb = usize::from(r & mask != 0);
            let row = &mut self.data[r * dim..(r + 1) * dim];
            for (c, x) in row.iter_mut().enumerate() {
                *x *= f[rb][usize::from(c & mask != 0)];
            }
        }
    }

    pub(crate) fn apply_cnot_in_place(&mut self, control: usize, target: usize) {
        let n = self.n_qubits;
        apply_cnot(&mut self.data, 2 * n, control, target);
        apply_cnot(&mut self.data, 2 * n, control + n, target + n);
    }

    /// Reduced state on `keep`, in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let n = self.n_qubits;
        if keep.is_empty() {
            return Err(Error::InvalidParams("partial trace must keep a qubit".into()));
        }
        check_targets(keep, n)?;
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let offsets = |qubits: &[usize]| -> Vec<usize> {
            let k = qubits.len();
            (0..1usize << k)
                .map(|l| {
                    (0..k)
                        .filter(|&b| l & (1 << (k - 1 - b)) != 0)
                        .map(|b| bit(n, qubits[b]))
                        .sum()
                })
                .collect()
        };
        let kept_off = offsets(keep);
        let traced_off = offsets(&traced);
        let dk = kept_off.len();
        let d = self.dim();
        let mut data = vec![ZERO; dk * dk];
        for (i, ri) in kept_off.iter().enumerate() {
            for (j, cj) in kept_off.iter().enumerate() {
                data[i * dk + j] = traced_off
                    .iter()
                    .map(|t| self.data[(ri + t) * d + cj + t])
                    .sum();
            }
        }
        Ok(DensityMatrix {
            n_qubits: keep.len(),
            data,
        })
    }

    /// Accumulate `weight * other` into `self`.
    pub(crate) fn add_scaled(&mut self, other: &DensityMatrix, weight: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * weight;
        }
    }

    pub(crate) fn zeros(n_qubits: usize) -> DensityMatrix {
        let d = 1 << n_qubits;
        DensityMatrix {
            n_qubits,
            data: vec![ZERO; d * d],
        }
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Either representation of a register state.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        match self {
            QuantumState::Pure(s) => s.n_qubits(),
            QuantumState::Mixed(r) => r.n_qubits(),
        }
    }

    pub fn to_density_matrix(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(s) => DensityMatrix::from_pure(s),
            QuantumState::Mixed(r) => r.clone(),
        }
    }

    pub fn into_mixed(self) -> QuantumState {
        match self {
            QuantumState::Pure(s) => QuantumState::Mixed(DensityMatrix::from_pure(&s)),
            m => m,
        }
    }

    pub fn apply_unitary(&self, u: &Operator, targets: &[usize]) -> Result<QuantumState> {
        Ok(match self {
            QuantumState::Pure(s) => QuantumState::Pure(s.apply_unitary(u, targets)?),
            QuantumState::Mixed(r) => QuantumState::Mixed(r.apply_unitary(u, targets)?),
        })
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        match self {
            QuantumState::Pure(s) => {
                // avoid the full outer product for small reductions
                let n = s.n_qubits();
                check_targets(keep, n)?;
                if keep.is_empty() {
                    return Err(Error::InvalidParams("partial trace must keep a qubit".into()));
                }
                let k = keep.len();
                let dk = 1usize << k;
                let mut data = vec![ZERO; dk * dk];
                let local = |idx: usize| -> usize {
                    keep.iter()
                        .enumerate()
                        .filter(|(_, &q)| idx & bit(n, q) != 0)
                        .map(|(b, _)| 1 << (k - 1 - b))
                        .sum()
                };
                let kept_mask: usize = keep.iter().map(|&q| bit(n, q)).sum();
                let amps = s.amplitudes();
                for i in 0..amps.len() {
                    if amps[i] == ZERO {
                        continue;
                    }
                    let li = local(i);
                    let rest = i & !kept_mask;
                    for (j, aj) in amps.iter().enumerate() {
                        if j & !kept_mask != rest {
                            continue;
                        }
                        data[li * dk + local(j)] += amps[i] * aj.conj();
                    }
                }
                Ok(DensityMatrix { n_qubits: k, data })
            }
            QuantumState::Mixed(r) => r.partial_trace(keep),
        }
    }

    /// `<a| rho |b>` for either representation.
    pub fn sandwich(&self, a: &[C64], b: &[C64]) -> C64 {
        match self {
            QuantumState::Pure(s) => {
                let x: C64 = a.iter().zip(s.amplitudes()).map(|(u, v)| u.conj() * v).sum();
                let y: C64 = s.amplitudes().iter().zip(b).map(|(u, v)| u.conj() * v).sum();
                x * y
            }
            QuantumState::Mixed(r) => r.sandwich(a, b),
        }
    }

    /// Diagonal of the state in the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(s) => s.probabilities(),
            QuantumState::Mixed(r) => (0..r.dim()).map(|i| r.get(i, i).re).collect(),
        }
    }
}

pub mod gates {
    //! Fixed single-qubit matrices.
    use super::*;

    pub fn pauli_x() -> Operator {
        Operator::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]).unwrap()
    }

    pub fn pauli_y() -> Operator {
        Operator::from_rows(&[&[ZERO, -I], &[I, ZERO]]).unwrap()
    }

    pub fn pauli_z() -> Operator {
        Operator::diagonal(&[ONE, -ONE]).unwrap()
    }

    pub fn hadamard() -> Operator {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Operator::from_rows(&[&[s, s], &[s, -s]]).unwrap()
    }

    /// CNOT with the control on the more significant (first) qubit.
    pub fn cnot() -> Operator {
        let mut op = Operator::zeros(4);
        op.set(0, 0, ONE);
        op.set(1, 1, ONE);
        op.set(2, 3, ONE);
        op.set(3, 2, ONE);
        op
    }
}
