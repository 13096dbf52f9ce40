//! Electron / nitrogen / flux-qubit Hamiltonian, its n-NV extension, and
//! Pauli-string decomposition.
//!
//! Energies are angular frequencies in rad/us (MHz x 2pi, hbar = 1). Spin-1
//! operators are restricted to a two-level subspace; with the default
//! encoding `|1> = ms=+1` and `|0> = ms=0`, so `Sz = Sz^2 = |1><1|`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{embed_single, gates, tensor_product, Operator, C64, HERMITIAN_TOL, ONE, ZERO};

/// Largest number of NV centres supported by the extended model.
pub const MAX_NV: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianParams {
    /// Zero-field splitting D.
    pub d_zfs: f64,
    /// Electron gyromagnetic factor.
    pub gamma_e: f64,
    /// Nitrogen nuclear gyromagnetic factor.
    pub gamma_n: f64,
    /// External field B0 in abstract field units.
    pub b0: f64,
    /// Quadrupole splitting Q.
    pub q_quad: f64,
    /// Electron / flux-qubit coupling J_C.
    pub j_c: f64,
    /// Electron / nitrogen hyperfine coupling J_N.
    pub j_n: f64,
    /// Flux-qubit tunnelling delta.
    pub delta: f64,
    /// Dimensionless flux coupling g_f.
    pub g_f: f64,
    pub n_nv: usize,
}

impl Default for HamiltonianParams {
    fn default() -> Self {
        Self {
            d_zfs: 2.87e3,
            gamma_e: 2.8,
            gamma_n: 0.3077e-3,
            b0: 0.0,
            q_quad: -5.1,
            j_c: 14.0,
            j_n: 2.1,
            delta: 100.0,
            g_f: 1.0,
            n_nv: 1,
        }
    }
}

impl HamiltonianParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d_zfs", self.d_zfs),
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("b0", self.b0),
            ("q_quad", self.q_quad),
            ("j_c", self.j_c),
            ("j_n", self.j_n),
            ("delta", self.delta),
            ("g_f", self.g_f),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
        }
        if self.d_zfs <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "d_zfs must be positive, got {}",
                self.d_zfs
            )));
        }
        if !(1..=MAX_NV).contains(&self.n_nv) {
            return Err(Error::InvalidParams(format!(
                "n_nv must be in [1, {MAX_NV}], got {}",
                self.n_nv
            )));
        }
        Ok(())
    }
}

/// Spin-1 projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinLevel {
    Minus,
    Zero,
    Plus,
}

impl SpinLevel {
    pub fn ms(self) -> f64 {
        match self {
            SpinLevel::Minus => -1.0,
            SpinLevel::Zero => 0.0,
            SpinLevel::Plus => 1.0,
        }
    }
}

/// Which two spin-1 levels a qubit line carries: `(excited -> |1>, ground -> |0>)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinEncoding {
    pub electron: (SpinLevel, SpinLevel),
    pub nitrogen: (SpinLevel, SpinLevel),
}

impl Default for SpinEncoding {
    fn default() -> Self {
        Self {
            electron: (SpinLevel::Plus, SpinLevel::Zero),
            nitrogen: (SpinLevel::Plus, SpinLevel::Zero),
        }
    }
}

impl SpinEncoding {
    pub fn validate(&self) -> Result<()> {
        for (name, (one, zero)) in [("electron", self.electron), ("nitrogen", self.nitrogen)] {
            if one == zero {
                return Err(Error::InvalidParams(format!(
                    "{name} encoding uses the same level twice"
                )));
            }
        }
        Ok(())
    }
}

/// `Sz` restricted to a two-level subspace, in computational order `(|0>, |1>)`.
fn sz(levels: (SpinLevel, SpinLevel)) -> Operator {
    let (one, zero) = levels;
    Operator::diagonal(&[C64::new(zero.ms(), 0.0), C64::new(one.ms(), 0.0)]).unwrap()
}

fn two_local(a: &Operator, qa: usize, b: &Operator, qb: usize, n: usize) -> Operator {
    embed_single(a, qa, n).matmul(&embed_single(b, qb, n))
}

/// Three-qubit Hamiltonian, qubit order electron = 0, nitrogen = 1, flux = 2.
pub fn build_hamiltonian(params: &HamiltonianParams) -> Result<Operator> {
    build_hamiltonian_with_encoding(params, &SpinEncoding::default())
}

pub fn build_hamiltonian_with_encoding(
    params: &HamiltonianParams,
    encoding: &SpinEncoding,
) -> Result<Operator> {
    params.validate()?;
    encoding.validate()?;
    if params.n_nv != 1 {
        return Err(Error::InvalidParams(format!(
            "three-qubit model requires n_nv = 1, got {}",
            params.n_nv
        )));
    }
    let n = 3;
    let (e, nit, f) = (0, 1, 2);
    let s_z = sz(encoding.electron);
    let n_z = sz(encoding.nitrogen);
    let sigma_x = gates::pauli_x();
    let sigma_z = gates::pauli_z();
    let p = params;
    let real = |x: f64| C64::new(x, 0.0);

    let half_delta_x = sigma_x.scale(real(p.delta / 2.0));
    let terms = [
        embed_single(&s_z.matmul(&s_z), e, n).scale(real(p.d_zfs)),
        embed_single(&s_z, e, n).scale(real(p.gamma_e * p.b0)),
        embed_single(&n_z, nit, n).scale(real(-p.gamma_n * p.b0)),
        embed_single(&half_delta_x, f, n).scale(real(-p.b0)),
        embed_single(&half_delta_x.matmul(&half_delta_x), f, n).scale(real(p.q_quad)),
        embed_single(&half_delta_x, f, n).scale(real(-1.0)),
        two_local(&s_z, e, &sigma_z, f, n).scale(real(p.j_c * p.g_f)),
        two_local(&s_z, e, &n_z, nit, n).scale(real(p.j_n)),
    ];
    Ok(sum(terms.iter(), 1 << n))
}

/// `n_nv` electron lines (qubits `0..n_nv`) plus the flux qubit as the last line.
/// Nitrogen spins are not part of this register.
pub fn build_extended_hamiltonian(params: &HamiltonianParams) -> Result<Operator> {
    params.validate()?;
    let p = params;
    let n = p.n_nv + 1;
    let flux = p.n_nv;
    let s_z = sz(SpinEncoding::default().electron);
    let sigma_x = gates::pauli_x();
    let sigma_z = gates::pauli_z();
    let real = |x: f64| C64::new(x, 0.0);

    let mut terms = Vec::new();
    for i in 0..p.n_nv {
        terms.push(embed_single(&s_z.matmul(&s_z), i, n).scale(real(p.d_zfs)));
        terms.push(embed_single(&s_z, i, n).scale(real(p.gamma_e * p.b0)));
        terms.push(two_local(&s_z, i, &sigma_z, flux, n).scale(real(p.j_c * p.g_f)));
    }
    let half_delta_x = sigma_x.scale(real(p.delta / 2.0));
    terms.push(embed_single(&half_delta_x, flux, n).scale(real(-1.0)));
    terms.push(embed_single(&half_delta_x, flux, n).scale(real(-p.b0)));
    terms.push(
        embed_single(&half_delta_x.matmul(&half_delta_x), flux, n).scale(real(p.q_quad)),
    );
    Ok(sum(terms.iter(), 1 << n))
}

fn sum<'a>(terms: impl Iterator<Item = &'a Operator>, dim: usize) -> Operator {
    terms.fold(Operator::zeros(dim), |acc, t| acc.add(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn matrix(self) -> Operator {
        match self {
            Pauli::I => Operator::identity(2),
            Pauli::X => gates::pauli_x(),
            Pauli::Y => gates::pauli_y(),
            Pauli::Z => gates::pauli_z(),
        }
    }

    /// `<row| P |col>` for single-qubit bits.
    fn element(self, row: usize, col: usize) -> C64 {
        match (self, row, col) {
            (Pauli::I, r, c) if r == c => ONE,
            (Pauli::X, r, c) if r != c => ONE,
            (Pauli::Y, 1, 0) => C64::new(0.0, 1.0),
            (Pauli::Y, 0, 1) => C64::new(0.0, -1.0),
            (Pauli::Z, 0, 0) => ONE,
            (Pauli::Z, 1, 1) => -ONE,
            _ => ZERO,
        }
    }
}

/// Weighted Pauli string; `letters[0]` acts on qubit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::InvalidParams(format!(
                "Pauli coefficient {coefficient} is not finite"
            )));
        }
        Ok(Self {
            letters,
            coefficient,
        })
    }

    pub fn parse(label: &str, coefficient: f64) -> Result<Self> {
        let letters = label
            .chars()
            .map(|c| {
                Pauli::from_symbol(c)
                    .ok_or_else(|| Error::InvalidParams(format!("bad Pauli letter {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(letters, coefficient)
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.symbol()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Qubits carrying a non-identity letter.
    pub fn support(&self) -> Vec<usize> {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != Pauli::I)
            .map(|(q, _)| q)
            .collect()
    }

    /// Unweighted matrix of the string.
    pub fn matrix(&self) -> Operator {
        self.letters
            .iter()
            .fold(Operator::identity(1), |acc, p| tensor_product(&acc, &p.matrix()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}", self.coefficient, self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    pub n_qubits: usize,
    pub terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.letters.len() != n_qubits) {
            return Err(Error::RegisterMismatch {
                expected: n_qubits,
                found: t.letters.len(),
            });
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_operator(&self) -> Operator {
        let dim = 1 << self.n_qubits;
        self.terms.iter().fold(Operator::zeros(dim), |acc, t| {
            acc.add(&t.matrix().scale(C64::new(t.coefficient, 0.0)))
        })
    }

    pub fn coefficient(&self, label: &str) -> f64 {
        self.terms
            .iter()
            .find(|t| t.label() == label)
            .map_or(0.0, |t| t.coefficient)
    }

    /// Coefficient of the all-identity string.
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.is_identity())
            .map(|t| t.coefficient)
            .sum()
    }

    /// Non-identity terms ordered by descending `|c|`, ties broken by label.
    pub fn ordered_terms(&self) -> Vec<&PauliString> {
        let mut terms: Vec<&PauliString> = self.terms.iter().filter(|t| !t.is_identity()).collect();
        terms.sort_by(|a, b| {
            b.coefficient
                .abs()
                .partial_cmp(&a.coefficient.abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.label().cmp(&b.label()))
        });
        terms
    }
}

/// Coefficients below this magnitude are dropped by [`pauli_decompose`].
pub const PAULI_CUTOFF: f64 = 1e-12;

/// `h = sum_P c_P P` with `c_P = Tr(P h) / 2^n`.
pub fn pauli_decompose(h: &Operator) -> Result<PauliSum> {
    let dev = h.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NonHermitian(dev));
    }
    let n = h.n_qubits();
    let dim = h.dim();
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut terms = Vec::new();
    for code in 0..(1usize << (2 * n)) {
        let letters: Vec<Pauli> = (0..n).map(|q| all[(code >> (2 * (n - 1 - q))) & 3]).collect();
        let flip: usize = letters
            .iter()
            .enumerate()
            .filter(|(_, p)| matches!(p, Pauli::X | Pauli::Y))
            .map(|(q, _)| 1 << (n - 1 - q))
            .sum();
        // Tr(P h) = sum_c <c|P|c^flip> h[c^flip][c]
        let mut tr = ZERO;
        for c in 0..dim {
            let r = c ^ flip;
            let mut elem = ONE;
            for (q, p) in letters.iter().enumerate() {
                let shift = n - 1 - q;
                elem *= p.element((c >> shift) & 1, (r >> shift) & 1);
            }
            tr += elem * h.get(r, c);
        }
        let coeff = tr.re / dim as f64;
        if coeff.abs() >= PAULI_CUTOFF {
            terms.push(PauliString::new(letters, coeff)?);
        }
    }
    PauliSum::new(n, terms)
}
