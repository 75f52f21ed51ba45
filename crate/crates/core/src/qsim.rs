//! Dense state-vector and density-matrix simulation.
//!
//! Basis ordering: qubit 0 is the most significant bit of the basis index,
//! so `q = q_{N-1}·2^0 + … + q_0·2^{N-1}`. On two qubits, `|01⟩` (qubit 0
//! in `|0⟩`, qubit 1 in `|1⟩`) is index 1 and `|10⟩` is index 2.
//!
//! A density matrix of `N` qubits is stored row-major and is treated by the
//! gate kernels as a `2N`-qubit vector: row qubits occupy register slots
//! `0..N`, column qubits occupy `N..2N`. Conjugation `UρU†` is then `U` on
//! the row slots followed by `conj(U)` on the column slots.

use std::fmt;

use num_complex::Complex64 as C64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{ensure_len, Error, Result};

pub const MAX_QUBITS: usize = 12;

/// 2×2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

fn check_register(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::RegisterSize(n_qubits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    /// `exp(-i α/2 Z⊗Z)` on the two listed qubits.
    Rzz(usize, usize, f64),
    /// Control, target.
    Cnot(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Rzz(a, b, _) | Gate::Cnot(a, b) => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Rzz(..) | Gate::Cnot(..))
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(q),
            Gate::Rx(q, a) => Gate::Rx(q, -a),
            Gate::Ry(q, a) => Gate::Ry(q, -a),
            Gate::Rz(q, a) => Gate::Rz(q, -a),
            Gate::Rzz(p, q, a) => Gate::Rzz(p, q, -a),
            Gate::Cnot(c, t) => Gate::Cnot(c, t),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::RepeatedQubit(qs[0]));
        }
        Ok(())
    }

    /// Dense unitary in the gate's local basis. Two-qubit gates use
    /// `|ab⟩ → 2a + b` with `a` the first listed qubit.
    pub fn matrix(&self) -> Vec<Vec<C64>> {
        match *self {
            Gate::H(_) => {
                let s = C64::from(std::f64::consts::FRAC_1_SQRT_2);
                vec![vec![s, s], vec![s, -s]]
            }
            Gate::Rx(_, a) => {
                let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
                vec![vec![c.into(), -I * s], vec![-I * s, c.into()]]
            }
            Gate::Ry(_, a) => {
                let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
                vec![vec![c.into(), (-s).into()], vec![s.into(), c.into()]]
            }
            Gate::Rz(_, a) => {
                let (m, p) = phases(a);
                vec![vec![m, ZERO], vec![ZERO, p]]
            }
            Gate::Rzz(_, _, a) => {
                let (m, p) = phases(a);
                let d = [m, p, p, m];
                (0..4)
                    .map(|r| (0..4).map(|c| if r == c { d[r] } else { ZERO }).collect())
                    .collect()
            }
            Gate::Cnot(..) => {
                let perm = [0, 1, 3, 2];
                (0..4)
                    .map(|r| (0..4).map(|c| if perm[r] == c { ONE } else { ZERO }).collect())
                    .collect()
            }
        }
    }

    /// Apply to `amps`, viewed as an `n_total`-qubit register, with every
    /// qubit index shifted by `shift`. `conj` applies the element-wise
    /// conjugate of the unitary instead.
    fn act(&self, amps: &mut [C64], n_total: usize, shift: usize, conj: bool) {
        let bit = |q: usize| n_total - 1 - (q + shift);
        let cj = |z: C64| if conj { z.conj() } else { z };
        match *self {
            Gate::Rz(q, a) => {
                let (m, p) = phases(a);
                apply_diag1(amps, bit(q), cj(m), cj(p));
            }
            Gate::Rzz(q1, q2, a) => {
                let (m, p) = phases(a);
                let (m, p) = (cj(m), cj(p));
                let (b1, b2) = (bit(q1), bit(q2));
                for (i, z) in amps.iter_mut().enumerate() {
                    let parity = ((i >> b1) ^ (i >> b2)) & 1;
                    *z *= if parity == 0 { m } else { p };
                }
            }
            Gate::Cnot(c, t) => {
                let (bc, bt) = (bit(c), bit(t));
                for i in 0..amps.len() {
                    if (i >> bc) & 1 == 1 && (i >> bt) & 1 == 0 {
                        amps.swap(i, i | (1 << bt));
                    }
                }
            }
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) => {
                let m = self.matrix();
                let m = [[cj(m[0][0]), cj(m[0][1])], [cj(m[1][0]), cj(m[1][1])]];
                apply_dense1(amps, bit(q), &m);
            }
        }
    }
}

fn phases(a: f64) -> (C64, C64) {
    (C64::from_polar(1.0, -a / 2.0), C64::from_polar(1.0, a / 2.0))
}

fn apply_diag1(amps: &mut [C64], bit: usize, d0: C64, d1: C64) {
    for (i, z) in amps.iter_mut().enumerate() {
        *z *= if (i >> bit) & 1 == 0 { d0 } else { d1 };
    }
}

fn apply_dense1(amps: &mut [C64], bit: usize, m: &Mat2) {
    let step = 1usize << bit;
    for i in 0..amps.len() {
        if i & step == 0 {
            let j = i | step;
            let (a0, a1) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Gate list reversed with every gate inverted: the circuit `S†`.
pub fn inverse_circuit(ops: &[Gate]) -> Vec<Gate> {
    ops.iter().rev().map(Gate::inverse).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Wrap raw amplitudes. The vector must have power-of-two length and
    /// unit norm within 1e-10.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n_qubits {
            return Err(Error::invalid(format!(
                "amplitude count {} is not a power of two",
                amps.len()
            )));
        }
        check_register(n_qubits)?;
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("state has squared norm {norm}")));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        gate.act(&mut self.amps, self.n_qubits, 0, false);
        Ok(())
    }

    pub fn apply_all(&mut self, ops: &[Gate]) -> Result<()> {
        for g in ops {
            g.validate(self.n_qubits)?;
        }
        for g in ops {
            g.act(&mut self.amps, self.n_qubits, 0, false);
        }
        Ok(())
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        ensure_len(self.amps.len(), other.amps.len())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

pub fn apply_gate(state: &StateVector, gate: &Gate) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

pub fn apply_hadamard_layer(state: &StateVector) -> StateVector {
    let mut out = state.clone();
    for q in 0..out.n_qubits {
        Gate::H(q).act(&mut out.amps, out.n_qubits, 0, false);
    }
    out
}

pub fn apply_circuit(state: &StateVector, ops: &[Gate]) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_all(ops)?;
    Ok(out)
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn overlap_probability(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    /// Row-major `2^N × 2^N`.
    mat: Vec<C64>,
}

impl DensityMatrix {
    /// `|0…0⟩⟨0…0|`, the projector Π.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut mat = vec![ZERO; dim * dim];
        mat[0] = ONE;
        Ok(DensityMatrix { n_qubits, mat })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut mat = vec![ZERO; dim * dim];
        for i in 0..dim {
            mat[i * dim + i] = C64::from(1.0 / dim as f64);
        }
        Ok(DensityMatrix { n_qubits, mat })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let a = &state.amps;
        let mut mat = Vec::with_capacity(a.len() * a.len());
        for r in a {
            for c in a {
                mat.push(r * c.conj());
            }
        }
        DensityMatrix {
            n_qubits: state.n_qubits,
            mat,
        }
    }

    /// Wrap a row-major matrix after checking Hermiticity, unit trace and
    /// positivity.
    pub fn from_matrix(n_qubits: usize, mat: Vec<C64>) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        ensure_len(dim * dim, mat.len())?;
        let dm = DensityMatrix { n_qubits, mat };
        if dm.hermiticity_error() > 1e-10 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        if (dm.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("density matrix trace {}", dm.trace())));
        }
        if dm.min_eigenvalue() < -1e-9 {
            return Err(Error::invalid("density matrix is not positive semidefinite"));
        }
        Ok(dm)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[row * self.dim() + col]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// Tr[ρ²].
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Tr[self · other] for Hermitian arguments (real part).
    pub fn trace_product(&self, other: &DensityMatrix) -> Result<f64> {
        ensure_len(self.mat.len(), other.mat.len())?;
        // Tr[AB] = Σ_rc A_rc B_cr = Σ_rc A_rc conj(B_rc) when B is Hermitian.
        Ok(self
            .mat
            .iter()
            .zip(&other.mat)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum())
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = nalgebra::DMatrix::from_fn(d, d, |r, c| {
            0.5 * (self.get(r, c) + self.get(c, r).conj())
        });
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    /// ρ → UρU† for a single gate.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let n = self.n_qubits;
        gate.act(&mut self.mat, 2 * n, 0, false);
        gate.act(&mut self.mat, 2 * n, n, true);
        Ok(())
    }

    pub fn apply_all(&mut self, ops: &[Gate]) -> Result<()> {
        for g in ops {
            g.validate(self.n_qubits)?;
        }
        let n = self.n_qubits;
        for g in ops {
            g.act(&mut self.mat, 2 * n, 0, false);
            g.act(&mut self.mat, 2 * n, n, true);
        }
        Ok(())
    }

    fn conjugate_by(&self, m: &Mat2, qubit: usize) -> Vec<C64> {
        let n = self.n_qubits;
        let mut out = self.mat.clone();
        apply_dense1(&mut out, 2 * n - 1 - qubit, m);
        let mc = [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]];
        apply_dense1(&mut out, 2 * n - 1 - (qubit + n), &mc);
        out
    }
}

/// Checks Σ M_k† M_k = I within 1e-10.
pub fn validate_kraus(kraus: &[Mat2]) -> Result<()> {
    if kraus.is_empty() {
        return Err(Error::invalid("empty Kraus set"));
    }
    for r in 0..2 {
        for c in 0..2 {
            let s: C64 = kraus
                .iter()
                .map(|m| (0..2).map(|k| m[k][r].conj() * m[k][c]).sum::<C64>())
                .sum();
            let want = if r == c { ONE } else { ZERO };
            if (s - want).norm() > 1e-10 {
                return Err(Error::invalid("Kraus operators are not trace preserving"));
            }
        }
    }
    Ok(())
}

/// ρ → Σ_k M_k ρ M_k† on one qubit.
pub fn apply_channel(dm: &DensityMatrix, kraus: &[Mat2], qubit: usize) -> Result<DensityMatrix> {
    validate_kraus(kraus)?;
    Gate::H(qubit).validate(dm.n_qubits)?;
    let mut acc = vec![ZERO; dm.mat.len()];
    for m in kraus {
        for (a, t) in acc.iter_mut().zip(dm.conjugate_by(m, qubit)) {
            *a += t;
        }
    }
    Ok(DensityMatrix {
        n_qubits: dm.n_qubits,
        mat: acc,
    })
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("depolarizing probability {p} outside [0, 1]")))
    }
}

/// `M0 = √(1−p)·I`, `M1..M3 = √(p/3)·{σx, σy, σz}`.
pub fn depolarizing_kraus(p: f64) -> Result<[Mat2; 4]> {
    check_probability(p)?;
    let a = C64::from((1.0 - p).sqrt());
    let b = C64::from((p / 3.0).sqrt());
    Ok([
        [[a, ZERO], [ZERO, a]],
        [[ZERO, b], [b, ZERO]],
        [[ZERO, -I * b], [I * b, ZERO]],
        [[b, ZERO], [ZERO, -b]],
    ])
}

/// Single-qubit depolarizing channel on every qubit in turn.
pub fn apply_depolarizing_all(dm: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    let kraus = depolarizing_kraus(p)?;
    let mut out = dm.clone();
    if p == 0.0 {
        return Ok(out);
    }
    for q in 0..dm.n_qubits {
        out = apply_channel(&out, &kraus, q)?;
    }
    Ok(out)
}

pub fn evolve_density(dm: &DensityMatrix, ops: &[Gate]) -> Result<DensityMatrix> {
    let mut out = dm.clone();
    out.apply_all(ops)?;
    Ok(out)
}

/// ⟨0…0|ρ|0…0⟩. Rounding noise down to −1e-9 is clamped to zero; anything
/// more negative is reported.
pub fn prob_all_zeros(dm: &DensityMatrix) -> Result<f64> {
    clamp_probability(dm.mat[0].re)
}

pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(Error::Numerical(format!("probability {p} out of range")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Computational-basis outcome; bit `k` is the value of qubit `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bitstring {
    n_qubits: usize,
    index: usize,
}

impl Bitstring {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn bit(&self, qubit: usize) -> bool {
        (self.index >> (self.n_qubits - 1 - qubit)) & 1 == 1
    }

    pub fn is_all_zeros(&self) -> bool {
        self.index == 0
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            f.write_str(if self.bit(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Anything with a computational-basis outcome distribution.
pub trait Measurable {
    fn n_qubits(&self) -> usize;
    fn basis_probabilities(&self) -> Vec<f64>;
}

impl Measurable for StateVector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn basis_probabilities(&self) -> Vec<f64> {
        self.probabilities()
    }
}

impl Measurable for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn basis_probabilities(&self) -> Vec<f64> {
        self.probabilities()
    }
}

/// Precomputed outcome distribution for repeated measurement.
#[derive(Debug, Clone)]
pub struct Sampler {
    n_qubits: usize,
    dist: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new<M: Measurable + ?Sized>(state: &M) -> Result<Self> {
        let dist = WeightedIndex::new(state.basis_probabilities())
            .map_err(|e| Error::Numerical(format!("cannot sample state: {e}")))?;
        Ok(Sampler {
            n_qubits: state.n_qubits(),
            dist,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Bitstring {
        Bitstring {
            n_qubits: self.n_qubits,
            index: self.dist.sample(rng),
        }
    }
}

pub fn sample_bitstring<M, R>(state: &M, rng: &mut R) -> Result<Bitstring>
where
    M: Measurable + ?Sized,
    R: Rng + ?Sized,
{
    Ok(Sampler::new(state)?.sample(rng))
}
