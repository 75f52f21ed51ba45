//! Quantum feature maps, classical baselines and Gram matrices.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use log::debug;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_len, Error, Result};
use crate::qsim::{
    apply_depolarizing_all, clamp_probability, inverse_circuit, DensityMatrix, Gate, Sampler,
    StateVector, MAX_QUBITS,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    #[serde(alias = "fqk")]
    Full,
    #[serde(alias = "lqk")]
    Linear,
    #[serde(alias = "cqk")]
    Circular,
    #[serde(alias = "xqk")]
    PauliX,
    #[serde(alias = "yqk")]
    PauliY,
    #[serde(alias = "zqk")]
    PauliZ,
}

impl FeatureMapKind {
    pub const ALL: [FeatureMapKind; 6] = [
        FeatureMapKind::Full,
        FeatureMapKind::Linear,
        FeatureMapKind::Circular,
        FeatureMapKind::PauliX,
        FeatureMapKind::PauliY,
        FeatureMapKind::PauliZ,
    ];

    pub fn abbreviation(&self) -> &'static str {
        match self {
            FeatureMapKind::Full => "FQK",
            FeatureMapKind::Linear => "LQK",
            FeatureMapKind::Circular => "CQK",
            FeatureMapKind::PauliX => "XQK",
            FeatureMapKind::PauliY => "YQK",
            FeatureMapKind::PauliZ => "ZQK",
        }
    }

    pub fn is_pauli(&self) -> bool {
        matches!(
            self,
            FeatureMapKind::PauliX | FeatureMapKind::PauliY | FeatureMapKind::PauliZ
        )
    }
}

fn default_scale() -> f64 {
    1.0
}

/// One qubit per feature; `angle_scale` multiplies every feature before it
/// becomes a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub kind: FeatureMapKind,
    pub n_features: usize,
    #[serde(default = "default_scale")]
    pub angle_scale: f64,
}

impl FeatureMap {
    pub fn new(kind: FeatureMapKind, n_features: usize) -> Result<Self> {
        let map = FeatureMap {
            kind,
            n_features,
            angle_scale: 1.0,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn with_angle_scale(mut self, scale: f64) -> Result<Self> {
        self.angle_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_QUBITS).contains(&self.n_features) {
            return Err(Error::RegisterSize(self.n_features));
        }
        if !self.angle_scale.is_finite() || self.angle_scale == 0.0 {
            return Err(Error::invalid("angle_scale must be finite and non-zero"));
        }
        Ok(())
    }

    /// Entangled qubit pairs, in emission order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_features;
        match self.kind {
            FeatureMapKind::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            FeatureMapKind::Linear => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            // On one qubit the only candidate pair is (0, 0), which is no pair.
            FeatureMapKind::Circular if n == 1 => Vec::new(),
            FeatureMapKind::Circular => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn circuit(&self, x: &[f64]) -> Result<Vec<Gate>> {
        ensure_len(self.n_features, x.len())?;
        let n = self.n_features;
        let x: Vec<f64> = x.iter().map(|v| v * self.angle_scale).collect();
        let mut ops = Vec::with_capacity(3 * n + n * n / 2);
        match self.kind {
            FeatureMapKind::Full | FeatureMapKind::Linear | FeatureMapKind::Circular => {
                ops.extend((0..n).map(Gate::H));
                ops.extend((0..n).map(|q| Gate::Rz(q, x[q])));
                ops.extend(self.pairs().into_iter().map(|(i, j)| Gate::Rzz(i, j, x[i] * x[j])));
            }
            FeatureMapKind::PauliX => ops.extend((0..n).map(|q| Gate::Rx(q, x[q]))),
            FeatureMapKind::PauliY => ops.extend((0..n).map(|q| Gate::Ry(q, x[q]))),
            FeatureMapKind::PauliZ => {
                for q in 0..n {
                    ops.push(Gate::H(q));
                    ops.push(Gate::Rz(q, x[q]));
                }
            }
        }
        Ok(ops)
    }

    /// |φ(x)⟩ = S(x)|0…0⟩.
    pub fn state(&self, x: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n_features)?;
        s.apply_all(&self.circuit(x)?)?;
        Ok(s)
    }
}

pub fn build_feature_circuit(map: &FeatureMap, x: &[f64]) -> Result<Vec<Gate>> {
    map.circuit(x)
}

/// |⟨φ(x_i)|φ(x_j)⟩|² by direct simulation of both states.
pub fn quantum_kernel_exact(map: &FeatureMap, xi: &[f64], xj: &[f64]) -> Result<f64> {
    crate::qsim::overlap_probability(&map.state(xi)?, &map.state(xj)?)
}

/// Π_k cos²((x_i[k] − x_j[k]) / 2).
pub fn pauli_kernel_closed_form(xi: &[f64], xj: &[f64]) -> Result<f64> {
    ensure_len(xi.len(), xj.len())?;
    Ok(xi
        .iter()
        .zip(xj)
        .map(|(a, b)| ((a - b) / 2.0).cos().powi(2))
        .product())
}

fn check_noise(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise probability {p} outside [0, 1]")))
    }
}

fn clamp_kernel(v: f64) -> Result<f64> {
    if !(-1e-8..=1.0 + 1e-8).contains(&v) {
        return Err(Error::Numerical(format!("kernel value {v} outside [0, 1]")));
    }
    clamp_probability(v.clamp(0.0, 1.0))
}

/// Tr[Π N(S†(x_j) N(S(x_i) Π S†(x_i)) S(x_j))] with N the depolarizing
/// channel on every qubit, evolved literally on a density matrix.
pub fn noisy_quantum_kernel(map: &FeatureMap, xi: &[f64], xj: &[f64], p: f64) -> Result<f64> {
    check_noise(p)?;
    let mut rho = DensityMatrix::zero(map.n_features)?;
    rho.apply_all(&map.circuit(xi)?)?;
    let mut rho = apply_depolarizing_all(&rho, p)?;
    rho.apply_all(&inverse_circuit(&map.circuit(xj)?))?;
    let rho = apply_depolarizing_all(&rho, p)?;
    clamp_kernel(rho.get(0, 0).re)
}

/// Π_k [(1 − 4p/3)² cos²(Δ_k/2) + (2 − 4p/3)(2p/3)].
pub fn noisy_pauli_closed_form(xi: &[f64], xj: &[f64], p: f64) -> Result<f64> {
    check_noise(p)?;
    ensure_len(xi.len(), xj.len())?;
    let a = (1.0 - 4.0 * p / 3.0).powi(2);
    let b = (2.0 - 4.0 * p / 3.0) * (2.0 * p / 3.0);
    Ok(xi
        .iter()
        .zip(xj)
        .map(|(u, v)| a * ((u - v) / 2.0).cos().powi(2) + b)
        .product())
}

fn check_shots(z: u32) -> Result<()> {
    if z == 0 {
        Err(Error::invalid("shot count must be at least 1"))
    } else {
        Ok(())
    }
}

fn count_zeros<R: Rng + ?Sized>(state: &StateVector, shots: u32, rng: &mut R) -> Result<f64> {
    let sampler = Sampler::new(state)?;
    let hits = (0..shots)
        .filter(|_| sampler.sample(rng).is_all_zeros())
        .count();
    Ok(hits as f64 / shots as f64)
}

/// Frequency of the all-zeros outcome over `shots` measurements of
/// S†(x_j)S(x_i)|0…0⟩.
pub fn estimate_kernel_shots<R: Rng + ?Sized>(
    map: &FeatureMap,
    xi: &[f64],
    xj: &[f64],
    shots: u32,
    rng: &mut R,
) -> Result<f64> {
    check_shots(shots)?;
    let mut s = map.state(xi)?;
    s.apply_all(&inverse_circuit(&map.circuit(xj)?))?;
    count_zeros(&s, shots, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    #[serde(alias = "lk")]
    Linear,
    #[serde(alias = "pk")]
    Polynomial,
    #[serde(alias = "sk")]
    Sigmoid,
    #[serde(alias = "gk")]
    Gaussian,
}

impl ClassicalKind {
    pub const ALL: [ClassicalKind; 4] = [
        ClassicalKind::Linear,
        ClassicalKind::Polynomial,
        ClassicalKind::Sigmoid,
        ClassicalKind::Gaussian,
    ];

    pub fn abbreviation(&self) -> &'static str {
        match self {
            ClassicalKind::Linear => "LK",
            ClassicalKind::Polynomial => "PK",
            ClassicalKind::Sigmoid => "SK",
            ClassicalKind::Gaussian => "GK",
        }
    }
}

/// A classical kernel with its hyperparameters (`gamma` is ϰ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalKernel {
    Linear,
    Polynomial { gamma: f64, degree: u32 },
    Sigmoid { gamma: f64, offset: f64 },
    Gaussian { gamma: f64 },
}

impl ClassicalKernel {
    /// GK ϰ = 1/N; PK ϰ = 1, d = 3; SK ϰ = 1/N, c = −1.
    pub fn default_for(kind: ClassicalKind, n_features: usize) -> Self {
        let inv_n = 1.0 / n_features.max(1) as f64;
        match kind {
            ClassicalKind::Linear => ClassicalKernel::Linear,
            ClassicalKind::Polynomial => ClassicalKernel::Polynomial {
                gamma: 1.0,
                degree: 3,
            },
            ClassicalKind::Sigmoid => ClassicalKernel::Sigmoid {
                gamma: inv_n,
                offset: -1.0,
            },
            ClassicalKind::Gaussian => ClassicalKernel::Gaussian { gamma: inv_n },
        }
    }

    pub fn kind(&self) -> ClassicalKind {
        match self {
            ClassicalKernel::Linear => ClassicalKind::Linear,
            ClassicalKernel::Polynomial { .. } => ClassicalKind::Polynomial,
            ClassicalKernel::Sigmoid { .. } => ClassicalKind::Sigmoid,
            ClassicalKernel::Gaussian { .. } => ClassicalKind::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |g: f64| g.is_finite() && g > 0.0;
        match *self {
            ClassicalKernel::Linear => Ok(()),
            ClassicalKernel::Polynomial { gamma, degree } if positive(gamma) && degree >= 1 => {
                Ok(())
            }
            ClassicalKernel::Sigmoid { gamma, offset } if positive(gamma) && offset < 0.0 => Ok(()),
            ClassicalKernel::Gaussian { gamma } if positive(gamma) => Ok(()),
            other => Err(Error::invalid(format!(
                "{other:?} violates ϰ > 0, d ≥ 1, c < 0"
            ))),
        }
    }

    fn eval_unchecked(&self, xi: &[f64], xj: &[f64]) -> f64 {
        let dot = || xi.iter().zip(xj).map(|(a, b)| a * b).sum::<f64>();
        match *self {
            ClassicalKernel::Linear => dot(),
            ClassicalKernel::Polynomial { gamma, degree } => (gamma * dot()).powi(degree as i32),
            ClassicalKernel::Sigmoid { gamma, offset } => (gamma * dot() + offset).tanh(),
            ClassicalKernel::Gaussian { gamma } => {
                let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b).powi(2)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

pub fn classical_kernel(kernel: &ClassicalKernel, xi: &[f64], xj: &[f64]) -> Result<f64> {
    kernel.validate()?;
    ensure_len(xi.len(), xj.len())?;
    Ok(kernel.eval_unchecked(xi, xj))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Quantum(FeatureMap),
    Classical(ClassicalKernel),
}

/// Everything needed to reproduce a Gram matrix. `shots = None` means the
/// exact overlap; `noise` is the depolarizing probability p̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub seed: u64,
}

impl KernelSpec {
    pub fn quantum(map: FeatureMap) -> Self {
        KernelSpec {
            family: KernelFamily::Quantum(map),
            noise: 0.0,
            shots: None,
            seed: 0,
        }
    }

    pub fn classical(kernel: ClassicalKernel) -> Self {
        KernelSpec {
            family: KernelFamily::Classical(kernel),
            noise: 0.0,
            shots: None,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, p: f64) -> Self {
        self.noise = p;
        self
    }

    pub fn with_shots(mut self, shots: Option<u32>, seed: u64) -> Self {
        self.shots = shots;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_noise(self.noise)?;
        if let Some(z) = self.shots {
            check_shots(z)?;
        }
        match &self.family {
            KernelFamily::Quantum(map) => map.validate(),
            KernelFamily::Classical(k) => {
                if self.noise > 0.0 || self.shots.is_some() {
                    return Err(Error::invalid(
                        "noise and shots apply only to quantum kernels",
                    ));
                }
                k.validate()
            }
        }
    }

    pub fn n_features(&self) -> Option<usize> {
        match &self.family {
            KernelFamily::Quantum(m) => Some(m.n_features),
            KernelFamily::Classical(_) => None,
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self.family, KernelFamily::Quantum(_))
    }

    /// Short table label such as `FQK` or `GK`.
    pub fn label(&self) -> &'static str {
        match &self.family {
            KernelFamily::Quantum(m) => m.kind.abbreviation(),
            KernelFamily::Classical(k) => k.kind().abbreviation(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("kernel spec serializes");
        Sha256::digest(&json).into()
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())?;
        if self.noise > 0.0 {
            write!(f, " p={}", self.noise)?;
        }
        match self.shots {
            Some(z) => write!(f, " Z={z}"),
            None => write!(f, " exact"),
        }
    }
}

/// Dense kernel matrix, row-major, tagged with its spec and point ids.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub spec: KernelSpec,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

impl KernelMatrix {
    pub fn from_values(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        spec: KernelSpec,
    ) -> Result<Self> {
        ensure_len(rows * cols, values.len())?;
        Ok(KernelMatrix {
            rows,
            cols,
            values,
            spec,
            row_ids: (0..rows).map(|i| i.to_string()).collect(),
            col_ids: (0..cols).map(|i| i.to_string()).collect(),
        })
    }

    pub fn with_ids(mut self, row_ids: Vec<String>, col_ids: Vec<String>) -> Result<Self> {
        ensure_len(self.rows, row_ids.len())?;
        ensure_len(self.cols, col_ids.len())?;
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn symmetry_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn diagonal_error(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| (self.get(i, i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let n = self.rows;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (self.get(i, j) + self.get(j, i)));
        Ok(m.symmetric_eigenvalues().min())
    }

    /// Symmetric, unit diagonal, min eigenvalue ≥ −1e-8·m.
    pub fn check_mercer(&self) -> Result<()> {
        let m = self.rows as f64;
        let sym = self.symmetry_error();
        let diag = self.diagonal_error();
        let eig = self.min_eigenvalue()?;
        if sym > 1e-10 || diag > 1e-10 || eig < -1e-8 * m {
            return Err(Error::Numerical(format!(
                "kernel matrix invariants violated: asymmetry {sym:e}, diagonal error {diag:e}, min eigenvalue {eig:e}"
            )));
        }
        Ok(())
    }

    /// Rows `r` and columns `c` of this matrix, in the given order.
    pub fn submatrix(&self, r: &[usize], c: &[usize]) -> KernelMatrix {
        let values = r
            .iter()
            .flat_map(|&i| c.iter().map(move |&j| self.get(i, j)))
            .collect();
        KernelMatrix {
            rows: r.len(),
            cols: c.len(),
            values,
            spec: self.spec,
            row_ids: r.iter().map(|&i| self.row_ids[i].clone()).collect(),
            col_ids: c.iter().map(|&j| self.col_ids[j].clone()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::from("id")];
        header.extend(self.col_ids.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.rows {
            let mut rec = vec![self.row_ids[i].clone()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// "QKM1", 32-byte spec digest, rows and cols as u64 LE, then row-major
    /// f64 LE. Ids are not stored.
    pub fn write_cache<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&self.spec.digest())?;
        out.write_all(&(self.rows as u64).to_le_bytes())?;
        out.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a cache written for `spec`; a digest mismatch is an error.
    pub fn read_cache<R: Read>(mut input: R, spec: &KernelSpec) -> Result<KernelMatrix> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::invalid("not a kernel cache file"));
        }
        let mut digest = [0u8; 32];
        input.read_exact(&mut digest)?;
        if digest != spec.digest() {
            return Err(Error::invalid("kernel cache was written for a different spec"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            input.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        KernelMatrix::from_values(rows, cols, values, *spec)
    }
}

const CACHE_MAGIC: &[u8; 4] = b"QKM1";

/// Cache file name keyed by dataset hash and spec hash.
pub fn cache_file_name(dataset_hash: &str, spec: &KernelSpec) -> String {
    let short = &dataset_hash[..dataset_hash.len().min(16)];
    format!("{short}-{}.qkm", &hex::encode(spec.digest())[..16])
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))
}

fn check_points(points: &[Vec<f64>], n: Option<usize>) -> Result<()> {
    let want = n.or_else(|| points.first().map(Vec::len));
    if let Some(want) = want {
        for p in points {
            ensure_len(want, p.len())?;
        }
    }
    Ok(())
}

/// Precomputed per-point quantities for the fast Gram paths.
enum Prepared {
    States(Vec<StateVector>),
    Density(Vec<DensityMatrix>),
    None,
}

/// Kernel values between every row point and every column point.
///
/// Exact noiseless entries reuse one state per point. Noisy entries use
/// κ(x_i, x_j) = Tr[A_j B_i] with B_i = N(S_i Π S_i†) and
/// A_j = S_j N(Π) S_j†, which holds because the depolarizing channel is
/// self-adjoint. Shot-based entries draw from a stream derived from
/// `(seed, i, j)`, so the result does not depend on `workers`.
pub fn gram_matrix(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    spec: &KernelSpec,
    workers: usize,
) -> Result<KernelMatrix> {
    spec.validate()?;
    check_points(rows, spec.n_features())?;
    check_points(cols, spec.n_features().or_else(|| rows.first().map(Vec::len)))?;
    let (m, n) = (rows.len(), cols.len());
    let values = pool(workers)?.install(|| -> Result<Vec<f64>> {
        let (pr, pc) = prepare(rows, cols, spec)?;
        let out: Result<Vec<Vec<f64>>> = (0..m)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| entry(rows, cols, &pr, &pc, spec, i, j))
                    .collect()
            })
            .collect();
        Ok(out?.concat())
    })?;
    KernelMatrix::from_values(m, n, values, *spec)
}

/// Square Gram matrix of `points` against themselves. Only the upper
/// triangle is evaluated and then mirrored.
pub fn gram_matrix_square(points: &[Vec<f64>], spec: &KernelSpec, workers: usize) -> Result<KernelMatrix> {
    spec.validate()?;
    check_points(points, spec.n_features())?;
    let m = points.len();
    let upper = pool(workers)?.install(|| -> Result<Vec<Vec<f64>>> {
        let (pr, pc) = prepare(points, points, spec)?;
        (0..m)
            .into_par_iter()
            .map(|i| {
                (i..m)
                    .map(|j| entry(points, points, &pr, &pc, spec, i, j))
                    .collect()
            })
            .collect()
    })?;
    let mut values = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let j = i + k;
            values[i * m + j] = *v;
            values[j * m + i] = *v;
        }
    }
    debug!("square Gram {m}x{m} for {spec}");
    KernelMatrix::from_values(m, m, values, *spec)
}

fn prepare(rows: &[Vec<f64>], cols: &[Vec<f64>], spec: &KernelSpec) -> Result<(Prepared, Prepared)> {
    let KernelFamily::Quantum(map) = &spec.family else {
        return Ok((Prepared::None, Prepared::None));
    };
    if spec.noise > 0.0 {
        let b: Result<Vec<_>> = rows
            .par_iter()
            .map(|x| {
                let mut rho = DensityMatrix::zero(map.n_features)?;
                rho.apply_all(&map.circuit(x)?)?;
                apply_depolarizing_all(&rho, spec.noise)
            })
            .collect();
        let noisy_pi = apply_depolarizing_all(&DensityMatrix::zero(map.n_features)?, spec.noise)?;
        let a: Result<Vec<_>> = cols
            .par_iter()
            .map(|x| {
                let mut rho = noisy_pi.clone();
                rho.apply_all(&map.circuit(x)?)?;
                Ok(rho)
            })
            .collect();
        return Ok((Prepared::Density(b?), Prepared::Density(a?)));
    }
    let states = |pts: &[Vec<f64>]| -> Result<Vec<StateVector>> {
        pts.par_iter().map(|x| map.state(x)).collect()
    };
    let r = states(rows)?;
    // Shot sampling applies S†(x_j) to the cached row state, so column
    // states are only needed on the exact path.
    let c = if spec.shots.is_some() {
        Prepared::None
    } else {
        Prepared::States(states(cols)?)
    };
    Ok((Prepared::States(r), c))
}

fn entry(
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    pr: &Prepared,
    pc: &Prepared,
    spec: &KernelSpec,
    i: usize,
    j: usize,
) -> Result<f64> {
    let map = match &spec.family {
        KernelFamily::Classical(k) => return Ok(k.eval_unchecked(&rows[i], &cols[j])),
        KernelFamily::Quantum(map) => map,
    };
    let rng = || rng::stream(spec.seed, rng::entry_stream(i, j));
    match (pr, pc) {
        (Prepared::Density(b), Prepared::Density(a)) => {
            let k = clamp_kernel(a[j].trace_product(&b[i])?)?;
            match spec.shots {
                // Only the all-zeros indicator matters, so each shot is a
                // Bernoulli draw with the noisy kernel as success probability.
                Some(z) => {
                    let mut r = rng();
                    let hits = (0..z).filter(|_| r.random_bool(k)).count();
                    Ok(hits as f64 / z as f64)
                }
                None => Ok(k),
            }
        }
        (Prepared::States(si), Prepared::States(sj)) => {
            crate::qsim::overlap_probability(&si[i], &sj[j])
        }
        (Prepared::States(si), Prepared::None) => {
            let z = spec.shots.expect("shot path");
            let mut s = si[i].clone();
            s.apply_all(&inverse_circuit(&map.circuit(&cols[j])?))?;
            count_zeros(&s, z, &mut rng())
        }
        _ => unreachable!("prepared data matches the spec"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn map(kind: FeatureMapKind, n: usize) -> FeatureMap {
        FeatureMap::new(kind, n).unwrap()
    }

    fn random_points(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-PI..PI)).collect())
            .collect()
    }

    #[test]
    fn circuit_gate_counts() {
        let ops = map(FeatureMapKind::Linear, 3).circuit(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(ops.len(), 8);
        assert_eq!(ops.iter().filter(|g| g.is_two_qubit()).count(), 2);
        for (kind, n, want) in [
            (FeatureMapKind::Full, 5, 10),
            (FeatureMapKind::Linear, 5, 4),
            (FeatureMapKind::Circular, 5, 5),
            (FeatureMapKind::Circular, 1, 0),
            (FeatureMapKind::PauliZ, 5, 0),
        ] {
            let ops = map(kind, n).circuit(&vec![0.5; n]).unwrap();
            assert_eq!(ops.iter().filter(|g| g.is_two_qubit()).count(), want, "{kind:?}");
        }
        assert!(map(FeatureMapKind::Full, 3).circuit(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn pauli_x_at_zero_is_identity() {
        let s = map(FeatureMapKind::PauliX, 2).state(&[0.0, 0.0]).unwrap();
        assert!((s.amplitudes()[0] - C64::from(1.0)).norm() < 1e-12);
    }

    #[test]
    fn exact_kernel_examples() {
        for kind in FeatureMapKind::ALL {
            let m = map(kind, 3);
            let x = [0.3, -1.2, 2.0];
            assert!((quantum_kernel_exact(&m, &x, &x).unwrap() - 1.0).abs() < 1e-12);
        }
        let k = quantum_kernel_exact(&map(FeatureMapKind::PauliX, 1), &[0.0], &[PI]).unwrap();
        assert!(k.abs() < 1e-12);
    }

    /// Independent amplitude formula for the two-qubit full map:
    /// ⟨q|φ⟩ = ½ exp(−i/2 (x0 z0 + x1 z1 + x0 x1 z0 z1)), z = 1 − 2q.
    fn full_two_qubit_state(x: &[f64]) -> Vec<C64> {
        (0..4)
            .map(|idx| {
                let z0 = 1.0 - 2.0 * ((idx >> 1) & 1) as f64;
                let z1 = 1.0 - 2.0 * (idx & 1) as f64;
                let phase = -(x[0] * z0 + x[1] * z1 + x[0] * x[1] * z0 * z1) / 2.0;
                C64::from_polar(0.5, phase)
            })
            .collect()
    }

    #[test]
    fn full_map_two_qubits_matches_expansion() {
        let pts = random_points(10, 2, 3);
        let m = map(FeatureMapKind::Full, 2);
        for p in &pts {
            let s = m.state(p).unwrap();
            for (a, b) in s.amplitudes().iter().zip(full_two_qubit_state(p)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        for w in pts.windows(2) {
            let (a, b) = (full_two_qubit_state(&w[0]), full_two_qubit_state(&w[1]));
            let ip: C64 = a.iter().zip(&b).map(|(u, v)| u.conj() * v).sum();
            let k = quantum_kernel_exact(&m, &w[0], &w[1]).unwrap();
            assert!((k - ip.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(pauli_kernel_closed_form(&[0.4, 0.2], &[0.4, 0.2]).unwrap(), 1.0);
        assert!(pauli_kernel_closed_form(&[0.0], &[PI]).unwrap().abs() < 1e-15);
        assert!(pauli_kernel_closed_form(&[0.0], &[PI, 1.0]).is_err());

        let x = [0.7, -0.3];
        let p: f64 = 0.05;
        let want = ((1.0 - 4.0 * p / 3.0).powi(2) + (2.0 - 4.0 * p / 3.0) * (2.0 * p / 3.0)).powi(2);
        assert!((noisy_pauli_closed_form(&x, &x, p).unwrap() - want).abs() < 1e-15);
        for kind in [FeatureMapKind::PauliX, FeatureMapKind::PauliY, FeatureMapKind::PauliZ] {
            let k = noisy_quantum_kernel(&map(kind, 2), &x, &x, p).unwrap();
            assert!((k - want).abs() < 1e-10);
        }
        assert!((noisy_pauli_closed_form(&[1.0], &[-2.0], 0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(noisy_pauli_closed_form(&[1.0], &[-2.0], 1.2).is_err());
    }

    #[test]
    fn noisy_kernel_limits() {
        let pts = random_points(6, 3, 8);
        for kind in FeatureMapKind::ALL {
            let m = map(kind, 3);
            let k0 = noisy_quantum_kernel(&m, &pts[0], &pts[1], 0.0).unwrap();
            let ke = quantum_kernel_exact(&m, &pts[0], &pts[1]).unwrap();
            assert!((k0 - ke).abs() < 1e-10);
        }
        for n in 1..=3 {
            let x = &random_points(1, n, 1)[0];
            let k = noisy_quantum_kernel(&map(FeatureMapKind::PauliY, n), x, x, 0.75).unwrap();
            assert!((k - 0.5f64.powi(n as i32)).abs() < 1e-10);
        }
        assert!(noisy_quantum_kernel(&map(FeatureMapKind::Full, 1), &[0.0], &[0.0], -0.1).is_err());
    }

    #[test]
    fn shot_estimator_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = map(FeatureMapKind::PauliX, 2);
        let x = [0.4, 1.1];
        assert_eq!(estimate_kernel_shots(&m, &x, &x, 17, &mut rng).unwrap(), 1.0);
        let m1 = map(FeatureMapKind::PauliX, 1);
        assert_eq!(estimate_kernel_shots(&m1, &[0.0], &[PI], 50, &mut rng).unwrap(), 0.0);
        assert!(estimate_kernel_shots(&m1, &[0.0], &[PI], 0, &mut rng).is_err());
    }

    #[test]
    fn shot_estimator_is_unbiased() {
        // PauliX on one qubit with Δ = π/2 gives κ = 0.5.
        let m = map(FeatureMapKind::PauliX, 1);
        let (z, reps) = (10_000u32, 100);
        let kappa = quantum_kernel_exact(&m, &[0.0], &[PI / 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mean = (0..reps)
            .map(|_| estimate_kernel_shots(&m, &[0.0], &[PI / 2.0], z, &mut rng).unwrap())
            .sum::<f64>()
            / reps as f64;
        let se = (kappa * (1.0 - kappa) / z as f64).sqrt() / (reps as f64).sqrt();
        assert!((mean - kappa).abs() <= 3.0 * se, "{mean} vs {kappa}");
    }

    #[test]
    fn classical_examples() {
        let g = ClassicalKernel::Gaussian { gamma: 0.3 };
        assert_eq!(classical_kernel(&g, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        let lk = ClassicalKernel::Linear;
        assert_eq!(classical_kernel(&lk, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let pk = ClassicalKernel::Polynomial { gamma: 1.0, degree: 2 };
        assert_eq!(classical_kernel(&pk, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 4.0);
        let sk = ClassicalKernel::Sigmoid { gamma: 0.5, offset: -1.0 };
        let v = classical_kernel(&sk, &[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!((v - 0.0f64.tanh()).abs() < 1e-15);

        for bad in [
            ClassicalKernel::Gaussian { gamma: 0.0 },
            ClassicalKernel::Polynomial { gamma: 1.0, degree: 0 },
            ClassicalKernel::Sigmoid { gamma: 1.0, offset: 0.5 },
        ] {
            assert!(classical_kernel(&bad, &[1.0], &[1.0]).is_err());
        }
        assert_eq!(
            ClassicalKernel::default_for(ClassicalKind::Gaussian, 4),
            ClassicalKernel::Gaussian { gamma: 0.25 }
        );
    }

    #[test]
    fn spec_validation() {
        let lk = KernelSpec::classical(ClassicalKernel::Linear);
        assert!(lk.validate().is_ok());
        assert!(lk.with_noise(0.1).validate().is_err());
        assert!(lk.with_shots(Some(10), 0).validate().is_err());
        let q = KernelSpec::quantum(map(FeatureMapKind::Full, 2));
        assert!(q.with_shots(Some(0), 0).validate().is_err());
        assert!(q.with_noise(1.1).validate().is_err());
        assert_ne!(q.digest(), q.with_noise(0.1).digest());
    }

    #[test]
    fn spec_json_round_trip_and_aliases() {
        let spec = KernelSpec::quantum(map(FeatureMapKind::Circular, 5)).with_noise(0.05);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<KernelSpec>(&json).unwrap(), spec);
        let k: FeatureMapKind = serde_json::from_str("\"cqk\"").unwrap();
        assert_eq!(k, FeatureMapKind::Circular);
        let c: ClassicalKernel =
            serde_json::from_str(r#"{"kind":"gaussian","gamma":0.5}"#).unwrap();
        assert_eq!(c, ClassicalKernel::Gaussian { gamma: 0.5 });
    }

    #[test]
    fn tiny_grams() {
        let spec = KernelSpec::quantum(map(FeatureMapKind::PauliX, 2));
        let k = gram_matrix_square(&[vec![0.3, 0.1]], &spec, 1).unwrap();
        assert!((k.get(0, 0) - 1.0).abs() < 1e-12 && k.rows() == 1);
        let k = gram_matrix_square(&random_points(3, 2, 5), &spec, 2).unwrap();
        k.check_mercer().unwrap();
        assert!(gram_matrix(&[vec![0.0]], &[vec![0.0, 1.0]], &spec, 1).is_err());
    }

    #[test]
    fn gram_paths_match_literal_definitions() {
        let rows = random_points(5, 3, 10);
        let cols = random_points(4, 3, 11);
        for kind in FeatureMapKind::ALL {
            let m = map(kind, 3);
            let exact = gram_matrix(&rows, &cols, &KernelSpec::quantum(m), 2).unwrap();
            let noisy = gram_matrix(&rows, &cols, &KernelSpec::quantum(m).with_noise(0.1), 2).unwrap();
            for i in 0..rows.len() {
                for j in 0..cols.len() {
                    let e = quantum_kernel_exact(&m, &rows[i], &cols[j]).unwrap();
                    let n = noisy_quantum_kernel(&m, &rows[i], &cols[j], 0.1).unwrap();
                    assert!((exact.get(i, j) - e).abs() < 1e-12);
                    assert!((noisy.get(i, j) - n).abs() < 1e-12, "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn noisy_square_gram_matches_full_evaluation() {
        let pts = random_points(6, 3, 21);
        for kind in [FeatureMapKind::Full, FeatureMapKind::Circular, FeatureMapKind::PauliY] {
            let spec = KernelSpec::quantum(map(kind, 3)).with_noise(0.2);
            let sq = gram_matrix_square(&pts, &spec, 2).unwrap();
            let full = gram_matrix(&pts, &pts, &spec, 2).unwrap();
            for (a, b) in sq.values().iter().zip(full.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shot_gram_is_schedule_independent() {
        let pts = random_points(6, 2, 12);
        let spec = KernelSpec::quantum(map(FeatureMapKind::Linear, 2)).with_shots(Some(200), 9);
        let a = gram_matrix_square(&pts, &spec, 1).unwrap();
        let b = gram_matrix_square(&pts, &spec, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.symmetry_error() == 0.0);
        let noisy = spec.with_noise(0.05);
        let c = gram_matrix(&pts, &pts, &noisy, 1).unwrap();
        let d = gram_matrix(&pts, &pts, &noisy, 3).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn classical_gram_and_submatrix() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 1.0]];
        let k = gram_matrix_square(&pts, &KernelSpec::classical(ClassicalKernel::Linear), 1).unwrap();
        assert_eq!(k.get(0, 1), 11.0);
        let sub = k.submatrix(&[2, 0], &[1]);
        assert_eq!(sub.values(), &[4.0, 11.0]);
        assert_eq!(sub.row_ids, vec!["2", "0"]);
        let id = KernelMatrix::from_values(4, 4, (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect(), k.spec).unwrap();
        assert_eq!(id.frobenius_norm(), 2.0);
    }

    #[test]
    fn csv_and_cache_round_trip() {
        let pts = random_points(4, 2, 2);
        let spec = KernelSpec::quantum(map(FeatureMapKind::Full, 2));
        let k = gram_matrix_square(&pts, &spec, 1).unwrap();

        let mut buf = Vec::new();
        k.write_cache(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"QKM1");
        assert_eq!(buf.len(), 4 + 32 + 16 + 8 * 16);
        let back = KernelMatrix::read_cache(&buf[..], &spec).unwrap();
        assert_eq!(back.values(), k.values());
        assert!(KernelMatrix::read_cache(&buf[..], &spec.with_noise(0.1)).is_err());

        let mut csv = Vec::new();
        k.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "id,0,1,2,3");
        assert_eq!(lines.len(), 5);
        let v: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(v, k.get(0, 1));

        let name = cache_file_name("abcdef0123456789abcdef", &spec);
        assert!(name.starts_with("abcdef0123456789-") && name.ends_with(".qkm"));
    }

    proptest! {
        #[test]
        fn pauli_kinds_agree(n in 1usize..=4, seed in 0u64..10_000) {
            let pts = random_points(2, n, seed);
            let kx = quantum_kernel_exact(&map(FeatureMapKind::PauliX, n), &pts[0], &pts[1]).unwrap();
            let ky = quantum_kernel_exact(&map(FeatureMapKind::PauliY, n), &pts[0], &pts[1]).unwrap();
            let kz = quantum_kernel_exact(&map(FeatureMapKind::PauliZ, n), &pts[0], &pts[1]).unwrap();
            let cf = pauli_kernel_closed_form(&pts[0], &pts[1]).unwrap();
            prop_assert!((kx - ky).abs() < 1e-12 && (ky - kz).abs() < 1e-12);
            prop_assert!((kx - cf).abs() < 1e-10);
        }

        #[test]
        fn kernel_ranges(n in 1usize..=4, seed in 0u64..10_000, p in 0.0f64..=1.0) {
            let pts = random_points(2, n, seed);
            for kind in FeatureMapKind::ALL {
                let k = quantum_kernel_exact(&map(kind, n), &pts[0], &pts[1]).unwrap();
                prop_assert!((0.0..=1.0).contains(&k));
                let kn = noisy_quantum_kernel(&map(kind, n), &pts[0], &pts[1], p).unwrap();
                prop_assert!((0.0..=1.0).contains(&kn));
            }
            let g = classical_kernel(&ClassicalKernel::Gaussian { gamma: 0.2 }, &pts[0], &pts[1]).unwrap();
            prop_assert!(g > 0.0 && g <= 1.0);
        }

        #[test]
        fn noise_lowers_coincident_kernel(n in 1usize..=4, p in 0.0f64..0.74, dp in 0.001f64..0.01) {
            let x = vec![0.3; n];
            let a = noisy_pauli_closed_form(&x, &x, p).unwrap();
            let b = noisy_pauli_closed_form(&x, &x, (p + dp).min(0.75)).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn exact_grams_are_mercer(kind_idx in 0usize..6, n in 1usize..=4, seed in 0u64..1000) {
            let spec = KernelSpec::quantum(map(FeatureMapKind::ALL[kind_idx], n));
            let k = gram_matrix_square(&random_points(8, n, seed), &spec, 1).unwrap();
            prop_assert!(k.check_mercer().is_ok());
        }
    }
}
