use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, Preprocessing, BUILTIN_DATASETS};
use crate::error::{Error, Result};
use crate::kernels::{ClassicalKernel, ClassicalKind, FeatureMapKind};
use crate::svm::Strategy;

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const NOISE_SWEEP: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

/// A shipped dataset by name, or a schema file on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Builtin(String),
    Schema { schema: PathBuf },
}

impl DatasetRef {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetRef::Builtin(name) => data::load_builtin(name),
            DatasetRef::Schema { schema } => data::load_with_schema(schema),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetRef::Builtin(name) => name.clone(),
            DatasetRef::Schema { schema } => schema
                .file_stem()
                .map(|s| s.to_string_lossy().trim_end_matches(".schema").to_string())
                .unwrap_or_default(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DatasetRef::Builtin(name) if BUILTIN_DATASETS.contains(&name.as_str()) => Ok(()),
            DatasetRef::Builtin(name) => Err(Error::invalid(format!(
                "unknown dataset {name:?}; use one of {BUILTIN_DATASETS:?} or {{\"schema\": <path>}}"
            ))),
            DatasetRef::Schema { schema } if schema.is_file() => Ok(()),
            DatasetRef::Schema { schema } => Err(Error::invalid(format!(
                "schema file {} does not exist",
                schema.display()
            ))),
        }
    }

    /// PCA at 0.85 for the three datasets reduced in the benchmark setup.
    pub fn default_preprocessing(&self) -> Preprocessing {
        let reduced = matches!(self, DatasetRef::Builtin(n) if ["glass", "ecoli", "vowel"].contains(&n.as_str()));
        Preprocessing {
            pca_threshold: reduced.then_some(0.85),
            fit_on_all: false,
        }
    }

    /// Best-performing quantum kernel reported for each shipped dataset.
    pub fn reference_kernel(&self) -> KernelName {
        let kind = match self {
            DatasetRef::Builtin(n) => match n.as_str() {
                "penguin" => FeatureMapKind::Circular,
                "tae" | "vowel" => FeatureMapKind::Full,
                "ecoli" => FeatureMapKind::Linear,
                _ => FeatureMapKind::PauliX,
            },
            DatasetRef::Schema { .. } => FeatureMapKind::PauliX,
        };
        KernelName::Quantum(kind)
    }
}

/// Kernel named by its table abbreviation (`fqk`, `lqk`, `cqk`, `xqk`,
/// `yqk`, `zqk`, `lk`, `pk`, `sk`, `gk`, case-insensitive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelName {
    Quantum(FeatureMapKind),
    Classical(ClassicalKind),
}

impl KernelName {
    pub fn all() -> Vec<KernelName> {
        FeatureMapKind::ALL
            .into_iter()
            .map(KernelName::Quantum)
            .chain(ClassicalKind::ALL.into_iter().map(KernelName::Classical))
            .collect()
    }

    pub fn abbreviation(&self) -> &'static str {
        match self {
            KernelName::Quantum(k) => k.abbreviation(),
            KernelName::Classical(k) => k.abbreviation(),
        }
    }
}

impl FromStr for KernelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "pauli" {
            return Ok(KernelName::Quantum(FeatureMapKind::PauliX));
        }
        KernelName::all()
            .into_iter()
            .find(|k| k.abbreviation().eq_ignore_ascii_case(&lower))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown kernel {s:?}; expected one of fqk, lqk, cqk, xqk, yqk, zqk, lk, pk, sk, gk"
                ))
            })
    }
}

impl TryFrom<String> for KernelName {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelName> for String {
    fn from(k: KernelName) -> String {
        k.abbreviation().to_ascii_lowercase()
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbreviation())
    }
}

/// A named kernel (classical ones get a hyperparameter sweep) or a
/// classical kernel with fixed hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Named(KernelName),
    Fixed(ClassicalKernel),
}

impl KernelChoice {
    pub fn label(&self) -> &'static str {
        match self {
            KernelChoice::Named(n) => n.abbreviation(),
            KernelChoice::Fixed(k) => k.kind().abbreviation(),
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, KernelChoice::Named(KernelName::Quantum(_)))
    }
}

fn default_c_grid() -> Vec<f64> {
    DEFAULT_C_GRID.to_vec()
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_folds() -> usize {
    5
}
fn default_inner_folds() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_scale() -> f64 {
    1.0
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
fn default_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}
fn default_draws() -> usize {
    crate::metrics::DEFAULT_RADEMACHER_DRAWS
}

/// Settings shared by every dataset-driven command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    /// Defaults depend on the command: the reference kernel for
    /// kernel-matrix, evaluate and learning-curve, all ten otherwise.
    #[serde(default)]
    pub kernels: Option<Vec<KernelChoice>>,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Folds of the inner cross-validation that picks C.
    #[serde(default = "default_inner_folds")]
    pub inner_folds: usize,
    /// `None` is the exact kernel.
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub noise: f64,
    /// Extra noise levels run by `evaluate` for the quantum kernels.
    #[serde(default)]
    pub noise_sweep: Vec<f64>,
    /// Defaults to PCA at 0.85 for glass, ecoli and vowel.
    #[serde(default)]
    pub preprocessing: Option<Preprocessing>,
    /// Sweep classical hyperparameters around their defaults.
    #[serde(default = "default_true")]
    pub classical_sweep: bool,
    #[serde(default = "default_scale")]
    pub angle_scale: f64,
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_fractions")]
    pub learning_fractions: Vec<f64>,
    #[serde(default = "default_draws")]
    pub rademacher_draws: usize,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetRef) -> Self {
        ExperimentConfig {
            dataset,
            kernels: None,
            strategy: Strategy::OneVsAll,
            c_grid: default_c_grid(),
            seed: 0,
            test_fraction: default_test_fraction(),
            folds: default_folds(),
            inner_folds: default_inner_folds(),
            shots: None,
            noise: 0.0,
            noise_sweep: Vec::new(),
            preprocessing: None,
            classical_sweep: true,
            angle_scale: 1.0,
            workers: default_workers(),
            out: None,
            cache_dir: None,
            learning_fractions: default_fractions(),
            rademacher_draws: default_draws(),
        }
    }

    pub fn builtin(name: &str) -> Self {
        Self::new(DatasetRef::Builtin(name.to_string()))
    }

    pub fn with_kernels(mut self, kernels: &[KernelName]) -> Self {
        self.kernels = Some(kernels.iter().copied().map(KernelChoice::Named).collect());
        self
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
            .unwrap_or_else(|| self.dataset.default_preprocessing())
    }

    pub fn kernels_or(&self, all: bool) -> Vec<KernelChoice> {
        match &self.kernels {
            Some(k) => k.clone(),
            None if all => KernelName::all().into_iter().map(KernelChoice::Named).collect(),
            None => vec![KernelChoice::Named(self.dataset.reference_kernel())],
        }
    }

    /// Check every range before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("c_grid must be a non-empty list of positive numbers"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::invalid("test_fraction must lie in (0, 1)"));
        }
        if self.folds < 2 || self.inner_folds < 2 {
            return Err(Error::invalid("folds and inner_folds must be at least 2"));
        }
        if self.shots == Some(0) {
            return Err(Error::invalid("shots must be positive; omit it for exact kernels"));
        }
        for p in std::iter::once(&self.noise).chain(&self.noise_sweep) {
            if !(0.0..=0.75).contains(p) {
                return Err(Error::invalid(format!("noise {p} outside [0, 0.75]")));
            }
        }
        if let Some(t) = self.preprocessing.and_then(|p| p.pca_threshold) {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(format!("pca_threshold {t} outside (0, 1]")));
            }
        }
        if self.kernels.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::invalid("kernels must not be empty"));
        }
        for k in self.kernels.iter().flatten() {
            if let KernelChoice::Fixed(c) = k {
                c.validate()?;
            }
        }
        if !(self.angle_scale.is_finite() && self.angle_scale != 0.0) {
            return Err(Error::invalid("angle_scale must be finite and non-zero"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if self.learning_fractions.is_empty()
            || self.learning_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0))
        {
            return Err(Error::invalid("learning_fractions must lie in (0, 1]"));
        }
        if self.rademacher_draws == 0 {
            return Err(Error::invalid("rademacher_draws must be positive"));
        }
        Ok(())
    }
}

fn default_qubits() -> Vec<usize> {
    (4..=10).collect()
}
fn default_total() -> usize {
    150
}
fn default_shots() -> u32 {
    1000
}
fn default_test_points() -> usize {
    20
}
fn default_concentration_seed() -> u64 {
    15
}
fn default_sizes() -> Vec<usize> {
    (1..=13).map(|i| 10 * i).collect()
}
fn default_anchors() -> usize {
    10
}
fn default_hard_c() -> f64 {
    1e3
}
fn default_concentration_kernel() -> FeatureMapKind {
    FeatureMapKind::PauliZ
}

/// Synthetic-data study of kernel concentration. Labels come from a random
/// teacher `sign(Σ_a w_a κ(x, anchor_a) − median)` over held-out anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    #[serde(default = "default_qubits")]
    pub qubits: Vec<usize>,
    #[serde(default = "default_total")]
    pub total_points: usize,
    #[serde(default = "default_shots")]
    pub shots: u32,
    #[serde(default = "default_test_points")]
    pub test_points: usize,
    #[serde(default = "default_concentration_seed")]
    pub seed: u64,
    /// Nested training sizes; the first one is N_init.
    #[serde(default = "default_sizes")]
    pub train_sizes: Vec<usize>,
    #[serde(default = "default_anchors")]
    pub anchors: usize,
    #[serde(default = "default_hard_c")]
    pub c: f64,
    #[serde(default = "default_concentration_kernel")]
    pub kernel: FeatureMapKind,
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ConcentrationConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.qubits.is_empty() || self.qubits.iter().any(|&q| q == 0 || q > crate::qsim::MAX_QUBITS) {
            return Err(Error::invalid(format!(
                "qubits must be a non-empty list within 1..={}",
                crate::qsim::MAX_QUBITS
            )));
        }
        if self.shots == 0 {
            return Err(Error::invalid("shots must be positive"));
        }
        if self.test_points == 0 || self.test_points >= self.total_points {
            return Err(Error::invalid("test_points must lie in 1..total_points"));
        }
        let pool = self.total_points - self.test_points;
        if self.train_sizes.is_empty()
            || self.train_sizes[0] < 2
            || self.train_sizes.windows(2).any(|w| w[0] >= w[1])
            || *self.train_sizes.last().unwrap() > pool
        {
            return Err(Error::invalid(format!(
                "train_sizes must increase strictly from at least 2 up to at most {pool}"
            )));
        }
        if self.anchors == 0 {
            return Err(Error::invalid("anchors must be positive"));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invalid("c must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(())
    }
}
