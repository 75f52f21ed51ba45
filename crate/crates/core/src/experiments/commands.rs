use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConcentrationConfig, ExperimentConfig, KernelChoice};
use super::select::{derive_seed, fit_and_score, FitOutcome, KernelSettings, Selection};
use crate::data::{stratified_kfold, stratified_split, stratified_subsample, Dataset, Split};
use crate::error::{Error, Result};
use crate::kernels::{cache_file_name, gram_matrix, gram_matrix_square, FeatureMap, KernelMatrix, KernelSpec};
use crate::metrics::{classification_metrics, confusion, roc_curves, ConfusionMatrix, GeneralizationReport, MetricsReport, RocReport};
use crate::rng;
use crate::svm::{smo_train_binary, Gram, SmoParams};

/// Data summary embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataInfo {
    pub name: String,
    pub instances: usize,
    pub features: usize,
    pub classes: usize,
    pub dropped_rows: usize,
    pub digest: String,
}

impl DataInfo {
    pub fn of(d: &Dataset) -> Self {
        DataInfo {
            name: d.name.clone(),
            instances: d.len(),
            features: d.n_features(),
            classes: d.n_classes(),
            dropped_rows: d.dropped_rows,
            digest: d.digest(),
        }
    }
}

fn load(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let d = cfg.dataset.load()?;
    info!("loaded {} ({} x {}, {} classes)", d.name, d.len(), d.n_features(), d.n_classes());
    Ok(d)
}

struct Prepared {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<usize>,
    test_x: Vec<Vec<f64>>,
    test_y: Vec<usize>,
}

fn prepare(cfg: &ExperimentConfig, d: &Dataset, split: &Split) -> Result<Prepared> {
    let p = cfg.preprocessing().apply(d, split)?;
    Ok(Prepared {
        train_x: p.train,
        train_y: split.train.iter().map(|&i| d.labels[i]).collect(),
        test_x: p.test,
        test_y: split.test.iter().map(|&i| d.labels[i]).collect(),
    })
}

fn fit(cfg: &ExperimentConfig, p: &Prepared, l: usize, choice: &KernelChoice, settings: &KernelSettings, sel_seed: u64) -> Result<FitOutcome> {
    let n = p.train_x.first().map_or(0, Vec::len);
    let specs = settings.candidates(choice, n)?;
    fit_and_score(&p.train_x, &p.train_y, &p.test_x, &p.test_y, l, &specs, &Selection::from_config(cfg, sel_seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub kernel: String,
    pub spec: KernelSpec,
    pub rows: usize,
    pub file: String,
    pub cache_file: String,
    #[serde(skip)]
    pub from_cache: bool,
    pub diagonal_error: f64,
    pub symmetry_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrixReport {
    pub data: DataInfo,
    pub records: Vec<MatrixRecord>,
    pub matrices: Vec<KernelMatrix>,
}

/// Gram matrix over the whole (preprocessed) dataset for each kernel, read
/// from or stored in the cache directory.
pub fn kernel_matrix(cfg: &ExperimentConfig, cache_dir: &Path) -> Result<KernelMatrixReport> {
    let d = load(cfg)?;
    let all = Split {
        train: (0..d.len()).collect(),
        test: vec![],
        seed: cfg.seed,
    };
    let x = cfg.preprocessing().apply(&d, &all)?.train;
    let prepared = Dataset { features: x.clone(), ..d.clone() };
    let hash = prepared.digest();
    let settings = KernelSettings { classical_sweep: false, ..KernelSettings::from_config(cfg) };
    fs::create_dir_all(cache_dir).map_err(|source| Error::File { path: cache_dir.to_owned(), source })?;
    let ids: Vec<String> = (0..d.len()).map(|i| i.to_string()).collect();
    let mut records = Vec::new();
    let mut matrices = Vec::new();
    for choice in cfg.kernels_or(false) {
        let spec = settings.candidates(&choice, x[0].len())?.remove(0);
        let name = cache_file_name(&hash, &spec);
        let path = cache_dir.join(&name);
        let (k, from_cache) = match fs::File::open(&path) {
            Ok(f) => (KernelMatrix::read_cache(std::io::BufReader::new(f), &spec)?, true),
            Err(_) => {
                let k = gram_matrix_square(&x, &spec, cfg.workers)?;
                let tmp = path.with_extension("tmp");
                let f = fs::File::create(&tmp).map_err(|source| Error::File { path: tmp.clone(), source })?;
                k.write_cache(std::io::BufWriter::new(f))?;
                fs::rename(&tmp, &path)?;
                (k, false)
            }
        };
        info!("{} {}x{} {}", spec, k.rows(), k.cols(), if from_cache { "(cached)" } else { "" });
        let k = k.with_ids(ids.clone(), ids.clone())?;
        records.push(MatrixRecord {
            kernel: choice.label().to_string(),
            spec,
            rows: k.rows(),
            file: format!("matrices/{}.csv", choice.label().to_ascii_lowercase()),
            cache_file: name,
            from_cache,
            diagonal_error: k.diagonal_error(),
            symmetry_error: k.symmetry_error(),
        });
        matrices.push(k);
    }
    Ok(KernelMatrixReport {
        data: DataInfo::of(&d),
        records,
        matrices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub accuracy: f64,
    pub c: f64,
    pub spec: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCv {
    pub kernel: String,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidateReport {
    pub data: DataInfo,
    pub k: usize,
    pub kernels: Vec<KernelCv>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stratified k-fold accuracy per kernel; preprocessing and C are fit on
/// each fold's training part.
pub fn crossvalidate(cfg: &ExperimentConfig) -> Result<CrossValidateReport> {
    let d = load(cfg)?;
    let folds = stratified_kfold(&d.labels, d.n_classes(), cfg.folds, cfg.seed)?;
    let settings = KernelSettings::from_config(cfg);
    let prepared: Vec<Prepared> = (0..folds.k())
        .map(|f| prepare(cfg, &d, &folds.split(f)))
        .collect::<Result<_>>()?;
    let mut kernels = Vec::new();
    for choice in cfg.kernels_or(true) {
        let mut results = Vec::new();
        for (f, p) in prepared.iter().enumerate() {
            let out = fit(cfg, p, d.n_classes(), &choice, &settings, derive_seed(cfg.seed, f as u64 + 1))?;
            results.push(FoldResult {
                fold: f,
                accuracy: out.test_accuracy,
                c: out.c,
                spec: out.spec,
            });
        }
        let (mean_accuracy, std_accuracy) = mean_std(&results.iter().map(|r| r.accuracy).collect::<Vec<_>>());
        info!("{} {}: {:.4} ± {:.4}", d.name, choice.label(), mean_accuracy, std_accuracy);
        kernels.push(KernelCv {
            kernel: choice.label().to_string(),
            folds: results,
            mean_accuracy,
            std_accuracy,
        });
    }
    Ok(CrossValidateReport {
        data: DataInfo::of(&d),
        k: folds.k(),
        kernels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub kernel: String,
    pub noise: f64,
    pub spec: KernelSpec,
    pub c: f64,
    pub train_accuracy: f64,
    pub converged: bool,
    pub metrics: MetricsReport,
    pub roc: RocReport,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub data: DataInfo,
    pub train_size: usize,
    pub test_size: usize,
    pub split_seed: u64,
    pub runs: Vec<EvaluationRun>,
}

/// Stratified train/test evaluation of each kernel; quantum kernels are
/// repeated at each noise level of `noise_sweep`.
pub fn evaluate(cfg: &ExperimentConfig) -> Result<EvaluateReport> {
    let d = load(cfg)?;
    let l = d.n_classes();
    let split = stratified_split(&d.labels, l, cfg.test_fraction, cfg.seed)?;
    let p = prepare(cfg, &d, &split)?;
    let base = KernelSettings::from_config(cfg);
    let mut runs = Vec::new();
    for choice in cfg.kernels_or(false) {
        let mut levels = vec![cfg.noise];
        if choice.is_quantum() {
            levels.extend(cfg.noise_sweep.iter().copied().filter(|p| *p != cfg.noise));
        }
        for noise in levels {
            let settings = KernelSettings { noise, ..base };
            let out = fit(cfg, &p, l, &choice, &settings, derive_seed(cfg.seed, 1))?;
            let cm = confusion(&p.test_y, &out.predictions, l)?;
            let metrics = classification_metrics(&cm)?;
            let roc = roc_curves(&p.test_y, &out.decision_values, l)?;
            info!("{} {} p={noise}: accuracy {:.4} (C = {})", d.name, choice.label(), metrics.accuracy, out.c);
            runs.push(EvaluationRun {
                kernel: choice.label().to_string(),
                noise,
                spec: out.spec,
                c: out.c,
                train_accuracy: out.train_accuracy,
                converged: out.converged,
                metrics,
                roc,
                confusion: cm,
                predictions: out.predictions,
            });
        }
    }
    Ok(EvaluateReport {
        data: DataInfo::of(&d),
        train_size: split.train.len(),
        test_size: split.test.len(),
        split_seed: cfg.seed,
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub kernel: String,
    pub fraction: f64,
    pub mean_train_size: f64,
    pub train_accuracy: f64,
    pub train_std: f64,
    pub test_accuracy: f64,
    pub test_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveReport {
    pub data: DataInfo,
    pub points: Vec<LearningPoint>,
}

/// Train and test accuracy against training-set fraction, over the folds of
/// a stratified k-fold; each fold's training part is subsampled per class.
pub fn learning_curve(cfg: &ExperimentConfig) -> Result<LearningCurveReport> {
    let d = load(cfg)?;
    let l = d.n_classes();
    let folds = stratified_kfold(&d.labels, l, cfg.folds, cfg.seed)?;
    let settings = KernelSettings::from_config(cfg);
    let mut points = Vec::new();
    for choice in cfg.kernels_or(false) {
        for &fraction in &cfg.learning_fractions {
            let mut train_acc = Vec::new();
            let mut test_acc = Vec::new();
            let mut sizes = Vec::new();
            for f in 0..folds.k() {
                let full = folds.split(f);
                let labels: Vec<usize> = full.train.iter().map(|&i| d.labels[i]).collect();
                let keep = if fraction < 1.0 {
                    stratified_subsample(&labels, l, fraction, derive_seed(cfg.seed, 1000 + f as u64))?
                } else {
                    (0..labels.len()).collect()
                };
                let split = Split {
                    train: keep.iter().map(|&k| full.train[k]).collect(),
                    ..full
                };
                let p = prepare(cfg, &d, &split)?;
                let out = fit(cfg, &p, l, &choice, &settings, derive_seed(cfg.seed, f as u64 + 1))?;
                train_acc.push(out.train_accuracy);
                test_acc.push(out.test_accuracy);
                sizes.push(split.train.len() as f64);
            }
            let (train_accuracy, train_std) = mean_std(&train_acc);
            let (test_accuracy, test_std) = mean_std(&test_acc);
            points.push(LearningPoint {
                kernel: choice.label().to_string(),
                fraction,
                mean_train_size: mean_std(&sizes).0,
                train_accuracy,
                train_std,
                test_accuracy,
                test_std,
            });
        }
    }
    Ok(LearningCurveReport {
        data: DataInfo::of(&d),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub qubits: usize,
    pub train_size: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    /// Test loss relative to the first training size; NaN when that is 0.
    pub relative_test_loss: f64,
    /// Spread of the off-diagonal training kernel values.
    pub kernel_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub labels: String,
    pub rows: Vec<ConcentrationRow>,
}

pub const CONCENTRATION_LABEL_NOTE: &str = "reconstructed labels: sign of a random teacher \
    sum_a w_a k(x, anchor_a) minus its median, w_a uniform on [-1, 1], anchors held out; \
    losses are 0-1 losses";

/// Hard-margin-like SVM on shot-estimated kernels of uniform random data,
/// for increasing training sizes at each register size.
pub fn concentration(cfg: &ConcentrationConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &n in &cfg.qubits {
        let mut r = rng::stream(cfg.seed, n as u64);
        let tau = std::f64::consts::TAU;
        let point = |r: &mut rng::StreamRng| (0..n).map(|_| r.random_range(0.0..tau)).collect::<Vec<f64>>();
        let x: Vec<Vec<f64>> = (0..cfg.total_points).map(|_| point(&mut r)).collect();
        let anchors: Vec<Vec<f64>> = (0..cfg.anchors).map(|_| point(&mut r)).collect();
        let w: Vec<f64> = (0..cfg.anchors).map(|_| r.random_range(-1.0..1.0)).collect();
        let map = FeatureMap::new(cfg.kernel, n)?;
        let teacher_k = gram_matrix(&x, &anchors, &KernelSpec::quantum(map), cfg.workers)?;
        let score: Vec<f64> = (0..x.len())
            .map(|i| teacher_k.row(i).iter().zip(&w).map(|(k, w)| k * w).sum())
            .collect();
        let mut sorted = score.clone();
        sorted.sort_by(f64::total_cmp);
        let median = (sorted[(sorted.len() - 1) / 2] + sorted[sorted.len() / 2]) / 2.0;
        let y: Vec<f64> = score.iter().map(|s| if *s > median { 1.0 } else { -1.0 }).collect();

        // Test points first, then a training pool interleaving the classes
        // so every prefix holds both.
        let mut order: Vec<usize> = (0..x.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
        let (test, rest) = order.split_at(cfg.test_points);
        let (pos, neg): (Vec<usize>, Vec<usize>) = rest.iter().partition(|&&i| y[i] > 0.0);
        let mut pool: Vec<usize> = Vec::with_capacity(rest.len());
        for k in 0..pos.len().max(neg.len()) {
            pool.extend(pos.get(k));
            pool.extend(neg.get(k));
        }
        let pool_x: Vec<Vec<f64>> = pool.iter().map(|&i| x[i].clone()).collect();
        let test_x: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
        let spec = KernelSpec::quantum(map).with_shots(Some(cfg.shots), derive_seed(cfg.seed, 100 + n as u64));
        let k_pool = gram_matrix_square(&pool_x, &spec, cfg.workers)?;
        let test_spec = spec.with_shots(Some(cfg.shots), derive_seed(cfg.seed, 200 + n as u64));
        let k_test = gram_matrix(&test_x, &pool_x, &test_spec, cfg.workers)?;

        let mut first_test_loss = None;
        for &size in &cfg.train_sizes {
            let idx: Vec<usize> = (0..size).collect();
            let k_tr = k_pool.submatrix(&idx, &idx);
            let y_tr: Vec<f64> = pool[..size].iter().map(|&i| y[i]).collect();
            let model = smo_train_binary(Gram::try_from(&k_tr)?, &y_tr, &SmoParams::with_c(cfg.c))?;
            let loss = |k: &KernelMatrix, truth: &[f64]| -> Result<f64> {
                let mut wrong = 0;
                for (i, t) in truth.iter().enumerate() {
                    if model.decision(&k.row(i)[..size])?.signum() != *t {
                        wrong += 1;
                    }
                }
                Ok(wrong as f64 / truth.len() as f64)
            };
            let train_loss = loss(&k_tr, &y_tr)?;
            let y_te: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let test_loss = loss(&k_test, &y_te)?;
            let first = *first_test_loss.get_or_insert(test_loss);
            let off: Vec<f64> = (0..size)
                .flat_map(|i| (0..size).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| k_tr.get(i, j))
                .collect();
            rows.push(ConcentrationRow {
                qubits: n,
                train_size: size,
                train_loss,
                test_loss,
                relative_test_loss: if first > 0.0 { test_loss / first } else { f64::NAN },
                kernel_variance: mean_std(&off).1.powi(2),
            });
        }
        info!("concentration: {n} qubits done");
    }
    Ok(ConcentrationReport {
        labels: CONCENTRATION_LABEL_NOTE.to_string(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationTable {
    pub data: DataInfo,
    pub train_size: usize,
    pub rows: Vec<GeneralizationReport>,
}

/// Frobenius norm, Rademacher estimate and bound of each kernel's training
/// Gram matrix, with classical kernels at their default hyperparameters.
pub fn generalization(cfg: &ExperimentConfig) -> Result<GeneralizationTable> {
    let d = load(cfg)?;
    let split = stratified_split(&d.labels, d.n_classes(), cfg.test_fraction, cfg.seed)?;
    let p = prepare(cfg, &d, &split)?;
    let settings = KernelSettings { classical_sweep: false, ..KernelSettings::from_config(cfg) };
    let mut rows = Vec::new();
    for choice in cfg.kernels_or(true) {
        let spec = settings.candidates(&choice, p.train_x[0].len())?.remove(0);
        let k = gram_matrix_square(&p.train_x, &spec, cfg.workers)?;
        rows.push(GeneralizationReport::compute(
            choice.label(),
            &k,
            1.0,
            cfg.rademacher_draws,
            derive_seed(cfg.seed, 7),
        )?);
    }
    Ok(GeneralizationTable {
        data: DataInfo::of(&d),
        train_size: split.train.len(),
        rows,
    })
}

/// Default output directory for a command.
pub fn default_out(command: &str, name: &str) -> PathBuf {
    PathBuf::from("runs").join(format!("{command}-{name}"))
}

