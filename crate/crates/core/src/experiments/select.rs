//! Kernel construction and C selection by inner cross-validation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, KernelChoice, KernelName};
use crate::data::stratified_kfold;
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix_square, ClassicalKernel, ClassicalKind, FeatureMap, KernelMatrix, KernelSpec};
use crate::rng;
use crate::svm::{AbsentClassPolicy, Gram, MulticlassModel, Strategy};

/// Derive an independent seed for a sub-task.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    rng::stream(seed, tag).random()
}

/// Hyperparameter candidates for a classical kernel on `n` features. The
/// default setting comes first so it wins ties.
pub fn classical_candidates(kind: ClassicalKind, n: usize, sweep: bool) -> Vec<ClassicalKernel> {
    let default = ClassicalKernel::default_for(kind, n);
    if !sweep {
        return vec![default];
    }
    let inv_n = 1.0 / n.max(1) as f64;
    let mut out = vec![default];
    let extra: Vec<ClassicalKernel> = match kind {
        ClassicalKind::Linear => vec![],
        ClassicalKind::Polynomial => vec![
            ClassicalKernel::Polynomial { gamma: 1.0, degree: 2 },
            ClassicalKernel::Polynomial { gamma: inv_n, degree: 2 },
            ClassicalKernel::Polynomial { gamma: inv_n, degree: 3 },
        ],
        ClassicalKind::Sigmoid => vec![
            ClassicalKernel::Sigmoid { gamma: 0.1 * inv_n, offset: -1.0 },
            ClassicalKernel::Sigmoid { gamma: inv_n, offset: -0.1 },
            ClassicalKernel::Sigmoid { gamma: 0.1 * inv_n, offset: -0.1 },
        ],
        ClassicalKind::Gaussian => vec![
            ClassicalKernel::Gaussian { gamma: 0.1 * inv_n },
            ClassicalKernel::Gaussian { gamma: 10.0 * inv_n },
        ],
    };
    out.extend(extra);
    out
}

/// Kernel settings that do not depend on the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSettings {
    pub noise: f64,
    pub shots: Option<u32>,
    pub seed: u64,
    pub angle_scale: f64,
    pub classical_sweep: bool,
}

impl KernelSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        KernelSettings {
            noise: cfg.noise,
            shots: cfg.shots,
            seed: cfg.seed,
            angle_scale: cfg.angle_scale,
            classical_sweep: cfg.classical_sweep,
        }
    }

    /// Concrete kernel specs to try for `choice` on `n` features.
    pub fn candidates(&self, choice: &KernelChoice, n: usize) -> Result<Vec<KernelSpec>> {
        match choice {
            KernelChoice::Named(KernelName::Quantum(kind)) => {
                let map = FeatureMap::new(*kind, n)?.with_angle_scale(self.angle_scale)?;
                Ok(vec![KernelSpec::quantum(map)
                    .with_noise(self.noise)
                    .with_shots(self.shots, self.seed)])
            }
            KernelChoice::Named(KernelName::Classical(kind)) => Ok(classical_candidates(*kind, n, self.classical_sweep)
                .into_iter()
                .map(KernelSpec::classical)
                .collect()),
            KernelChoice::Fixed(k) => Ok(vec![KernelSpec::classical(*k)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub strategy: Strategy,
    pub c_grid: Vec<f64>,
    pub inner_folds: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Selection {
    pub fn from_config(cfg: &ExperimentConfig, seed: u64) -> Self {
        Selection {
            strategy: cfg.strategy,
            c_grid: cfg.c_grid.clone(),
            inner_folds: cfg.inner_folds,
            seed,
            workers: cfg.workers,
        }
    }
}

/// Model chosen by inner cross-validation, refit on the whole training part
/// and applied to the test part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub spec: KernelSpec,
    pub c: f64,
    /// Mean inner-fold accuracy of the chosen cell (`None` without a choice).
    pub inner_accuracy: Option<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub predictions: Vec<usize>,
    pub decision_values: Vec<Vec<f64>>,
    pub converged: bool,
}

pub fn accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    if truth.is_empty() {
        return f64::NAN;
    }
    truth.iter().zip(predicted).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn train_on(k: &KernelMatrix, labels: &[usize], l: usize, c: f64, strategy: Strategy) -> Result<MulticlassModel> {
    MulticlassModel::train(strategy, Gram::try_from(k)?, labels, l, c, AbsentClassPolicy::ConstantNegative)
}

/// Mean held-out accuracy for each C, using inner folds of one Gram matrix.
fn inner_scores(k: &KernelMatrix, labels: &[usize], l: usize, sel: &Selection) -> Result<Vec<f64>> {
    let folds = stratified_kfold(labels, l, sel.inner_folds.min(labels.len()), sel.seed)?;
    let splits: Vec<_> = (0..folds.k()).map(|f| folds.split(f)).collect();
    let cells: Vec<(usize, usize)> = (0..sel.c_grid.len())
        .flat_map(|c| (0..splits.len()).map(move |f| (c, f)))
        .collect();
    let acc: Result<Vec<f64>> = cells
        .par_iter()
        .map(|&(ci, f)| {
            let s = &splits[f];
            let tr_labels: Vec<usize> = s.train.iter().map(|&i| labels[i]).collect();
            let model = train_on(&k.submatrix(&s.train, &s.train), &tr_labels, l, sel.c_grid[ci], sel.strategy)?;
            let pred = model.predict_all(&k.submatrix(&s.test, &s.train))?;
            let truth: Vec<usize> = s.test.iter().map(|&i| labels[i]).collect();
            Ok(accuracy(&truth, &pred))
        })
        .collect();
    let acc = acc?;
    Ok(acc
        .chunks(splits.len())
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect())
}

/// Pick kernel hyperparameters and C on the training part by inner
/// cross-validation, refit, and score the test part. Ties go to the earlier
/// candidate and the smaller C.
pub fn fit_and_score(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    l: usize,
    specs: &[KernelSpec],
    sel: &Selection,
) -> Result<FitOutcome> {
    if specs.is_empty() {
        return Err(Error::invalid("no kernel candidates"));
    }
    let m = train_x.len();
    let all: Vec<Vec<f64>> = train_x.iter().chain(test_x).cloned().collect();
    let train_idx: Vec<usize> = (0..m).collect();
    let test_idx: Vec<usize> = (m..all.len()).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sel.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {} workers: {e}", sel.workers)))?;

    let choose = specs.len() > 1 || sel.c_grid.len() > 1;
    let mut best: Option<(f64, usize, usize, KernelMatrix)> = None;
    for (si, spec) in specs.iter().enumerate() {
        let k_all = gram_matrix_square(&all, spec, sel.workers)?;
        let k_tr = k_all.submatrix(&train_idx, &train_idx);
        let scores = if choose {
            pool.install(|| inner_scores(&k_tr, train_y, l, sel))?
        } else {
            vec![f64::NAN]
        };
        for (ci, s) in scores.iter().enumerate() {
            if best.as_ref().is_none_or(|b| *s > b.0) {
                best = Some((*s, si, ci, k_all.clone()));
            }
        }
    }
    let (inner, si, ci, k_all) = best.expect("at least one candidate");
    let c = sel.c_grid[ci];
    let k_tr = k_all.submatrix(&train_idx, &train_idx);
    let model = pool.install(|| train_on(&k_tr, train_y, l, c, sel.strategy))?;
    let train_pred = model.predict_all(&k_tr)?;
    let k_te = k_all.submatrix(&test_idx, &train_idx);
    let decision_values = model.decision_matrix(&k_te)?;
    let predictions: Vec<usize> = decision_values.iter().map(|v| crate::svm::predict_from_values(v)).collect();
    Ok(FitOutcome {
        spec: specs[si],
        c,
        inner_accuracy: choose.then_some(inner),
        train_accuracy: accuracy(train_y, &train_pred),
        test_accuracy: accuracy(test_y, &predictions),
        predictions,
        decision_values,
        converged: model.converged(),
    })
}
