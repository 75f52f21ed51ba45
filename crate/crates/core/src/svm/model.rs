use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    check_c, check_labels, crammer_singer_train, smo_train_binary, BinaryModel, Gram, JointModel,
    JointParams, SmoParams,
};
use crate::error::{ensure_len, Error, Result};
use crate::kernels::KernelMatrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    #[serde(alias = "ova", alias = "one_vs_all")]
    OneVsAll,
    #[serde(alias = "cs")]
    CrammerSinger,
}

impl Strategy {
    pub fn short_name(&self) -> &'static str {
        match self {
            Strategy::OneVsAll => "ova",
            Strategy::CrammerSinger => "cs",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ova" | "one_vs_all" => Ok(Strategy::OneVsAll),
            "cs" | "crammer_singer" => Ok(Strategy::CrammerSinger),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

/// What one-vs-all training does with a class that has no training points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentClassPolicy {
    #[default]
    Error,
    /// Use the constant classifier `f = −1` for that class and log a warning.
    ConstantNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ModelKind {
    OneVsAll { models: Vec<BinaryModel> },
    CrammerSinger { model: JointModel },
}

/// Trained multiclass classifier; predictions are class labels `1..=l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub format_version: u32,
    pub n_classes: usize,
    pub c: f64,
    #[serde(default)]
    pub training_digest: Option<String>,
    #[serde(flatten)]
    pub kind: ModelKind,
}

impl MulticlassModel {
    pub fn strategy(&self) -> Strategy {
        match self.kind {
            ModelKind::OneVsAll { .. } => Strategy::OneVsAll,
            ModelKind::CrammerSinger { .. } => Strategy::CrammerSinger,
        }
    }

    pub fn n_train(&self) -> usize {
        match &self.kind {
            ModelKind::OneVsAll { models } => models[0].alphas.len(),
            ModelKind::CrammerSinger { model } => model.labels.len(),
        }
    }

    pub fn converged(&self) -> bool {
        match &self.kind {
            ModelKind::OneVsAll { models } => models.iter().all(|m| m.converged),
            ModelKind::CrammerSinger { model } => model.converged,
        }
    }

    pub fn with_training_digest(mut self, digest: impl Into<String>) -> Self {
        self.training_digest = Some(digest.into());
        self
    }

    /// One decision value per class for a test point, given its kernel
    /// values against every training point.
    pub fn decision_values(&self, k_row: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.n_train(), k_row.len())?;
        match &self.kind {
            ModelKind::OneVsAll { models } => models.iter().map(|m| m.decision(k_row)).collect(),
            ModelKind::CrammerSinger { model } => model.decision_values(k_row),
        }
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<usize> {
        Ok(predict_from_values(&self.decision_values(k_row)?))
    }

    /// Decision values for every row of a test-by-train kernel matrix.
    pub fn decision_matrix(&self, k: &KernelMatrix) -> Result<Vec<Vec<f64>>> {
        ensure_len(self.n_train(), k.cols())?;
        (0..k.rows()).map(|i| self.decision_values(k.row(i))).collect()
    }

    pub fn predict_all(&self, k: &KernelMatrix) -> Result<Vec<usize>> {
        Ok(self
            .decision_matrix(k)?
            .iter()
            .map(|f| predict_from_values(f))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: MulticlassModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }

    /// Train with the given strategy and penalty, using default tolerances.
    pub fn train(
        strategy: Strategy,
        k: Gram<'_>,
        labels: &[usize],
        n_classes: usize,
        c: f64,
        policy: AbsentClassPolicy,
    ) -> Result<Self> {
        match strategy {
            Strategy::OneVsAll => {
                train_one_vs_all(k, labels, n_classes, &SmoParams::with_c(c), policy)
            }
            Strategy::CrammerSinger => {
                let model = crammer_singer_train(k, labels, n_classes, &JointParams::with_c(c))?;
                Ok(MulticlassModel {
                    format_version: MODEL_FORMAT_VERSION,
                    n_classes,
                    c,
                    training_digest: None,
                    kind: ModelKind::CrammerSinger { model },
                })
            }
        }
    }
}

/// Index (1-based) of the largest value; the lowest index wins ties.
pub fn predict_from_values(values: &[f64]) -> usize {
    let mut best = 0;
    for (s, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = s;
        }
    }
    best + 1
}

/// One binary SMO problem per class, class `s` against the rest.
pub fn train_one_vs_all(
    k: Gram<'_>,
    labels: &[usize],
    n_classes: usize,
    params: &SmoParams,
    policy: AbsentClassPolicy,
) -> Result<MulticlassModel> {
    ensure_len(k.len(), labels.len())?;
    check_labels(labels, n_classes)?;
    check_c(params.c)?;
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y - 1] += 1;
    }
    if counts.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::Degenerate(
            "training data contains fewer than two classes".into(),
        ));
    }
    if let Some(s) = counts.iter().position(|&n| n == 0) {
        if policy == AbsentClassPolicy::Error {
            return Err(Error::invalid(format!("class {} has no training points", s + 1)));
        }
    }
    let models: Result<Vec<BinaryModel>> = (1..=n_classes)
        .into_par_iter()
        .map(|s| {
            if counts[s - 1] == 0 {
                warn!("class {s} absent from training data; using constant decision −1");
                return Ok(BinaryModel::constant(labels.len(), -1.0, params.c));
            }
            let y: Vec<f64> = labels
                .iter()
                .map(|&v| if v == s { 1.0 } else { -1.0 })
                .collect();
            smo_train_binary(k, &y, params)
        })
        .collect();
    Ok(MulticlassModel {
        format_version: MODEL_FORMAT_VERSION,
        n_classes,
        c: params.c,
        training_digest: None,
        kind: ModelKind::OneVsAll { models: models? },
    })
}
