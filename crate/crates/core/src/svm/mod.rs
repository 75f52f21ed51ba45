//! Multiclass SVMs on precomputed kernels.
//!
//! Two strategies are available: one-vs-all over binary SMO
//! ([`train_one_vs_all`]) and the joint multiclass dual
//! ([`crammer_singer_train`]). Class labels are `1..=l` throughout.

mod crammer_singer;
mod model;
mod smo;

pub use crammer_singer::{
    crammer_singer_objective, crammer_singer_objective_expanded, crammer_singer_train,
    feasibility_residual, JointModel, JointParams,
};
pub use model::{
    predict_from_values, train_one_vs_all, AbsentClassPolicy, ModelKind, MulticlassModel,
    Strategy, MODEL_FORMAT_VERSION,
};
pub use smo::{dual_objective, smo_train_binary, BinaryModel, SmoParams};

use crate::error::{ensure_len, Error, Result};
use crate::kernels::KernelMatrix;

/// α above this value puts a point in the support set Ω.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// Borrowed square Gram matrix, row-major.
#[derive(Debug, Clone, Copy)]
pub struct Gram<'a> {
    n: usize,
    values: &'a [f64],
}

impl<'a> Gram<'a> {
    pub fn new(n: usize, values: &'a [f64]) -> Result<Self> {
        ensure_len(n * n, values.len())?;
        Ok(Gram { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

impl<'a> TryFrom<&'a KernelMatrix> for Gram<'a> {
    type Error = Error;

    fn try_from(k: &'a KernelMatrix) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::DimensionMismatch {
                expected: k.rows(),
                found: k.cols(),
            });
        }
        Gram::new(k.rows(), k.values())
    }
}

pub(crate) fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::invalid("at least two classes are required"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > n_classes) {
        return Err(Error::invalid(format!(
            "label {bad} outside 1..={n_classes}"
        )));
    }
    Ok(())
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("C must be positive, got {c}")))
    }
}
