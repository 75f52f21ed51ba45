//! Binary soft-margin SVM dual solved by SMO with second-order working-set
//! selection.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{check_c, Gram, SUPPORT_THRESHOLD};
use crate::error::{ensure_len, Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    /// Iteration budget in units of the training-set size.
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 1000,
        }
    }
}

impl SmoParams {
    pub fn with_c(c: f64) -> Self {
        SmoParams {
            c,
            ..Self::default()
        }
    }
}

/// Trained binary classifier `f(x) = Σ α_i y_i κ(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub alphas: Vec<f64>,
    /// Training labels in {−1, +1}.
    pub labels: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub support: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl BinaryModel {
    /// Classifier with every α zero, returning `value` everywhere.
    pub fn constant(m: usize, value: f64, c: f64) -> Self {
        BinaryModel {
            alphas: vec![0.0; m],
            labels: vec![-1.0; m],
            bias: value,
            c,
            support: Vec::new(),
            objective: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    pub fn decision(&self, k_row: &[f64]) -> Result<f64> {
        ensure_len(self.alphas.len(), k_row.len())?;
        Ok(self
            .support
            .iter()
            .map(|&i| self.alphas[i] * self.labels[i] * k_row[i])
            .sum::<f64>()
            + self.bias)
    }

    /// Largest violation of the KKT conditions on the training set:
    /// α=0 ⇒ y f ≥ 1, 0<α<C ⇒ y f = 1, α=C ⇒ y f ≤ 1.
    pub fn kkt_violation(&self, k: Gram<'_>) -> Result<f64> {
        ensure_len(self.alphas.len(), k.len())?;
        let mut worst = 0.0f64;
        for i in 0..k.len() {
            let margin = self.labels[i] * self.decision(k.row(i))? - 1.0;
            let a = self.alphas[i];
            let v = if a <= SUPPORT_THRESHOLD {
                (-margin).max(0.0)
            } else if a >= self.c - SUPPORT_THRESHOLD {
                margin.max(0.0)
            } else {
                margin.abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

/// Σα − ½ Σ_ij α_i α_j y_i y_j K_ij.
pub fn dual_objective(k: Gram<'_>, y: &[f64], alphas: &[f64]) -> Result<f64> {
    ensure_len(k.len(), y.len())?;
    ensure_len(k.len(), alphas.len())?;
    let m = k.len();
    let mut quad = 0.0;
    for i in 0..m {
        if alphas[i] == 0.0 {
            continue;
        }
        let row = k.row(i);
        let s: f64 = (0..m).map(|j| alphas[j] * y[j] * row[j]).sum();
        quad += alphas[i] * y[i] * s;
    }
    Ok(alphas.iter().sum::<f64>() - 0.5 * quad)
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Maximize the binary dual subject to `0 ≤ α ≤ C`, `Σ y_i α_i = 0`.
///
/// Stops when the maximal KKT violation gap drops below `tol` or after
/// `max_passes · m` iterations, whichever comes first. The dual objective
/// is checked to be non-decreasing on every step.
pub fn smo_train_binary(k: Gram<'_>, y: &[f64], params: &SmoParams) -> Result<BinaryModel> {
    let m = k.len();
    ensure_len(m, y.len())?;
    check_c(params.c)?;
    if !(params.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("binary labels must be ±1"));
    }
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(Error::Degenerate(
            "binary problem has a single class".into(),
        ));
    }
    let c = params.c;
    let mut alpha = vec![0.0; m];
    // Gradient of ½αᵀQα − eᵀα.
    let mut grad = vec![-1.0; m];
    let mut objective = 0.0f64;
    let max_iter = params.max_passes.saturating_mul(m.max(1));
    let mut iter = 0;
    let mut converged = false;

    while iter < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..m {
            if in_up(y[t], alpha[t], c) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        if i_sel != usize::MAX {
            let ki = k.row(i_sel);
            for t in 0..m {
                if !in_low(y[t], alpha[t], c) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = (ki[i_sel] + k.get(t, t) - 2.0 * ki[t]).max(TAU);
                    let score = -(b * b) / a;
                    if score <= best {
                        best = score;
                        j_sel = t;
                    }
                }
            }
        }
        if gmax - gmin < params.tol || j_sel == usize::MAX {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        // Objective change of the two-variable step, from the gradient
        // before the update.
        let qii = k.get(i, i);
        let qjj = k.get(j, j);
        let qij = y[i] * y[j] * k.get(i, j);
        let gain = -(grad[i] * di + grad[j] * dj)
            - 0.5 * (qii * di * di + qjj * dj * dj + 2.0 * qij * di * dj);
        if gain < -1e-12 * (1.0 + objective.abs()) {
            return Err(Error::Numerical(format!(
                "SMO step decreased the dual objective by {}",
                -gain
            )));
        }
        objective += gain;

        let (ri, rj) = (k.row(i), k.row(j));
        for t in 0..m {
            grad[t] += y[t] * (y[i] * ri[t] * di + y[j] * rj[t] * dj);
        }
    }
    if !converged {
        warn!("SMO stopped after {iter} iterations without reaching tolerance {}", params.tol);
    }

    let bias = -rho(y, &alpha, &grad, c);
    let support = (0..m).filter(|&t| alpha[t] > SUPPORT_THRESHOLD).collect();
    Ok(BinaryModel {
        objective: dual_objective(k, y, &alpha)?,
        alphas: alpha,
        labels: y.to_vec(),
        bias,
        c,
        support,
        iterations: iter,
        converged,
    })
}

/// Threshold ρ with `b = −ρ`: the mean of `y_i G_i` over free variables, or
/// the midpoint of the feasible interval when none are free.
fn rho(y: &[f64], alpha: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut n_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum += yg;
        }
    }
    if n_free > 0 {
        sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}
