//! Classification metrics, ROC analysis and the Rademacher/Frobenius
//! generalization estimates.

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::kernels::KernelMatrix;
use crate::rng;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let l = counts.len();
        if l == 0 {
            return Err(Error::invalid("empty confusion matrix"));
        }
        for row in &counts {
            ensure_len(l, row.len())?;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Row sum: instances whose true class is `c` (0-based).
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    /// Column sum: instances predicted as `c` (0-based).
    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn to_text(&self) -> String {
        let l = self.n_classes();
        let width = self
            .counts
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(l.to_string().len())
            + 1;
        let mut s = format!("{:>w$}", "t\\p", w = width + 2);
        for p in 1..=l {
            let _ = write!(s, "{p:>width$}");
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{:>w$}", t + 1, w = width + 2);
            for v in row {
                let _ = write!(s, "{v:>width$}");
            }
            s.push('\n');
        }
        s
    }
}

/// Labels are `1..=l`.
pub fn confusion(truth: &[usize], predicted: &[usize], l: usize) -> Result<ConfusionMatrix> {
    ensure_len(truth.len(), predicted.len())?;
    if l == 0 {
        return Err(Error::invalid("at least one class is required"));
    }
    let mut counts = vec![vec![0u64; l]; l];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == 0 || t > l || p == 0 || p > l {
            return Err(Error::invalid(format!("label pair ({t}, {p}) outside 1..={l}")));
        }
        counts[t - 1][p - 1] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Fraction of the evaluated instances in this class.
    pub weight: f64,
    /// No instance was predicted as this class; precision set to 0.
    pub precision_undefined: bool,
    /// No instance of this class was evaluated; recall set to 0.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class, macro, micro and support-weighted precision/recall/F1.
/// Zero denominators give 0 and set the class's `*_undefined` flag.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix has no instances"));
    }
    let l = cm.n_classes();
    let per_class: Vec<ClassMetrics> = (0..l)
        .map(|c| {
            let tp = cm.true_positives(c);
            let support = cm.support(c);
            let predicted = cm.predicted(c);
            let (precision, precision_undefined) = ratio(tp, predicted);
            let (recall, recall_undefined) = ratio(tp, support);
            let (f1, _) = ratio(2 * tp, support + predicted);
            ClassMetrics {
                class: c + 1,
                precision,
                recall,
                f1,
                support,
                weight: support as f64 / total as f64,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / l as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| m.weight * f(m)).sum::<f64>();

    let tp: u64 = (0..l).map(|c| cm.true_positives(c)).sum();
    // Pooled fp and fn both equal total − tp for single-label predictions.
    let pooled_fp: u64 = (0..l).map(|c| cm.predicted(c) - cm.true_positives(c)).sum();
    let pooled_fn: u64 = (0..l).map(|c| cm.support(c) - cm.true_positives(c)).sum();
    let micro = Averages {
        precision: ratio(tp, tp + pooled_fp).0,
        recall: ratio(tp, tp + pooled_fn).0,
        f1: ratio(2 * tp, 2 * tp + pooled_fp + pooled_fn).0,
    };
    Ok(MetricsReport {
        macro_avg: Averages {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        },
        weighted_avg: Averages {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
        },
        micro_avg: micro,
        accuracy: tp as f64 / total as f64,
        total,
        per_class,
    })
}

impl MetricsReport {
    /// Aligned table: one row per class, then the three averages and accuracy.
    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10}{:>11}{:>11}{:>11}{:>9}\n", "class", "precision", "recall", "f1", "support");
        for m in &self.per_class {
            let flag = if m.precision_undefined || m.recall_undefined { " *" } else { "" };
            let _ = writeln!(
                s,
                "{:<10}{:>11.4}{:>11.4}{:>11.4}{:>9}{flag}",
                m.class, m.precision, m.recall, m.f1, m.support
            );
        }
        for (name, a) in [("macro", &self.macro_avg), ("micro", &self.micro_avg), ("weighted", &self.weighted_avg)] {
            let _ = writeln!(s, "{name:<10}{:>11.4}{:>11.4}{:>11.4}{:>9}", a.precision, a.recall, a.f1, self.total);
        }
        let _ = writeln!(s, "{:<10}{:>11.4}", "accuracy", self.accuracy);
        if self.per_class.iter().any(|m| m.precision_undefined || m.recall_undefined) {
            s.push_str("* zero denominator, value set to 0\n");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `Some(c)` for class `c`, `None` for the pooled micro curve.
    pub class: Option<usize>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Threshold producing each point; starts at +inf and ends at -inf.
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    pub auc: f64,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub curves: Vec<RocCurve>,
    pub micro: RocCurve,
    pub macro_auc: f64,
    pub weighted_auc: f64,
    /// Classes without positives (or without negatives), left out of the
    /// aggregates.
    pub excluded: Vec<usize>,
    pub notices: Vec<String>,
}

/// One-vs-rest ROC curve. A point is emitted for every distinct score plus
/// the ±inf sentinels; an instance is positive when its score ≥ threshold.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    ensure_len(scores.len(), positive.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("ROC scores must be finite"));
    }
    let p = positive.iter().filter(|&&b| b).count();
    let n = positive.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::invalid("ROC needs both positive and negative instances"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        while k < order.len() && scores[order[k]] == t {
            if positive[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        fpr.push(fp as f64 / n as f64);
        tpr.push(tp as f64 / p as f64);
        thresholds.push(t);
    }
    fpr.push(1.0);
    tpr.push(1.0);
    thresholds.push(f64::NEG_INFINITY);
    let auc = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| (f[1] - f[0]) * (t[0] + t[1]) / 2.0)
        .sum();
    Ok((fpr, tpr, thresholds, auc))
}

/// Per-class one-vs-rest curves over the columns of an `m × l` decision
/// score matrix, plus the micro curve over all (instance, class) pairs.
pub fn roc_curves(truth: &[usize], scores: &[Vec<f64>], l: usize) -> Result<RocReport> {
    ensure_len(truth.len(), scores.len())?;
    if let Some(&bad) = truth.iter().find(|&&y| y == 0 || y > l) {
        return Err(Error::invalid(format!("label {bad} outside 1..={l}")));
    }
    for row in scores {
        ensure_len(l, row.len())?;
    }
    let mut curves = Vec::new();
    let mut excluded = Vec::new();
    let mut notices = Vec::new();
    for c in 1..=l {
        let column: Vec<f64> = scores.iter().map(|r| r[c - 1]).collect();
        let positive: Vec<bool> = truth.iter().map(|&y| y == c).collect();
        let positives = positive.iter().filter(|&&b| b).count();
        if positives == 0 || positives == truth.len() {
            excluded.push(c);
            notices.push(format!(
                "class {c}: {} in the evaluated set, AUC undefined and excluded from the averages",
                if positives == 0 { "no positives" } else { "no negatives" }
            ));
            continue;
        }
        let (fpr, tpr, thresholds, auc) = roc_curve(&column, &positive)?;
        curves.push(RocCurve {
            class: Some(c),
            fpr,
            tpr,
            thresholds,
            auc,
            positives,
        });
    }
    let pooled: Vec<f64> = scores.iter().flatten().copied().collect();
    let pooled_pos: Vec<bool> = truth.iter().flat_map(|&y| (1..=l).map(move |c| c == y)).collect();
    let (fpr, tpr, thresholds, auc) = roc_curve(&pooled, &pooled_pos)?;
    let micro = RocCurve {
        class: None,
        fpr,
        tpr,
        thresholds,
        auc,
        positives: truth.len(),
    };
    let (macro_auc, weighted_auc) = if curves.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let support: usize = curves.iter().map(|c| c.positives).sum();
        (
            curves.iter().map(|c| c.auc).sum::<f64>() / curves.len() as f64,
            curves.iter().map(|c| c.auc * c.positives as f64).sum::<f64>() / support as f64,
        )
    };
    Ok(RocReport {
        curves,
        micro,
        macro_auc,
        weighted_auc,
        excluded,
        notices,
    })
}

impl RocReport {
    /// Columns `class,fpr,tpr`; the micro curve uses class `micro`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "fpr", "tpr"])?;
        for curve in self.curves.iter().chain(std::iter::once(&self.micro)) {
            let name = curve.class.map_or_else(|| "micro".to_string(), |c| c.to_string());
            for (f, t) in curve.fpr.iter().zip(&curve.tpr) {
                w.write_record([name.clone(), f.to_string(), t.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:<10}{:>9}\n", "class", "auc");
        for c in &self.curves {
            let _ = writeln!(s, "{:<10}{:>9.4}", c.class.unwrap_or(0), c.auc);
        }
        let _ = writeln!(s, "{:<10}{:>9.4}", "macro", self.macro_auc);
        let _ = writeln!(s, "{:<10}{:>9.4}", "micro", self.micro.auc);
        let _ = writeln!(s, "{:<10}{:>9.4}", "weighted", self.weighted_auc);
        for n in &self.notices {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// `(Δ / D) · ‖K‖_F` with `D` the row count of `K`.
pub fn frobenius_bound(k: &KernelMatrix, delta: f64) -> Result<f64> {
    if k.rows() == 0 {
        return Err(Error::invalid("empty kernel matrix"));
    }
    Ok(delta * k.frobenius_norm() / k.rows() as f64)
}

pub const DEFAULT_RADEMACHER_DRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub draws: usize,
}

/// Monte-Carlo estimate of `(Δ/D) · E‖υ‖`, `υ_j = Σ_i ϖ_i K_ij` with
/// uniform random signs ϖ. Draw `d` uses stream `d` of `seed`.
pub fn rademacher_estimate(k: &KernelMatrix, delta: f64, draws: usize, seed: u64) -> Result<RademacherEstimate> {
    if !k.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k.rows(),
            found: k.cols(),
        });
    }
    if draws == 0 {
        return Err(Error::invalid("at least one Rademacher draw is required"));
    }
    let d = k.rows();
    let norms: Vec<f64> = (0..draws)
        .map(|draw| {
            let mut r = rng::stream(seed, draw as u64);
            let signs: Vec<f64> = (0..d).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let mut v = vec![0.0; d];
            for (i, s) in signs.iter().enumerate() {
                for (vj, kij) in v.iter_mut().zip(k.row(i)) {
                    *vj += s * kij;
                }
            }
            delta * v.iter().map(|x| x * x).sum::<f64>().sqrt() / d as f64
        })
        .collect();
    let mean = norms.iter().sum::<f64>() / draws as f64;
    let standard_error = if draws > 1 {
        let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        (var / draws as f64).sqrt()
    } else {
        0.0
    };
    Ok(RademacherEstimate {
        estimate: mean,
        standard_error,
        draws,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub kernel: String,
    pub frobenius_norm: f64,
    pub rademacher_estimate: f64,
    pub standard_error: f64,
    pub upper_bound: f64,
    pub delta: f64,
    pub samples: usize,
    pub draws: usize,
}

impl GeneralizationReport {
    pub fn compute(kernel: impl Into<String>, k: &KernelMatrix, delta: f64, draws: usize, seed: u64) -> Result<Self> {
        let est = rademacher_estimate(k, delta, draws, seed)?;
        Ok(GeneralizationReport {
            kernel: kernel.into(),
            frobenius_norm: k.frobenius_norm(),
            rademacher_estimate: est.estimate,
            standard_error: est.standard_error,
            upper_bound: frobenius_bound(k, delta)?,
            delta,
            samples: k.rows(),
            draws,
        })
    }
}

/// Table with one row per kernel: norm, estimate, bound.
pub fn generalization_table(rows: &[GeneralizationReport]) -> String {
    let mut s = format!("{:<8}{:>14}{:>12}{:>12}\n", "kernel", "||K||_F", "R_E", "bound");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8}{:>14.4}{:>12.4}{:>12.4}",
            r.kernel, r.frobenius_norm, r.rademacher_estimate, r.upper_bound
        );
    }
    s
}
