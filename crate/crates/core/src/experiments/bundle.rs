//! Output bundles: `config.json`, `metrics.json`, `tables/*.csv`,
//! `matrices/*` and a plain-text `report.txt`, all under one directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::commands::{
    ConcentrationReport, CrossValidateReport, EvaluateReport, GeneralizationTable, KernelMatrixReport,
    LearningCurveReport,
};
use crate::error::{Error, Result};
use crate::metrics::generalization_table;

/// Files collected in memory and written together by one writer.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(PathBuf, Vec<u8>)>,
}

fn csv_bytes<S: AsRef<str>>(header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(AsRef::as_ref))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn slug(kernel: &str, noise: f64) -> String {
    if noise > 0.0 {
        format!("{}_p{noise}", kernel.to_ascii_lowercase())
    } else {
        kernel.to_ascii_lowercase()
    }
}

impl Bundle {
    pub fn new<C: Serialize>(config: &C) -> Result<Self> {
        let mut b = Bundle::default();
        b.json("config.json", config)?;
        Ok(b)
    }

    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((rel.into(), bytes));
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(rel, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Write every file under `root`, creating directories as needed.
    pub fn write(&self, root: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|source| Error::File { path: dir.to_owned(), source })?;
            }
            fs::write(&path, bytes).map_err(|source| Error::File { path, source })?;
        }
        Ok(())
    }

    pub fn kernel_matrix(&mut self, r: &KernelMatrixReport) -> Result<()> {
        self.json("metrics.json", &serde_json::json!({ "data": r.data, "matrices": r.records }))?;
        self.add(
            "tables/matrices.csv",
            csv_bytes(
                &["kernel", "rows", "diagonal_error", "symmetry_error", "cache_file"],
                r.records.iter().map(|m| {
                    vec![
                        m.kernel.clone(),
                        m.rows.to_string(),
                        m.diagonal_error.to_string(),
                        m.symmetry_error.to_string(),
                        m.cache_file.clone(),
                    ]
                }),
            )?,
        );
        for (rec, k) in r.records.iter().zip(&r.matrices) {
            let mut buf = Vec::new();
            k.write_csv(&mut buf)?;
            self.add(&rec.file, buf);
        }
        Ok(())
    }

    pub fn crossvalidate(&mut self, r: &CrossValidateReport) -> Result<()> {
        self.json("metrics.json", r)?;
        self.add(
            "tables/folds.csv",
            csv_bytes(
                &["kernel", "fold", "accuracy", "c"],
                r.kernels.iter().flat_map(|k| {
                    k.folds.iter().map(|f| vec![k.kernel.clone(), f.fold.to_string(), f.accuracy.to_string(), f.c.to_string()])
                }),
            )?,
        );
        self.add(
            "tables/summary.csv",
            csv_bytes(
                &["kernel", "mean_accuracy", "std_accuracy"],
                r.kernels.iter().map(|k| vec![k.kernel.clone(), k.mean_accuracy.to_string(), k.std_accuracy.to_string()]),
            )?,
        );
        let mut text = format!("{:<8}{:>10}{:>10}\n", "kernel", "mean", "std");
        for k in &r.kernels {
            text.push_str(&format!("{:<8}{:>10.4}{:>10.4}\n", k.kernel, k.mean_accuracy, k.std_accuracy));
        }
        self.add("report.txt", text.into_bytes());
        Ok(())
    }

    pub fn evaluate(&mut self, r: &EvaluateReport) -> Result<()> {
        self.json("metrics.json", r)?;
        let header = [
            "kernel", "noise", "c", "accuracy", "macro_precision", "macro_recall", "macro_f1", "micro_precision",
            "micro_recall", "micro_f1", "weighted_precision", "weighted_recall", "weighted_f1", "macro_auc", "micro_auc",
        ];
        self.add(
            "tables/summary.csv",
            csv_bytes(
                &header,
                r.runs.iter().map(|run| {
                    let m = &run.metrics;
                    [
                        run.kernel.clone(),
                        run.noise.to_string(),
                        run.c.to_string(),
                        m.accuracy.to_string(),
                        m.macro_avg.precision.to_string(),
                        m.macro_avg.recall.to_string(),
                        m.macro_avg.f1.to_string(),
                        m.micro_avg.precision.to_string(),
                        m.micro_avg.recall.to_string(),
                        m.micro_avg.f1.to_string(),
                        m.weighted_avg.precision.to_string(),
                        m.weighted_avg.recall.to_string(),
                        m.weighted_avg.f1.to_string(),
                        run.roc.macro_auc.to_string(),
                        run.roc.micro.auc.to_string(),
                    ]
                    .to_vec()
                }),
            )?,
        );
        let mut text = format!(
            "{} train/test {}/{} (split seed {})\n",
            r.data.name, r.train_size, r.test_size, r.split_seed
        );
        for run in &r.runs {
            let s = slug(&run.kernel, run.noise);
            let l = run.confusion.n_classes();
            let header: Vec<String> = std::iter::once("true".to_string()).chain((1..=l).map(|c| c.to_string())).collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            self.add(
                format!("tables/{s}_confusion.csv"),
                csv_bytes(
                    &header,
                    run.confusion.counts.iter().enumerate().map(|(t, row)| {
                        std::iter::once((t + 1).to_string()).chain(row.iter().map(u64::to_string)).collect::<Vec<_>>()
                    }),
                )?,
            );
            let mut roc = Vec::new();
            run.roc.write_csv(&mut roc)?;
            self.add(format!("tables/{s}_roc.csv"), roc);
            text.push_str(&format!("\n== {} p={} C={} ==\n", run.kernel, run.noise, run.c));
            text.push_str(&run.metrics.to_text());
            text.push('\n');
            text.push_str(&run.confusion.to_text());
            text.push('\n');
            text.push_str(&run.roc.to_text());
        }
        self.add("report.txt", text.into_bytes());
        Ok(())
    }

    pub fn learning_curve(&mut self, r: &LearningCurveReport) -> Result<()> {
        self.json("metrics.json", r)?;
        self.add(
            "tables/learning_curve.csv",
            csv_bytes(
                &["kernel", "fraction", "mean_train_size", "train_accuracy", "train_std", "test_accuracy", "test_std"],
                r.points.iter().map(|p| {
                    vec![
                        p.kernel.clone(),
                        p.fraction.to_string(),
                        p.mean_train_size.to_string(),
                        p.train_accuracy.to_string(),
                        p.train_std.to_string(),
                        p.test_accuracy.to_string(),
                        p.test_std.to_string(),
                    ]
                }),
            )?,
        );
        Ok(())
    }

    pub fn concentration(&mut self, r: &ConcentrationReport) -> Result<()> {
        self.json("metrics.json", r)?;
        self.add(
            "tables/concentration.csv",
            csv_bytes(
                &["qubits", "train_size", "train_loss", "test_loss", "relative_test_loss", "kernel_variance"],
                r.rows.iter().map(|row| {
                    vec![
                        row.qubits.to_string(),
                        row.train_size.to_string(),
                        row.train_loss.to_string(),
                        row.test_loss.to_string(),
                        row.relative_test_loss.to_string(),
                        row.kernel_variance.to_string(),
                    ]
                }),
            )?,
        );
        Ok(())
    }

    pub fn generalization(&mut self, r: &GeneralizationTable) -> Result<()> {
        self.json("metrics.json", r)?;
        self.add(
            "tables/generalization.csv",
            csv_bytes(
                &["kernel", "frobenius_norm", "rademacher_estimate", "standard_error", "bound", "samples", "draws"],
                r.rows.iter().map(|g| {
                    vec![
                        g.kernel.clone(),
                        g.frobenius_norm.to_string(),
                        g.rademacher_estimate.to_string(),
                        g.standard_error.to_string(),
                        g.upper_bound.to_string(),
                        g.samples.to_string(),
                        g.draws.to_string(),
                    ]
                }),
            )?,
        );
        self.add("report.txt", generalization_table(&r.rows).into_bytes());
        Ok(())
    }
}
