//! Dataset ingestion and preprocessing: missing-value removal, z-score,
//! PCA, stratified train/test splits and stratified k-fold.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_len, Error, Result};
use crate::rng;

/// Column reference by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Delimiter {
    #[default]
    Comma,
    Whitespace,
}

/// How to read one delimited dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    /// Data file, relative to the schema file's directory.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub delimiter: Delimiter,
    #[serde(default = "yes")]
    pub header: bool,
    pub label_column: Column,
    /// Defaults to every column other than the label and `ignore_columns`.
    #[serde(default)]
    pub feature_columns: Option<Vec<Column>>,
    #[serde(default)]
    pub ignore_columns: Vec<Column>,
    #[serde(default)]
    pub missing_tokens: Vec<String>,
    /// Per-column maps from category strings to numeric codes.
    #[serde(default)]
    pub categorical: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub description: String,
}

fn yes() -> bool {
    true
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Labelled feature matrix with labels in `1..=l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Original label strings; class `c` is `class_names[c - 1]`.
    pub class_names: Vec<String>,
    pub provenance: String,
    /// Rows dropped at load time because a field was missing.
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        ensure_len(features.len(), labels.len())?;
        let n = features.first().map_or(0, Vec::len);
        for row in &features {
            ensure_len(n, row.len())?;
        }
        if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > n_classes) {
            return Err(Error::invalid(format!("label {bad} outside 1..={n_classes}")));
        }
        Ok(Dataset {
            name: String::from("anonymous"),
            features,
            labels,
            feature_names: (0..n).map(|i| format!("x{i}")).collect(),
            class_names: (1..=n_classes).map(|c| c.to_string()).collect(),
            provenance: String::new(),
            dropped_rows: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone()
        }
    }

    /// Hex SHA-256 over features (as f64 bits) and labels.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (row, y) in self.features.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_le_bytes());
            }
            h.update((*y as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn resolve(col: &Column, header: &[String], path: &Path) -> Result<usize> {
    match col {
        Column::Index(i) if *i < header.len() => Ok(*i),
        Column::Index(i) => Err(Error::Parse {
            path: path.to_owned(),
            row: 1,
            column: *i + 1,
            message: format!("column index {i} out of range"),
        }),
        Column::Name(n) => header.iter().position(|h| h == n).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            row: 1,
            column: 0,
            message: format!("no column named {n:?}"),
        }),
    }
}

fn read_records(path: &Path, delimiter: Delimiter) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_owned(),
        source,
    })?;
    match delimiter {
        Delimiter::Whitespace => Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(str::to_owned).collect())
            .collect()),
        Delimiter::Comma => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let mut out = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec.map_err(|e| Error::Parse {
                    path: path.to_owned(),
                    row: i + 1,
                    column: 0,
                    message: e.to_string(),
                })?;
                out.push(rec.iter().map(str::to_owned).collect());
            }
            Ok(out)
        }
    }
}

/// Read a delimited file. Rows with a missing field in any used column are
/// dropped and counted; an unparseable field is an error naming its row and
/// column (both 1-based, counting the header row).
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut records = read_records(path, schema.delimiter)?;
    if records.is_empty() {
        return Err(Error::Parse {
            path: path.to_owned(),
            row: 0,
            column: 0,
            message: "file is empty".into(),
        });
    }
    let width = records[0].len();
    let (header, first_row) = if schema.header {
        (records.remove(0), 2)
    } else {
        ((0..width).map(|i| i.to_string()).collect(), 1)
    };
    let label_col = resolve(&schema.label_column, &header, path)?;
    let ignored: BTreeSet<usize> = schema
        .ignore_columns
        .iter()
        .map(|c| resolve(c, &header, path))
        .collect::<Result<_>>()?;
    let feature_cols: Vec<usize> = match &schema.feature_columns {
        Some(cols) => cols
            .iter()
            .map(|c| resolve(c, &header, path))
            .collect::<Result<_>>()?,
        None => (0..width)
            .filter(|c| *c != label_col && !ignored.contains(c))
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::invalid(format!("schema {} selects no features", schema.name)));
    }
    let missing = |s: &str| s.is_empty() || schema.missing_tokens.iter().any(|t| t == s);

    let mut raw_labels = Vec::new();
    let mut features = Vec::new();
    let mut dropped = 0;
    for (r, rec) in records.iter().enumerate() {
        let row_no = r + first_row;
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_owned(),
                row: row_no,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        if missing(&rec[label_col]) || feature_cols.iter().any(|&c| missing(&rec[c])) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let field = &rec[c];
            let value = match schema.categorical.get(&header[c]) {
                Some(map) => map.get(field).copied(),
                None => field.parse::<f64>().ok().filter(|v| v.is_finite()),
            };
            row.push(value.ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                row: row_no,
                column: c + 1,
                message: format!("cannot read {field:?} as a value of {}", header[c]),
            })?);
        }
        features.push(row);
        raw_labels.push(rec[label_col].clone());
    }

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if class_names.len() < 2 {
        return Err(Error::invalid(format!(
            "{} has fewer than two classes",
            path.display()
        )));
    }
    let labels = raw_labels
        .iter()
        .map(|s| class_names.binary_search(s).unwrap() + 1)
        .collect();
    Ok(Dataset {
        name: schema.name.clone(),
        features,
        labels,
        feature_names: feature_cols.iter().map(|&c| header[c].clone()).collect(),
        class_names,
        provenance: path.display().to_string(),
        dropped_rows: dropped,
    })
}

pub const BUILTIN_DATASETS: [&str; 6] = ["iris", "penguin", "tae", "glass", "ecoli", "vowel"];

/// Directory holding the shipped datasets: `QMSVM_DATA_DIR` if set,
/// otherwise the repository's `data/` directory.
pub fn data_dir() -> PathBuf {
    match std::env::var_os("QMSVM_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Load a dataset from its schema file; the data file is resolved relative
/// to the schema.
pub fn load_with_schema(schema_path: &Path) -> Result<Dataset> {
    let schema = Schema::from_json_file(schema_path)?;
    let file = schema
        .file
        .clone()
        .ok_or_else(|| Error::invalid(format!("{} names no data file", schema_path.display())))?;
    let base = schema_path.parent().unwrap_or(Path::new("."));
    load_dataset(&base.join(file), &schema)
}

pub fn load_builtin(name: &str) -> Result<Dataset> {
    if !BUILTIN_DATASETS.contains(&name) {
        return Err(Error::invalid(format!(
            "unknown dataset {name:?}; expected one of {BUILTIN_DATASETS:?}"
        )));
    }
    load_with_schema(&data_dir().join(format!("{name}.schema.json")))
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit(x: &[Vec<f64>]) -> Result<ZScore> {
        if x.is_empty() {
            return Err(Error::invalid("cannot fit a normalizer on no rows"));
        }
        let n = x[0].len();
        let m = x.len() as f64;
        let mut mean = vec![0.0; n];
        for row in x {
            ensure_len(n, row.len())?;
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v / m;
            }
        }
        let mut var = vec![0.0; n];
        for row in x {
            for k in 0..n {
                var[k] += (row[k] - mean[k]).powi(2) / m;
            }
        }
        Ok(ZScore {
            mean,
            std: var.into_iter().map(f64::sqrt).collect(),
        })
    }

    /// Constant training columns map to zero.
    pub fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        x.iter()
            .map(|row| {
                ensure_len(self.mean.len(), row.len())?;
                Ok(row
                    .iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (mu, sd))| if *sd > 1e-12 { (v - mu) / sd } else { 0.0 })
                    .collect())
            })
            .collect()
    }
}

pub fn zscore_fit_transform(train: &[Vec<f64>]) -> Result<(ZScore, Vec<Vec<f64>>)> {
    let z = ZScore::fit(train)?;
    let out = z.apply(train)?;
    Ok((z, out))
}

/// Principal components of the sample covariance, in descending order of
/// explained variance. Each component is signed so that its largest-magnitude
/// entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `components[c]` is the c-th unit eigenvector (length N).
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Number of components kept by [`PcaModel::apply`].
    pub k: usize,
}

impl PcaModel {
    pub fn fit(x: &[Vec<f64>], threshold: f64) -> Result<PcaModel> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!("PCA threshold {threshold} outside (0, 1]")));
        }
        if x.len() < 2 {
            return Err(Error::invalid("PCA needs at least two rows"));
        }
        let n = x[0].len();
        if n < 2 {
            return Err(Error::invalid("PCA needs at least two features"));
        }
        let m = x.len();
        let mut mean = vec![0.0; n];
        for row in x {
            ensure_len(n, row.len())?;
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v / m as f64;
            }
        }
        let mut cov = nalgebra::DMatrix::<f64>::zeros(n, n);
        for row in x {
            for a in 0..n {
                let da = row[a] - mean[a];
                for b in 0..n {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        cov /= (m - 1) as f64;
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let explained_variance: Vec<f64> =
            order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let total: f64 = explained_variance.iter().sum();
        let explained_ratio: Vec<f64> = if total > 0.0 {
            explained_variance.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let components = order
            .iter()
            .map(|&i| {
                let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let pivot = v
                    .iter()
                    .copied()
                    .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                    .unwrap_or(1.0);
                if pivot < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        let mut k = n;
        let mut cum = 0.0;
        for (i, r) in explained_ratio.iter().enumerate() {
            cum += r;
            if cum >= threshold - 1e-12 {
                k = i + 1;
                break;
            }
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            explained_ratio,
            k,
        })
    }

    pub fn cumulative_ratio(&self) -> Vec<f64> {
        self.explained_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    /// Project onto the first `n_components` components.
    pub fn project(&self, x: &[Vec<f64>], n_components: usize) -> Result<Vec<Vec<f64>>> {
        if n_components > self.components.len() {
            return Err(Error::invalid("more components requested than available"));
        }
        x.iter()
            .map(|row| {
                ensure_len(self.mean.len(), row.len())?;
                Ok(self.components[..n_components]
                    .iter()
                    .map(|c| c.iter().zip(row.iter().zip(&self.mean)).map(|(w, (v, mu))| w * (v - mu)).sum())
                    .collect())
            })
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.project(x, self.k)
    }

    /// Map projected coordinates back to centred feature space (mean not
    /// added back).
    pub fn reconstruct_centered(&self, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.mean.len();
        z.iter()
            .map(|row| {
                let mut out = vec![0.0; n];
                for (coef, comp) in row.iter().zip(&self.components) {
                    for (o, w) in out.iter_mut().zip(comp) {
                        *o += coef * w;
                    }
                }
                out
            })
            .collect()
    }
}

pub fn pca_fit(train: &[Vec<f64>], threshold: f64) -> Result<PcaModel> {
    PcaModel::fit(train, threshold)
}

pub fn pca_apply(model: &PcaModel, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    model.apply(x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Folds {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl Folds {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold `i` as the test part, the rest as training.
    pub fn split(&self, i: usize) -> Split {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != i)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        train.sort_unstable();
        Split {
            train,
            test: self.folds[i].clone(),
            seed: self.seed,
        }
    }
}

fn members_by_class(labels: &[usize], n_classes: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut members = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y == 0 || y > n_classes {
            return Err(Error::invalid(format!("label {y} outside 1..={n_classes}")));
        }
        members[y - 1].push(i);
    }
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng::stream(seed, c as u64));
    }
    Ok(members)
}

/// Per-class test counts: `ceil(fraction · m)` test points in total,
/// apportioned by largest remainder (ties to the larger class, then the
/// lower class index), at most `n_c − 1` per class.
pub fn test_allocation(counts: &[usize], test_fraction: f64) -> Result<Vec<usize>> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if let Some(c) = counts.iter().position(|&n| n > 0 && n < 2) {
        return Err(Error::invalid(format!(
            "class {} has a single member and cannot be split",
            c + 1
        )));
    }
    let m: usize = counts.iter().sum();
    let n_test = ((test_fraction * m as f64) - 1e-9).ceil() as usize;
    let cap: Vec<usize> = counts.iter().map(|&n| n.saturating_sub(1)).collect();
    let quota: Vec<f64> = counts
        .iter()
        .map(|&n| n_test as f64 * n as f64 / m as f64)
        .collect();
    let mut alloc: Vec<usize> = quota
        .iter()
        .zip(&cap)
        .map(|(q, &c)| (q.floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quota[a] - quota[a].floor();
        let rb = quota[b] - quota[b].floor();
        rb.total_cmp(&ra)
            .then(counts[b].cmp(&counts[a]))
            .then(a.cmp(&b))
    });
    let mut remaining = n_test.saturating_sub(alloc.iter().sum());
    while remaining > 0 {
        let before = remaining;
        for &c in &order {
            if remaining == 0 {
                break;
            }
            if alloc[c] < cap[c] {
                alloc[c] += 1;
                remaining -= 1;
            }
        }
        if remaining == before {
            return Err(Error::invalid("not enough points to fill the test set"));
        }
    }
    Ok(alloc)
}

/// Stratified train/test split; indices within each part are ascending.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<Split> {
    let members = members_by_class(labels, n_classes, seed)?;
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = test_allocation(&counts, test_fraction)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (m, &t) in members.iter().zip(&alloc) {
        test.extend_from_slice(&m[..t]);
        train.extend_from_slice(&m[t..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test, seed })
}

/// Keep `round(fraction · n_c)` members of each class (at least one), chosen
/// by seed. Unlike [`stratified_split`] this accepts singleton classes.
pub fn stratified_subsample(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("subsample fraction {fraction} outside (0, 1]")));
    }
    let members = members_by_class(labels, n_classes, seed)?;
    let mut keep: Vec<usize> = members
        .iter()
        .flat_map(|m| {
            let n = ((fraction * m.len() as f64).round() as usize).clamp(1.min(m.len()), m.len());
            m[..n].iter().copied()
        })
        .collect();
    keep.sort_unstable();
    Ok(keep)
}

/// Stratified k-fold: each class is shuffled, then its members are dealt
/// round-robin into the folds, continuing the deal from one class to the
/// next so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Folds> {
    if k < 2 || k > labels.len() {
        return Err(Error::invalid(format!(
            "cannot make {k} folds from {} points",
            labels.len()
        )));
    }
    let members = members_by_class(labels, n_classes, seed)?;
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for m in &members {
        for &i in m {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(Folds { folds, seed })
}

/// Normalization and optional PCA, fit on the training part only unless
/// `fit_on_all` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Preprocessing {
    #[serde(default)]
    pub pca_threshold: Option<f64>,
    #[serde(default)]
    pub fit_on_all: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub zscore: ZScore,
    pub pca: Option<PcaModel>,
}

impl Preprocessing {
    pub fn apply(&self, data: &Dataset, split: &Split) -> Result<Prepared> {
        let pick = |idx: &[usize]| idx.iter().map(|&i| data.features[i].clone()).collect::<Vec<_>>();
        let train_raw = pick(&split.train);
        let test_raw = pick(&split.test);
        let fit_rows = if self.fit_on_all { &data.features } else { &train_raw };
        let zscore = ZScore::fit(fit_rows)?;
        let mut train = zscore.apply(&train_raw)?;
        let mut test = zscore.apply(&test_raw)?;
        let pca = match self.pca_threshold {
            Some(t) => {
                let basis = if self.fit_on_all { zscore.apply(&data.features)? } else { train.clone() };
                let model = PcaModel::fit(&basis, t)?;
                train = model.apply(&train)?;
                test = model.apply(&test)?;
                Some(model)
            }
            None => None,
        };
        Ok(Prepared {
            train,
            test,
            zscore,
            pca,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zscore_hand_example() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let (z, out) = zscore_fit_transform(&x).unwrap();
        let s = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((out[0][0] + s).abs() < 1e-12 && out[1][0].abs() < 1e-12 && (out[2][0] - s).abs() < 1e-12);
        assert!(out.iter().all(|r| r[1] == 0.0));
        let refit = ZScore::fit(&out).unwrap();
        assert!(refit.mean[0].abs() < 1e-12 && (refit.std[0] - 1.0).abs() < 1e-12);
        assert!((z.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pca_on_rank_two_data() {
        // Points on a plane inside R^3.
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let (a, b) = ((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos());
                vec![a + b, a - b, 2.0 * a]
            })
            .collect();
        let model = PcaModel::fit(&x, 0.999).unwrap();
        let cum = model.cumulative_ratio();
        assert!((cum[1] - 1.0).abs() < 1e-10);
        assert_eq!(model.k, 2);
        let full = model.project(&x, 3).unwrap();
        let back = model.reconstruct_centered(&full);
        for (r, b) in x.iter().zip(&back) {
            for k in 0..3 {
                assert!((r[k] - model.mean[k] - b[k]).abs() < 1e-10);
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let d: f64 = model.components[a].iter().zip(&model.components[b]).map(|(u, v)| u * v).sum();
                assert!((d - if a == b { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(PcaModel::fit(&x, 0.0).is_err());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(test_allocation(&[50, 50, 50], 0.3).unwrap(), vec![15, 15, 15]);
        let a = test_allocation(&[5, 5], 0.3).unwrap();
        assert_eq!(a.iter().sum::<usize>(), 3);
        assert!(a == vec![2, 1] || a == vec![1, 2]);
        assert!(test_allocation(&[1, 5], 0.3).is_err());
        assert!(test_allocation(&[5, 5], 1.0).is_err());
    }

    #[test]
    fn kfold_rejects_too_many_folds() {
        assert!(stratified_kfold(&[1, 2, 1], 2, 4, 0).is_err());
        assert!(stratified_kfold(&[1, 2, 1], 2, 1, 0).is_err());
    }

    #[test]
    fn loader_reports_locations_and_drops_missing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, "a,b,kind\n1,2,x\n3,?,y\n5,6,y\n").unwrap();
        let schema = Schema {
            name: "toy".into(),
            file: None,
            delimiter: Delimiter::Comma,
            header: true,
            label_column: Column::Name("kind".into()),
            feature_columns: None,
            ignore_columns: vec![],
            missing_tokens: vec!["?".into()],
            categorical: BTreeMap::new(),
            description: String::new(),
        };
        let d = load_dataset(&path, &schema).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dropped_rows, 1);
        assert_eq!(d.labels, vec![1, 2]);
        assert_eq!(d.class_names, vec!["x", "y"]);

        std::fs::write(&path, "a,b,kind\n1,2,x\n3,oops,y\n").unwrap();
        match load_dataset(&path, &schema) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }

        let ws = dir.path().join("toy.dat");
        std::fs::write(&ws, "1 2 b\n3  4 a\n").unwrap();
        let schema = Schema {
            delimiter: Delimiter::Whitespace,
            header: false,
            label_column: Column::Index(2),
            missing_tokens: vec![],
            ..schema
        };
        let d = load_dataset(&ws, &schema).unwrap();
        assert_eq!(d.features, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.labels, vec![2, 1]);
    }

    proptest! {
        #[test]
        fn split_is_a_stratified_partition(
            counts in prop::collection::vec(2usize..40, 2..6), seed in 0u64..1000, frac in 0.1f64..0.9,
        ) {
            let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c + 1, n)).collect();
            let capacity: usize = counts.iter().map(|n| n - 1).sum();
            if (frac * labels.len() as f64 - 1e-9).ceil() as usize > capacity {
                // Every class must keep a training member.
                prop_assert!(stratified_split(&labels, counts.len(), frac, seed).is_err());
                return Ok(());
            }
            let s = stratified_split(&labels, counts.len(), frac, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            let m = labels.len() as f64;
            let n_test = s.test.len() as f64;
            prop_assert!(n_test >= frac * m - 1e-9 && n_test < frac * m + 1.0);
            // Capped classes push their share onto the others, so
            // proportionality is only checked when no cap binds.
            let capped = counts.iter().any(|&n| (n_test * n as f64 / m).ceil() as usize > n - 1);
            for (c, &n) in counts.iter().enumerate() {
                let t = s.test.iter().filter(|&&i| labels[i] == c + 1).count();
                prop_assert!(capped || (t as f64 - n_test * n as f64 / m).abs() < 1.0);
                prop_assert!(t < n);
            }
            prop_assert_eq!(s.clone(), stratified_split(&labels, counts.len(), frac, seed).unwrap());
        }

        #[test]
        fn kfold_is_a_stratified_partition(
            counts in prop::collection::vec(1usize..40, 2..6), seed in 0u64..1000, k in 2usize..6,
        ) {
            let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c + 1, n)).collect();
            prop_assume!(k <= labels.len());
            let f = stratified_kfold(&labels, counts.len(), k, seed).unwrap();
            let mut all: Vec<usize> = f.folds.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for (c, &n) in counts.iter().enumerate() {
                for fold in &f.folds {
                    let t = fold.iter().filter(|&&i| labels[i] == c + 1).count();
                    prop_assert!((t as f64 - n as f64 / k as f64).abs() < 1.0);
                }
            }
            let sizes: Vec<usize> = f.folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
