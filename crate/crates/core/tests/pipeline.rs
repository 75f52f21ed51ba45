use qmsvm::data::{load_builtin, stratified_split, Dataset, Preprocessing};
use qmsvm::experiments::{evaluate, ExperimentConfig, KernelName};
use qmsvm::kernels::{gram_matrix_square, FeatureMap, FeatureMapKind, KernelSpec};
use qmsvm::metrics::classification_metrics;

fn xqk() -> KernelName {
    KernelName::Quantum(FeatureMapKind::PauliX)
}

#[test]
fn test_rows_do_not_leak_into_preprocessing() {
    let d = load_builtin("glass").unwrap();
    let split = stratified_split(&d.labels, d.n_classes(), 0.3, 4).unwrap();
    let pre = Preprocessing { pca_threshold: Some(0.85), fit_on_all: false };
    let base = pre.apply(&d, &split).unwrap();

    let mut shifted = d.features.clone();
    for &i in &split.test {
        for v in &mut shifted[i] {
            *v = *v * 50.0 + 1e3;
        }
    }
    let poisoned = Dataset { features: shifted, ..d.clone() };
    let other = pre.apply(&poisoned, &split).unwrap();
    assert_eq!(base.train, other.train);
    assert_eq!(base.zscore, other.zscore);
    assert_ne!(base.test, other.test);
}

#[test]
fn fit_on_all_differs_from_train_only() {
    let d = load_builtin("ecoli").unwrap();
    let split = stratified_split(&d.labels, d.n_classes(), 0.3, 0).unwrap();
    let train_only = Preprocessing { pca_threshold: Some(0.85), fit_on_all: false }.apply(&d, &split).unwrap();
    let all = Preprocessing { pca_threshold: Some(0.85), fit_on_all: true }.apply(&d, &split).unwrap();
    assert_ne!(train_only.zscore, all.zscore);
}

#[test]
fn shot_gram_is_independent_of_worker_count() {
    let d = load_builtin("iris").unwrap();
    let x: Vec<Vec<f64>> = d.features.iter().take(40).cloned().collect();
    let spec = KernelSpec::quantum(FeatureMap::new(FeatureMapKind::Full, 4).unwrap()).with_shots(Some(300), 9);
    let one = gram_matrix_square(&x, &spec, 1).unwrap();
    let four = gram_matrix_square(&x, &spec, 4).unwrap();
    assert_eq!(one.values(), four.values());
    let noisy = spec.with_noise(0.05);
    assert_eq!(gram_matrix_square(&x, &noisy, 1).unwrap().values(), gram_matrix_square(&x, &noisy, 3).unwrap().values());
}

#[test]
fn evaluate_is_reproducible_across_workers() {
    let mut cfg = ExperimentConfig::builtin("iris").with_kernels(&[xqk(), "gk".parse().unwrap()]);
    cfg.shots = Some(200);
    cfg.seed = 3;
    cfg.workers = 1;
    let a = serde_json::to_string(&evaluate(&cfg).unwrap()).unwrap();
    cfg.workers = 3;
    let b = serde_json::to_string(&evaluate(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn evaluate_report_is_internally_consistent() {
    let cfg = ExperimentConfig::builtin("penguin").with_kernels(&["cqk".parse().unwrap()]);
    let r = evaluate(&cfg).unwrap();
    assert_eq!((r.train_size, r.test_size), (233, 100));
    let run = &r.runs[0];
    assert_eq!(run.confusion.total(), 100);
    assert_eq!(classification_metrics(&run.confusion).unwrap(), run.metrics);
    let m = &run.metrics;
    assert_eq!(m.micro_avg.precision, m.accuracy);
    assert_eq!(m.micro_avg.recall, m.accuracy);
    assert_eq!(m.micro_avg.f1, m.accuracy);
    assert!((m.weighted_avg.recall - m.accuracy).abs() < 1e-12);
    assert!(run.roc.macro_auc > 0.9 && run.roc.macro_auc <= 1.0);
}
