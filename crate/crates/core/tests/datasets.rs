use qmsvm::data::{self, Preprocessing, stratified_split, BUILTIN_DATASETS};

#[test]
fn builtin_shapes() {
    let expect = [
        ("iris", 150, 4, 3, 0),
        ("penguin", 333, 5, 3, 11),
        ("tae", 151, 5, 3, 0),
        ("glass", 214, 9, 6, 0),
        ("ecoli", 336, 7, 8, 0),
        ("vowel", 528, 10, 11, 0),
    ];
    for (name, m, n, l, dropped) in expect {
        let d = data::load_builtin(name).unwrap();
        assert_eq!((d.len(), d.n_features(), d.n_classes(), d.dropped_rows), (m, n, l, dropped), "{name}");
        assert!(d.class_counts().iter().all(|&c| c > 0));
    }
    assert_eq!(BUILTIN_DATASETS.len(), 6);
    assert!(data::load_builtin("nope").is_err());
}

#[test]
fn split_sizes_match_thirty_percent() {
    let expect = [("iris", 45), ("tae", 46), ("penguin", 100), ("glass", 65), ("ecoli", 101), ("vowel", 159)];
    for (name, n_test) in expect {
        let d = data::load_builtin(name).unwrap();
        for seed in 0..3 {
            let s = stratified_split(&d.labels, d.n_classes(), 0.3, seed).unwrap();
            assert_eq!(s.test.len(), n_test, "{name}");
            assert_eq!(s.train.len() + s.test.len(), d.len());
        }
    }
}

#[test]
fn pca_component_counts() {
    for (name, k) in [("glass", 5), ("ecoli", 5), ("vowel", 6)] {
        let d = data::load_builtin(name).unwrap();
        let split = stratified_split(&d.labels, d.n_classes(), 0.3, 0).unwrap();
        let prep = Preprocessing { pca_threshold: Some(0.85), fit_on_all: true };
        let p = prep.apply(&d, &split).unwrap();
        assert_eq!(p.pca.as_ref().unwrap().k, k, "{name}");
        assert_eq!(p.train[0].len(), k);
    }
}
