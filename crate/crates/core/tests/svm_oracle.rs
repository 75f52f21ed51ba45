mod common;

use qmsvm::rng;
use qmsvm::svm::{
    crammer_singer_objective, crammer_singer_objective_expanded, crammer_singer_train, dual_objective,
    smo_train_binary, Gram, JointParams, SmoParams,
};
use rand::Rng;

#[test]
fn binary_smo_matches_projected_gradient() {
    for case in 0..25u64 {
        let mut r = rng::stream(11, case);
        let m = r.random_range(2..=6);
        let k = common::random_gram(&mut r, m, case % 2 == 0);
        let mut y: Vec<f64> = (0..m).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = r.random_range(0.1..10.0);
        let gram = Gram::new(m, &k).unwrap();
        let model = smo_train_binary(gram, &y, &SmoParams::with_c(c)).unwrap();
        let oracle = common::binary_dual_oracle(&k, &y, c);
        let ours = dual_objective(gram, &y, &model.alphas).unwrap();
        assert!((ours - oracle).abs() < 1e-6, "case {case}: {ours} vs {oracle}");
        assert!(model.kkt_violation(gram).unwrap() <= 1e-3, "case {case}");
    }
}

#[test]
fn joint_dual_matches_projected_gradient() {
    for case in 0..12u64 {
        let mut r = rng::stream(12, case);
        let l = r.random_range(2..=3);
        let m = r.random_range(l..=6);
        let k = common::random_gram(&mut r, m, case % 2 == 1);
        let mut labels: Vec<usize> = (0..m).map(|_| r.random_range(0..l)).collect();
        for (s, y) in labels.iter_mut().take(l).enumerate() {
            *y = s;
        }
        let c = r.random_range(0.2..5.0);
        let oracle = common::JointOracle::new(&k, &labels, l, c).solve(20_000);
        let one_based: Vec<usize> = labels.iter().map(|y| y + 1).collect();
        let model = crammer_singer_train(Gram::new(m, &k).unwrap(), &one_based, l, &JointParams::with_c(c)).unwrap();
        assert!((model.objective - oracle).abs() < 1e-4, "case {case}: {} vs {oracle}", model.objective);
    }
}

#[test]
fn objective_forms_agree_with_independent_form() {
    for case in 0..50u64 {
        let mut r = rng::stream(13, case);
        let l = r.random_range(2..=4);
        let m = r.random_range(l..=7);
        let k = common::random_gram(&mut r, m, true);
        let labels: Vec<usize> = (0..m).map(|i| if i < l { i } else { r.random_range(0..l) }).collect();
        let oracle = common::JointOracle::new(&k, &labels, l, 2.0);
        let a = oracle.random_feasible(&mut r);
        let one_based: Vec<usize> = labels.iter().map(|y| y + 1).collect();
        let g = Gram::new(m, &k).unwrap();
        let grouped = crammer_singer_objective(&a, g, &one_based).unwrap();
        let expanded = crammer_singer_objective_expanded(&a, g, &one_based).unwrap();
        assert!((grouped - expanded).abs() < 1e-10);
        let labels_ref = &labels;
        let flat: Vec<f64> = (0..m)
            .flat_map(|i| (0..l).filter(move |&s| s != labels_ref[i]).map(move |s| (i, s)))
            .map(|(i, s)| a[i][s])
            .collect();
        let independent = oracle.objective(&nalgebra::DVector::from_vec(flat));
        assert!((grouped - independent).abs() < 1e-10, "{grouped} vs {independent}");
    }
}
