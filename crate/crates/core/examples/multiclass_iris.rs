//! Iris with the Pauli-X quantum kernel: one-vs-all and the joint dual,
//! then a JSON round trip of the trained model.

use qmsvm::data::{load_builtin, stratified_split, Preprocessing};
use qmsvm::kernels::{gram_matrix, gram_matrix_square, FeatureMap, FeatureMapKind, KernelSpec};
use qmsvm::svm::{AbsentClassPolicy, Gram, MulticlassModel, Strategy};

fn main() -> qmsvm::Result<()> {
    let d = load_builtin("iris")?;
    let split = stratified_split(&d.labels, d.n_classes(), 0.3, 0)?;
    let p = Preprocessing::default().apply(&d, &split)?;
    let train_y: Vec<usize> = split.train.iter().map(|&i| d.labels[i]).collect();
    let test_y: Vec<usize> = split.test.iter().map(|&i| d.labels[i]).collect();

    let spec = KernelSpec::quantum(FeatureMap::new(FeatureMapKind::PauliX, d.n_features())?);
    let k_train = gram_matrix_square(&p.train, &spec, 1)?;
    let k_test = gram_matrix(&p.test, &p.train, &spec, 1)?;

    for strategy in [Strategy::OneVsAll, Strategy::CrammerSinger] {
        let model =
            MulticlassModel::train(strategy, Gram::try_from(&k_train)?, &train_y, d.n_classes(), 1.0, AbsentClassPolicy::Error)?;
        let pred = model.predict_all(&k_test)?;
        let hits = pred.iter().zip(&test_y).filter(|(a, b)| a == b).count();
        println!("{:<3} test accuracy {:.4}", strategy.short_name(), hits as f64 / test_y.len() as f64);

        let restored = MulticlassModel::from_json(&model.to_json()?)?;
        assert_eq!(restored.predict_all(&k_test)?, pred);
    }
    Ok(())
}
