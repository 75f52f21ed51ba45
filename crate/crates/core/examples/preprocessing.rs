//! Glass through the preprocessing pipeline: z-score, PCA at 85%
//! explained variance, a stratified 70/30 split and 5 folds.

use qmsvm::data::{load_builtin, stratified_kfold, stratified_split, zscore_fit_transform, PcaModel};

fn main() -> qmsvm::Result<()> {
    let d = load_builtin("glass")?;
    println!("{}: m={} N={} l={} class counts {:?}", d.name, d.len(), d.n_features(), d.n_classes(), d.class_counts());

    let (_, z) = zscore_fit_transform(&d.features)?;
    let pca = PcaModel::fit(&z, 0.85)?;
    let cum: Vec<String> = pca.cumulative_ratio().iter().map(|c| format!("{c:.3}")).collect();
    println!("cumulative explained variance {}", cum.join(" "));
    println!("components kept: {}", pca.k);

    let split = stratified_split(&d.labels, d.n_classes(), 0.3, 0)?;
    println!("train/test {}/{}", split.train.len(), split.test.len());
    let folds = stratified_kfold(&d.labels, d.n_classes(), 5, 0)?;
    for i in 0..folds.k() {
        let s = folds.split(i);
        println!("fold {i}: train {} test {}", s.train.len(), s.test.len());
    }
    Ok(())
}
