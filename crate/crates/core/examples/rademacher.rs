//! Frobenius norm, Monte-Carlo Rademacher estimate and bound for a
//! quantum and a classical kernel on the Iris training split.

use qmsvm::data::{load_builtin, stratified_split, Preprocessing};
use qmsvm::kernels::{gram_matrix_square, ClassicalKernel, ClassicalKind, FeatureMap, FeatureMapKind, KernelSpec};
use qmsvm::metrics::{generalization_table, GeneralizationReport, DEFAULT_RADEMACHER_DRAWS};

fn main() -> qmsvm::Result<()> {
    let d = load_builtin("iris")?;
    let split = stratified_split(&d.labels, d.n_classes(), 0.3, 0)?;
    let x = Preprocessing::default().apply(&d, &split)?.train;
    let n = d.n_features();
    let specs = [
        ("XQK", KernelSpec::quantum(FeatureMap::new(FeatureMapKind::PauliX, n)?)),
        ("GK", KernelSpec::classical(ClassicalKernel::default_for(ClassicalKind::Gaussian, n))),
        ("LK", KernelSpec::classical(ClassicalKernel::default_for(ClassicalKind::Linear, n))),
    ];
    let mut rows = Vec::new();
    for (label, spec) in specs {
        let k = gram_matrix_square(&x, &spec, 1)?;
        rows.push(GeneralizationReport::compute(label, &k, 1.0, DEFAULT_RADEMACHER_DRAWS, 0)?);
    }
    print!("{}", generalization_table(&rows));
    Ok(())
}
