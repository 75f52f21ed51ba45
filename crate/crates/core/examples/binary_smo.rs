//! Binary SMO on a precomputed Gaussian kernel over two point clouds.

use qmsvm::kernels::{gram_matrix_square, ClassicalKernel, ClassicalKind, KernelSpec};
use qmsvm::rng;
use qmsvm::svm::{smo_train_binary, Gram, SmoParams};
use rand::Rng;

fn main() -> qmsvm::Result<()> {
    let mut r = rng::stream(1, 0);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..40 {
        let centre = if i % 2 == 0 { 1.0 } else { -1.0 };
        x.push(vec![centre + r.random_range(-1.0..1.0), centre + r.random_range(-1.0..1.0)]);
        y.push(centre);
    }
    let spec = KernelSpec::classical(ClassicalKernel::default_for(ClassicalKind::Gaussian, 2));
    let k = gram_matrix_square(&x, &spec, 1)?;
    let gram = Gram::try_from(&k)?;
    let model = smo_train_binary(gram, &y, &SmoParams::with_c(1.0))?;
    println!(
        "objective {:.5}, bias {:.4}, {} support vectors, {} iterations, KKT violation {:.2e}",
        model.objective,
        model.bias,
        model.support.len(),
        model.iterations,
        model.kkt_violation(gram)?
    );
    let correct = (0..x.len()).filter(|&i| model.decision(k.row(i)).unwrap().signum() == y[i]).count();
    println!("training accuracy {}/{}", correct, x.len());
    Ok(())
}
