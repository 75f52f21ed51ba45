//! Shot-based kernel estimation converging on the exact value.

use qmsvm::kernels::{estimate_kernel_shots, quantum_kernel_exact, FeatureMap, FeatureMapKind};
use qmsvm::rng;

fn main() -> qmsvm::Result<()> {
    let map = FeatureMap::new(FeatureMapKind::Linear, 3)?;
    let (a, b) = ([0.5, 1.0, -0.3], [0.2, 0.6, 0.1]);
    let exact = quantum_kernel_exact(&map, &a, &b)?;
    println!("exact {exact:.5}");
    let mut r = rng::stream(3, 0);
    for shots in [10, 100, 1_000, 10_000, 100_000] {
        let est = estimate_kernel_shots(&map, &a, &b, shots, &mut r)?;
        let se = (exact * (1.0 - exact) / shots as f64).sqrt();
        println!("Z={shots:<7} estimate {est:.5}  error {:+.5}  (1 s.e. {se:.5})", est - exact);
    }
    Ok(())
}
