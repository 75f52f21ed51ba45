//! Kernel value between two points under each of the six feature maps,
//! with the Pauli closed form for comparison.

use qmsvm::kernels::{pauli_kernel_closed_form, quantum_kernel_exact, FeatureMap, FeatureMapKind};

fn main() -> qmsvm::Result<()> {
    let a = [0.3, -1.2, 0.8];
    let b = [0.1, -0.4, 1.5];
    for kind in FeatureMapKind::ALL {
        let map = FeatureMap::new(kind, a.len())?;
        let gates = map.circuit(&a)?.len();
        println!("{:<4} gates={gates:<3} kappa={:.6}", kind.abbreviation(), quantum_kernel_exact(&map, &a, &b)?);
    }
    println!("closed form (Pauli maps): {:.6}", pauli_kernel_closed_form(&a, &b)?);
    Ok(())
}
