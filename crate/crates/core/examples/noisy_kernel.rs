//! Depolarizing noise: a kernel value simulated on density matrices at
//! several noise levels, next to the closed form for the Pauli maps.

use qmsvm::kernels::{noisy_pauli_closed_form, noisy_quantum_kernel, FeatureMap, FeatureMapKind};
use qmsvm::qsim::{apply_depolarizing_all, DensityMatrix};

fn main() -> qmsvm::Result<()> {
    let rho = apply_depolarizing_all(&DensityMatrix::zero(2)?, 0.2)?;
    println!("|00><00| after p=0.2 on both qubits: trace {:.3}, purity {:.4}", rho.trace(), rho.purity());

    let a = [0.4, -0.9, 1.1];
    let b = [-0.2, 0.3, 0.7];
    let pauli = FeatureMap::new(FeatureMapKind::PauliY, 3)?;
    let iqp = FeatureMap::new(FeatureMapKind::Full, 3)?;
    println!("{:>5} {:>10} {:>10} {:>10}", "p", "YQK", "closed", "FQK");
    for p in [0.0, 0.01, 0.05, 0.1, 0.2, 0.75] {
        println!(
            "{p:>5} {:>10.6} {:>10.6} {:>10.6}",
            noisy_quantum_kernel(&pauli, &a, &b, p)?,
            noisy_pauli_closed_form(&a, &b, p)?,
            noisy_quantum_kernel(&iqp, &a, &b, p)?
        );
    }
    Ok(())
}
