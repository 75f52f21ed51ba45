//! Bell state on the state-vector simulator, then 1000 sampled shots.

use std::collections::BTreeMap;

use qmsvm::qsim::{sample_bitstring, Gate, StateVector};
use qmsvm::rng;

fn main() -> qmsvm::Result<()> {
    let mut psi = StateVector::zero(2)?;
    psi.apply_all(&[Gate::H(0), Gate::Cnot(0, 1)])?;
    println!("amplitudes: {:?}", psi.amplitudes());
    println!("probabilities: {:?}", psi.probabilities());

    let mut r = rng::stream(7, 0);
    let mut counts = BTreeMap::new();
    for _ in 0..1000 {
        *counts.entry(sample_bitstring(&psi, &mut r)?.to_string()).or_insert(0) += 1;
    }
    println!("1000 shots: {counts:?}");
    Ok(())
}
