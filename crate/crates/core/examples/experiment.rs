//! Programmatic use of the experiment runner: 5-fold cross-validation on
//! Tae for two kernels, written out as a bundle.

use qmsvm::experiments::{crossvalidate, Bundle, ExperimentConfig, KernelName};

fn main() -> qmsvm::Result<()> {
    let kernels: Vec<KernelName> = ["fqk", "gk"].iter().map(|k| k.parse()).collect::<qmsvm::Result<_>>()?;
    let cfg = ExperimentConfig::builtin("tae").with_kernels(&kernels);
    let report = crossvalidate(&cfg)?;
    for k in &report.kernels {
        println!("{:<4} mean {:.4} std {:.4}", k.kernel, k.mean_accuracy, k.std_accuracy);
    }
    let out = std::env::temp_dir().join("qmsvm-example-crossvalidate");
    let mut bundle = Bundle::new(&cfg)?;
    bundle.crossvalidate(&report)?;
    bundle.write(&out)?;
    for p in bundle.paths() {
        println!("wrote {}", out.join(p).display());
    }
    Ok(())
}
