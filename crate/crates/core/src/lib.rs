//! Quantum-kernel multiclass support vector machines.
//!
//! The crate is organised bottom-up:
//!
//! * [`qsim`]: dense state-vector and density-matrix simulation for up to
//!   12 qubits, including the single-qubit depolarizing channel.
//! * [`kernels`]: the six quantum feature maps (IQP full/linear/circular and
//!   Pauli-X/Y/Z rotation layers), four classical kernels, and Gram matrices
//!   in exact, shot-sampled and depolarizing-noise modes.
//! * [`svm`]: one-vs-all SMO and the joint multiclass dual on precomputed
//!   kernels.
//! * [`data`]: dataset loading, z-score, PCA, stratified splits.
//! * [`metrics`]: confusion-derived metrics, ROC/AUC, Rademacher complexity.
//! * [`experiments`]: end-to-end studies backing the `qmsvm` binary.

pub mod data;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod metrics;
pub mod qsim;
pub mod rng;
pub mod svm;

pub use error::{Error, ErrorKind, Result};
