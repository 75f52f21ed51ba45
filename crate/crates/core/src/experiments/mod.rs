//! Experiment runner behind the command-line tool: configuration, model
//! selection, the six studies and their output bundles.

mod bundle;
mod commands;
mod config;
mod select;

pub use bundle::Bundle;
pub use commands::{
    concentration, crossvalidate, default_out, evaluate, generalization, kernel_matrix, learning_curve,
    ConcentrationReport, ConcentrationRow, CrossValidateReport, DataInfo, EvaluateReport, EvaluationRun,
    FoldResult, GeneralizationTable, KernelCv, KernelMatrixReport, LearningCurveReport, LearningPoint,
    MatrixRecord, CONCENTRATION_LABEL_NOTE,
};
pub use config::{
    ConcentrationConfig, DatasetRef, ExperimentConfig, KernelChoice, KernelName, DEFAULT_C_GRID, NOISE_SWEEP,
};
pub use select::{accuracy, classical_candidates, derive_seed, fit_and_score, FitOutcome, KernelSettings, Selection};
