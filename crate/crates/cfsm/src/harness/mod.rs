//! Experiment harness: TOML configuration, multi-seed execution, CSV output.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{
    CsvrgSection, ExperimentConfig, MethodsConfig, ProblemConfig, ProblemKind, RunConfig,
    SamplingChoice, SgdSection, SgdSparseSection, VrSection, METHOD_ORDER,
};
pub use experiment::{
    build_problem, run_experiment, BuiltProblem, ExperimentOutcome, MethodOutcome,
    ProblemInstance, SgdParity, StageRow,
};
pub use report::{
    fo_report_from_path, fo_report_from_reader, write_csv, write_csv_file, FoReport, CSV_HEADER,
};
