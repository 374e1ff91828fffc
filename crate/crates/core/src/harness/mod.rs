//! Experiment runner, simulator oracle and report files.

mod experiment;
mod oracle;
mod report;

pub use experiment::{
    build_corpus, run_experiment, train_codec, CodecSettings, ExperimentConfig, ExperimentOutput, ExperimentSeeds,
    MethodToggles, Trial,
};
pub use oracle::{oracle_best, oracle_seeds, OracleRanking, ORACLE_SEEDS};
pub use report::{
    emit_progress_csv, progress_csv, read_progress_csv, summary_csv, Method, MethodReport, MethodSection, TrialResult,
};
