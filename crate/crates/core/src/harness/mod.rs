//! Experiment harness: synthetic data, teacher banks, training runs and reports.

pub mod config;
pub mod data;
pub mod record;
pub mod report;
pub mod runner;
pub mod teachers;

pub use config::{BankSpec, ExperimentConfig, OptimizerConfig, ScheduleConfig, TeacherMember, SEED_ENV};
pub use data::{gen_synth, load_dataset, save_dataset, Dataset, DatasetSpec, SealedSplit, Split};
pub use record::{top_bottom_gap, ClassLosses, EpochStats, OgrUpdate, RunRecord};
pub use report::{export_penultimate, export_report, save_run, summarize, ReportFormat, Summary};
pub use runner::{run_experiment, run_seed, split_logits, LoadedBank, RunOutput};
pub use teachers::{bank_from_networks, load_bank, train_and_save_bank, train_teachers, BankManifest};
