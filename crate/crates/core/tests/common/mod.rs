//! Small fixtures shared by the integration tests.
#![allow(dead_code)]

use ldl_core::augment::{AugmentConfig, AugmentMethod};
use ldl_core::harness::{
    bank_from_networks, gen_synth, run_seed, BankSpec, Dataset, DatasetSpec, ExperimentConfig, LoadedBank,
    ScheduleConfig, TeacherMember,
};
use ldl_core::labelgen::LabelMode;
use ldl_core::nn::Architecture;

pub const CLASSES: usize = 4;

pub fn small_dataset(n_train: usize, noise: f64, seed: u64) -> Dataset {
    gen_synth(&DatasetSpec::benchmark(CLASSES, n_train, 40, 40, noise, seed)).unwrap()
}

pub fn teacher_arch(ds: &Dataset, width: usize) -> Architecture {
    Architecture::mlp(ds.shape(), &[width], ds.spec.classes, 0.2)
}

pub fn bank_spec(ds: &Dataset, members: usize) -> BankSpec {
    BankSpec {
        members: (0..members)
            .map(|i| TeacherMember {
                arch: teacher_arch(ds, 24 + 8 * i),
                seed: 500 + i as u64,
            })
            .collect(),
        tau: 1.0,
    }
}

/// Vanilla-trained teachers matching [`bank_spec`].
pub fn small_bank(ds: &Dataset, members: usize, epochs: usize) -> LoadedBank {
    let spec = bank_spec(ds, members);
    let teachers = spec
        .members
        .iter()
        .map(|m| {
            let mut cfg = ExperimentConfig::new(LabelMode::Vanilla, m.arch.clone());
            cfg.schedule = ScheduleConfig::scaled(epochs);
            run_seed(&cfg, ds, None, None, m.seed).unwrap().model
        })
        .collect();
    bank_from_networks(teachers, spec.tau).unwrap()
}

pub fn small_config(
    ds: &Dataset,
    mode: LabelMode,
    method: AugmentMethod,
    members: usize,
    epochs: usize,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode, Architecture::mlp(ds.shape(), &[32], ds.spec.classes, 0.0));
    cfg.augment = AugmentConfig::new(method, 1.0).unwrap();
    cfg.schedule = ScheduleConfig::scaled(epochs);
    cfg.optimizer.batch_size = 32;
    if mode.needs_teachers() {
        cfg.teachers = Some(bank_spec(ds, members));
    }
    cfg
}
