//! Teacher training and bank assembly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::data::Dataset;
use super::runner::{run_seed, LoadedBank, RunOutput};
use crate::augment::AugmentConfig;
use crate::error::{LdlError, Result};
use crate::labelgen::{LabelMode, TeacherBank};
use crate::nn::{decode_model, encode_model, Architecture, Network};

pub const BANK_MANIFEST: &str = "bank.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub file: String,
    pub arch: Architecture,
    pub seed: u64,
    pub model_sha256: String,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub dataset_hash: String,
    pub tau: f64,
    pub members: Vec<BankEntry>,
}

/// Hash identifying a bank: SHA-256 over each encoded model, then τ.
fn bank_hash(encoded: &[Vec<u8>], tau: f64) -> String {
    let mut h = Sha256::new();
    for bytes in encoded {
        h.update(Sha256::digest(bytes));
    }
    h.update(tau.to_le_bytes());
    hex::encode(h.finalize())
}

/// Wrap in-memory teachers as a bank, hashing them as [`load_bank`] would.
pub fn bank_from_networks(teachers: Vec<Network<f32>>, tau: f64) -> Result<LoadedBank> {
    let encoded = teachers.iter().map(encode_model).collect::<Result<Vec<_>>>()?;
    Ok(LoadedBank {
        hash: bank_hash(&encoded, tau),
        bank: TeacherBank::new(teachers, tau)?,
    })
}

/// Hard-label (vanilla) training configuration for one teacher.
pub fn teacher_config(cfg: &ExperimentConfig, arch: &Architecture, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        data: cfg.data.clone(),
        mode: LabelMode::Vanilla,
        student: arch.clone(),
        teachers: None,
        augment: AugmentConfig::default(),
        optimizer: cfg.optimizer.clone(),
        schedule: cfg.schedule.clone(),
        seeds: vec![seed],
        bins: cfg.bins,
    }
}

/// Train every bank member of `cfg` with vanilla supervision. Returns the
/// trained runs in bank order.
pub fn train_teachers(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<RunOutput>> {
    let spec = cfg
        .teachers
        .as_ref()
        .ok_or_else(|| LdlError::Config("config has no teacher bank to train".into()))?;
    spec.members
        .iter()
        .map(|m| run_seed(&teacher_config(cfg, &m.arch, m.seed), ds, None, None, m.seed))
        .collect()
}

/// Train the bank and write `teacher_<i>.ldlm`, `teacher_<i>.json` and the
/// manifest into `out`.
pub fn train_and_save_bank(cfg: &ExperimentConfig, ds: &Dataset, out: &Path) -> Result<BankManifest> {
    let runs = train_teachers(cfg, ds)?;
    let spec = cfg.teachers.as_ref().expect("checked by train_teachers");
    std::fs::create_dir_all(out)?;
    let mut members = Vec::with_capacity(runs.len());
    for (i, (run, m)) in runs.iter().zip(&spec.members).enumerate() {
        let bytes = encode_model(&run.model)?;
        let file = format!("teacher_{i}.ldlm");
        std::fs::write(out.join(&file), &bytes)?;
        std::fs::write(
            out.join(format!("teacher_{i}.json")),
            serde_json::to_vec_pretty(&run.record)?,
        )?;
        members.push(BankEntry {
            file,
            arch: m.arch.clone(),
            seed: m.seed,
            model_sha256: hex::encode(Sha256::digest(&bytes)),
            test_accuracy: run.record.test.accuracy,
        });
    }
    let manifest = BankManifest {
        dataset_hash: ds.hash.clone(),
        tau: spec.tau,
        members,
    };
    std::fs::write(out.join(BANK_MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Load a bank written by [`train_and_save_bank`], checking that it was
/// trained on the dataset with hash `dataset_hash` and that every model
/// file matches its manifest entry.
pub fn load_bank(dir: &Path, dataset_hash: &str) -> Result<LoadedBank> {
    let manifest_path = dir.join(BANK_MANIFEST);
    if !manifest_path.exists() {
        return Err(LdlError::MissingBank(format!(
            "no {BANK_MANIFEST} in {}",
            dir.display()
        )));
    }
    let manifest: BankManifest = serde_json::from_slice(&std::fs::read(&manifest_path)?)?;
    if manifest.dataset_hash != dataset_hash {
        return Err(LdlError::Config(format!(
            "teacher bank was trained on dataset {}, not {dataset_hash}",
            manifest.dataset_hash
        )));
    }
    let mut encoded = Vec::with_capacity(manifest.members.len());
    let mut teachers = Vec::with_capacity(manifest.members.len());
    for entry in &manifest.members {
        let path = dir.join(&entry.file);
        if !path.exists() {
            return Err(LdlError::NotFound(path));
        }
        let bytes = std::fs::read(&path)?;
        if hex::encode(Sha256::digest(&bytes)) != entry.model_sha256 {
            return Err(LdlError::Config(format!(
                "{} does not match its manifest hash",
                entry.file
            )));
        }
        let net = decode_model(&bytes)?;
        if net.arch() != &entry.arch {
            return Err(LdlError::Config(format!(
                "{} architecture differs from the manifest",
                entry.file
            )));
        }
        teachers.push(net);
        encoded.push(bytes);
    }
    Ok(LoadedBank {
        hash: bank_hash(&encoded, manifest.tau),
        bank: TeacherBank::new(teachers, manifest.tau)?,
    })
}
