use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{AugmentConfig, AugmentMethod};
use crate::calib::DEFAULT_BINS;
use crate::error::{LdlError, Result};
use crate::labelgen::LabelMode;
use crate::nn::{Architecture, StepSchedule};

/// Environment variable that replaces the configured seed list with one seed.
pub const SEED_ENV: &str = "LDL_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 0.05,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub epochs: usize,
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::standard()
    }
}

impl ScheduleConfig {
    /// 60 epochs, rate ×0.1 at 35, 45 and 55.
    pub fn standard() -> Self {
        ScheduleConfig {
            epochs: 60,
            milestones: vec![35, 45, 55],
            gamma: 0.1,
        }
    }

    /// The long-training variant: 90 epochs, rate ×0.1 at 35, 50, 65 and 80.
    pub fn long() -> Self {
        ScheduleConfig {
            epochs: 90,
            milestones: vec![35, 50, 65, 80],
            gamma: 0.1,
        }
    }

    /// The standard schedule compressed (or stretched) to `epochs`, with
    /// milestones moved proportionally.
    pub fn scaled(epochs: usize) -> Self {
        let base = ScheduleConfig::standard();
        let milestones = base
            .milestones
            .iter()
            .map(|&m| ((m * epochs) as f64 / base.epochs as f64).round() as usize)
            .collect();
        ScheduleConfig {
            epochs,
            milestones,
            gamma: base.gamma,
        }
    }

    pub fn step_schedule(&self) -> StepSchedule {
        StepSchedule {
            milestones: self.milestones.clone(),
            gamma: self.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherMember {
    pub arch: Architecture,
    pub seed: u64,
}

fn default_tau() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSpec {
    pub members: Vec<TeacherMember>,
    /// Softening temperature applied to teacher logits for LDL labels.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl BankSpec {
    /// Five dropout MLP teachers of different widths.
    pub fn default_bank(input: [usize; 3], classes: usize) -> Self {
        let widths = [512, 384, 448, 320, 256];
        BankSpec {
            members: widths
                .iter()
                .enumerate()
                .map(|(i, &w)| TeacherMember {
                    arch: Architecture::mlp(input, &[w, w], classes, 0.2),
                    seed: 1000 + i as u64,
                })
                .collect(),
            tau: default_tau(),
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset directory; relative paths are resolved against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<std::path::PathBuf>,
    pub mode: LabelMode,
    pub student: Architecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teachers: Option<BankSpec>,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Reliability bin count M.
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl ExperimentConfig {
    pub fn new(mode: LabelMode, student: Architecture) -> Self {
        ExperimentConfig {
            data: None,
            mode,
            student,
            teachers: None,
            augment: AugmentConfig::default(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleConfig::default(),
            seeds: default_seeds(),
            bins: default_bins(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        self.augment.validate()?;
        self.student.validate()?;
        let bad = |m: String| Err(LdlError::Config(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.schedule.epochs == 0 {
            return bad("epochs must be ≥ 1".into());
        }
        if self.optimizer.batch_size == 0 {
            return bad("batch size must be ≥ 1".into());
        }
        if self.bins == 0 {
            return bad("bin count must be ≥ 1".into());
        }
        if self.mode.needs_teachers() {
            let Some(bank) = &self.teachers else {
                return bad(format!("mode {} needs a teacher bank", self.mode.name()));
            };
            if bank.members.is_empty() {
                return bad("teacher bank lists no members".into());
            }
            if bank.tau.is_nan() || bank.tau <= 0.0 {
                return bad(format!("teacher τ = {} must be > 0", bank.tau));
            }
        }
        if let Some(bank) = &self.teachers {
            for (i, m) in bank.members.iter().enumerate() {
                m.arch.validate()?;
                if m.arch.input != self.student.input || m.arch.classes != self.student.classes {
                    return bad(format!("teacher {i} input/classes differ from the student"));
                }
            }
        }
        if self.mode.is_online() && self.augment.method == AugmentMethod::None {
            log::warn!(
                "{} without augmentation regenerates the offline labels every step",
                self.mode.name()
            );
        }
        Ok(())
    }

    /// Seeds to run: `LDL_SEED` when set, the configured list otherwise.
    pub fn effective_seeds(&self) -> Result<Vec<u64>> {
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map(|s| vec![s])
                .map_err(|_| LdlError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(self.seeds.clone()),
        }
    }

    /// Hex SHA-256 of the configuration with seeds and data path removed, so
    /// every seed of one experiment shares the hash.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.seeds.clear();
        c.data = None;
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
    }

    /// Epochs between OGR weight refreshes: the mode's gap, scaled down
    /// proportionally when training is shorter than the standard 60 epochs.
    pub fn ogr_cadence(&self) -> Option<usize> {
        let LabelMode::Ogr { gap } = self.mode else {
            return None;
        };
        let standard = ScheduleConfig::standard().epochs;
        Some(if self.schedule.epochs < standard {
            ((gap * self.schedule.epochs) as f64 / standard as f64)
                .round()
                .max(1.0) as usize
        } else {
            gap
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> Architecture {
        Architecture::mlp([1, 16, 16], &[32], 10, 0.0)
    }

    #[test]
    fn defaults_from_minimal_json() {
        let json = format!(
            r#"{{"mode":{{"kind":"vanilla"}},"student":{}}}"#,
            serde_json::to_string(&arch()).unwrap()
        );
        let c: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c.optimizer, OptimizerConfig::default());
        assert_eq!(c.schedule.milestones, vec![35, 45, 55]);
        assert_eq!(c.seeds, vec![0]);
        c.validate().unwrap();
    }

    #[test]
    fn teacher_modes_need_bank() {
        let c = ExperimentConfig::new(LabelMode::OffLdl, arch());
        assert!(matches!(c.validate(), Err(LdlError::Config(_))));
        let mut c = c;
        c.teachers = Some(BankSpec::default_bank([1, 16, 16], 10));
        c.validate().unwrap();
        c.teachers.as_mut().unwrap().members[0].arch.classes = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_seeds() {
        let mut a = ExperimentConfig::new(LabelMode::Vanilla, arch());
        let h = a.hash().unwrap();
        a.seeds = vec![4, 5];
        assert_eq!(a.hash().unwrap(), h);
        a.optimizer.lr = 0.1;
        assert_ne!(a.hash().unwrap(), h);
    }

    #[test]
    fn schedules() {
        assert_eq!(ScheduleConfig::scaled(60), ScheduleConfig::standard());
        assert_eq!(ScheduleConfig::scaled(30).milestones, vec![18, 23, 28]);
        assert_eq!(ScheduleConfig::long().milestones, vec![35, 50, 65, 80]);
    }

    #[test]
    fn ogr_cadence_scales() {
        let mut c = ExperimentConfig::new(LabelMode::Ogr { gap: 10 }, arch());
        assert_eq!(c.ogr_cadence(), Some(10));
        c.schedule = ScheduleConfig::scaled(30);
        assert_eq!(c.ogr_cadence(), Some(5));
        c.schedule = ScheduleConfig::scaled(2);
        assert_eq!(c.ogr_cadence(), Some(1));
    }
}
