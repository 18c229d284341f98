use serde::{Deserialize, Serialize};

use crate::calib::CalibReport;
use crate::error::{LdlError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training objective over the epoch's updates.
    pub train_loss: f64,
    /// Hard-label cross-entropy on the validation split.
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Mean hard-label cross-entropy of each class at the end of one epoch,
/// evaluated without dropout on the clean train and validation splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLosses {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgrUpdate {
    /// Weights take effect from this epoch on.
    pub from_epoch: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub mode: String,
    pub augment: String,
    pub seed: u64,
    pub dataset_hash: String,
    pub bank_hash: Option<String>,
    /// Hash of the cached offline labels, for the offline modes.
    pub label_hash: Option<String>,
    pub epochs: Vec<EpochStats>,
    pub class_losses: Vec<ClassLosses>,
    pub ogr_updates: Vec<OgrUpdate>,
    /// Reliability bin count used for ECE and UCE.
    pub bins: usize,
    /// Test metrics of the raw model; `temperature` holds T fitted on validation.
    pub test: CalibReport,
    /// Test metrics after dividing logits by the fitted T.
    pub test_scaled: CalibReport,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    /// Copy with the wall-clock field zeroed, for determinism comparisons.
    pub fn without_wall_clock(&self) -> RunRecord {
        RunRecord {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self, expected_epochs: usize) -> Result<()> {
        if self.epochs.len() != expected_epochs || self.class_losses.len() != expected_epochs {
            return Err(LdlError::State(format!(
                "record holds {} epochs and {} class-loss rows, expected {expected_epochs}",
                self.epochs.len(),
                self.class_losses.len()
            )));
        }
        let finite = self
            .epochs
            .iter()
            .flat_map(|e| [e.lr, e.train_loss, e.val_loss, e.val_accuracy])
            .chain(
                self.class_losses
                    .iter()
                    .flat_map(|c| c.train.iter().chain(&c.val).copied()),
            )
            .chain([
                self.test.ece,
                self.test.nll,
                self.test.brier,
                self.test.uce,
                self.test.accuracy,
            ])
            .all(f64::is_finite);
        if !finite {
            return Err(LdlError::Numeric("run record holds a non-finite metric".into()));
        }
        Ok(())
    }

    /// Mean of the `k` largest minus mean of the `k` smallest final-epoch
    /// per-class train losses.
    pub fn final_train_loss_gap(&self, k: usize) -> Option<f64> {
        top_bottom_gap(&self.class_losses.last()?.train, k)
    }
}

/// Mean of the `k` largest values minus mean of the `k` smallest.
pub fn top_bottom_gap(values: &[f64], k: usize) -> Option<f64> {
    if k == 0 || values.len() < k {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let low: f64 = v[..k].iter().sum::<f64>() / k as f64;
    let high: f64 = v[v.len() - k..].iter().sum::<f64>() / k as f64;
    Some(high - low)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_of_sorted_extremes() {
        let v = [0.1, 0.9, 0.3, 0.5, 0.2, 0.8];
        let g = top_bottom_gap(&v, 2).unwrap();
        assert!((g - (0.85 - 0.15)).abs() < 1e-12);
        assert_eq!(top_bottom_gap(&v, 7), None);
    }
}
