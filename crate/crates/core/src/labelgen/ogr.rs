//! Overfitting-to-generalization ratio per class, used as loss weights.

use serde::{Deserialize, Serialize};

use crate::error::{LdlError, Result};

pub const DEFAULT_OGR_GAP: usize = 10;
pub const OGR_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgrWeights {
    pub raw: Vec<f64>,
    /// `raw` rescaled to mean one; all ones when every raw value is zero.
    pub normalized: Vec<f64>,
}

/// OGR_k = ((Lval_{N+n} − Ltrain_{N+n}) − (Lval_N − Ltrain_N))² / max(ε, |Lval_{N+n} − Lval_N|)
///
/// `train_losses[e][k]` is the mean loss of class k over the train split at epoch e.
pub fn ogr(
    train_losses: &[Vec<f64>],
    val_losses: &[Vec<f64>],
    epoch: usize,
    gap: usize,
    eps: f64,
) -> Result<OgrWeights> {
    let later = epoch + gap;
    if later >= train_losses.len() || later >= val_losses.len() {
        return Err(LdlError::State(format!(
            "loss history covers {} train / {} val epochs, need epoch {later}",
            train_losses.len(),
            val_losses.len()
        )));
    }
    let k = train_losses[epoch].len();
    for row in [
        &train_losses[epoch],
        &train_losses[later],
        &val_losses[epoch],
        &val_losses[later],
    ] {
        if row.len() != k {
            return Err(LdlError::dim("per-class loss history", k, row.len()));
        }
    }
    let raw: Vec<f64> = (0..k)
        .map(|c| {
            let gap_then = val_losses[epoch][c] - train_losses[epoch][c];
            let gap_now = val_losses[later][c] - train_losses[later][c];
            let denom = (val_losses[later][c] - val_losses[epoch][c]).abs().max(eps);
            (gap_now - gap_then).powi(2) / denom
        })
        .collect();
    Ok(OgrWeights {
        normalized: normalize_mean_one(&raw),
        raw,
    })
}

pub(crate) fn normalize_mean_one(raw: &[f64]) -> Vec<f64> {
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|v| v / mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let train = vec![vec![0.5], vec![0.3]];
        let val = vec![vec![0.9], vec![0.8]];
        let w = ogr(&train, &val, 0, 1, OGR_EPS).unwrap();
        assert!((w.raw[0] - 0.1).abs() < 1e-12, "{:?}", w.raw);
    }

    #[test]
    fn unchanged_gap_is_zero() {
        let train = vec![vec![0.5, 0.25], vec![0.25, 0.125]];
        let val = vec![vec![1.0, 0.75], vec![0.75, 0.625]];
        let w = ogr(&train, &val, 0, 1, OGR_EPS).unwrap();
        assert_eq!(w.raw, vec![0.0, 0.0]);
        assert_eq!(w.normalized, vec![1.0, 1.0]);
    }

    #[test]
    fn equal_ogr_normalizes_to_one() {
        assert_eq!(normalize_mean_one(&[0.3, 0.3, 0.3]), vec![1.0, 1.0, 1.0]);
        let n = normalize_mean_one(&[1.0, 3.0]);
        assert_eq!(n, vec![0.5, 1.5]);
    }

    #[test]
    fn missing_history_is_state_error() {
        let h = vec![vec![0.1]; 5];
        assert!(matches!(ogr(&h, &h, 0, 10, OGR_EPS), Err(LdlError::State(_))));
    }
}
