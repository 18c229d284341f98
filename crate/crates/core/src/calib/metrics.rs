use serde::{Deserialize, Serialize};

use crate::error::{LdlError, Result};
use crate::labelgen::argmax;
use crate::nn::{clamped_ln, softmax_stable, Matrix, ROW_SUM_TOL};

/// Predicted distributions paired with ground-truth classes.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    probs: Matrix<f64>,
    labels: Vec<usize>,
}

impl PredictionSet {
    pub fn new(probs: Matrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != probs.rows {
            return Err(LdlError::dim(
                "labels vs probability rows",
                probs.rows,
                labels.len(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= probs.cols) {
            return Err(LdlError::Index {
                index: bad,
                bound: probs.cols,
            });
        }
        for (i, row) in probs.iter_rows().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(LdlError::Contract(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(LdlError::Contract(format!("row {i} sums to {sum}")));
            }
        }
        Ok(PredictionSet { probs, labels })
    }

    /// Softmax of `logits / temperature`.
    pub fn from_logits(logits: &Matrix<f64>, labels: Vec<usize>, temperature: f64) -> Result<Self> {
        if temperature.is_nan() || temperature <= 0.0 {
            return Err(LdlError::Domain(format!("temperature {temperature} must be > 0")));
        }
        let scaled = Matrix::new(
            logits.rows,
            logits.cols,
            logits.data.iter().map(|v| v / temperature).collect(),
        );
        PredictionSet::new(softmax_stable(&scaled)?, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.probs.cols
    }

    pub fn probs(&self) -> &Matrix<f64> {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.probs.iter_rows().map(argmax).collect()
    }

    /// Max-probability per row.
    pub fn confidences(&self) -> Vec<f64> {
        self.probs
            .iter_rows()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    fn nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(LdlError::Domain("empty prediction set".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub count: usize,
    /// Fraction correct, or error rate for uncertainty bins.
    pub accuracy: f64,
    /// Mean of the binned score (confidence or uncertainty).
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBins {
    pub bins: Vec<Bin>,
    pub total: usize,
}

impl ReliabilityBins {
    pub fn m(&self) -> usize {
        self.bins.len()
    }

    /// Edges `((m−1)/M, m/M]` of the 1-based bin `m`.
    pub fn edges(&self, m: usize) -> (f64, f64) {
        let big_m = self.m() as f64;
        ((m - 1) as f64 / big_m, m as f64 / big_m)
    }
}

/// 1-based bin index with `(m−1)/M < score ≤ m/M`; a score of 0 lands in bin 1.
pub fn bin_index(score: f64, m: usize) -> usize {
    let big_m = m as f64;
    let mut b = ((score * big_m).ceil() as usize).clamp(1, m);
    while b > 1 && score <= (b - 1) as f64 / big_m {
        b -= 1;
    }
    while b < m && score > b as f64 / big_m {
        b += 1;
    }
    b
}

fn histogram(scores: &[f64], hits: impl Iterator<Item = bool>, m: usize) -> Result<ReliabilityBins> {
    if m == 0 {
        return Err(LdlError::Domain("bin count M must be ≥ 1".into()));
    }
    if scores.is_empty() {
        return Err(LdlError::Domain("empty prediction set".into()));
    }
    let mut hit_sum = vec![0.0; m];
    let mut score_sum = vec![0.0; m];
    let mut count = vec![0usize; m];
    for (&s, hit) in scores.iter().zip(hits) {
        let b = bin_index(s, m) - 1;
        count[b] += 1;
        score_sum[b] += s;
        if hit {
            hit_sum[b] += 1.0;
        }
    }
    let bins = (0..m)
        .map(|b| match count[b] {
            0 => Bin::default(),
            c => Bin {
                count: c,
                accuracy: hit_sum[b] / c as f64,
                mean_confidence: score_sum[b] / c as f64,
            },
        })
        .collect();
    Ok(ReliabilityBins {
        bins,
        total: scores.len(),
    })
}

pub fn reliability_bins(preds: &PredictionSet, m: usize) -> Result<ReliabilityBins> {
    let correct = preds
        .predictions()
        .into_iter()
        .zip(preds.labels())
        .map(|(p, &c)| p == c);
    histogram(&preds.confidences(), correct, m)
}

/// Σ_m (|H_m|/N)·|acc_m − conf_m|.
pub fn ece(bins: &ReliabilityBins) -> f64 {
    if bins.total == 0 {
        return 0.0;
    }
    let n = bins.total as f64;
    bins.bins
        .iter()
        .map(|b| b.count as f64 / n * (b.accuracy - b.mean_confidence).abs())
        .sum()
}

pub fn accuracy(preds: &PredictionSet) -> Result<f64> {
    preds.nonempty()?;
    let hits = preds
        .predictions()
        .into_iter()
        .zip(preds.labels())
        .filter(|(p, c)| p == *c)
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// −(1/N) Σ ln p_i[c_i] with p clamped at 1e-12.
pub fn nll(preds: &PredictionSet) -> Result<f64> {
    preds.nonempty()?;
    let total: f64 = preds
        .probs
        .iter_rows()
        .zip(&preds.labels)
        .map(|(row, &c)| -clamped_ln(row[c]))
        .sum();
    Ok(total / preds.len() as f64)
}

/// (1/N) Σ_i Σ_k (p_ik − 1[k = c_i])², in [0, 2].
pub fn brier(preds: &PredictionSet) -> Result<f64> {
    preds.nonempty()?;
    let total: f64 = preds
        .probs
        .iter_rows()
        .zip(&preds.labels)
        .map(|(row, &c)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| (p - if k == c { 1.0 } else { 0.0 }).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// Entropy of each row divided by ln K.
pub fn normalized_entropy(preds: &PredictionSet) -> Result<Vec<f64>> {
    let k = preds.classes();
    if k < 2 {
        return Err(LdlError::Domain("normalized entropy needs K ≥ 2".into()));
    }
    let log_k = (k as f64).ln();
    Ok(preds
        .probs
        .iter_rows()
        .map(|row| {
            let h: f64 = row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            (h / log_k).clamp(0.0, 1.0)
        })
        .collect())
}

/// Bins of normalized entropy; `accuracy` holds the error rate.
pub fn uncertainty_bins(preds: &PredictionSet, m: usize) -> Result<ReliabilityBins> {
    let u = normalized_entropy(preds)?;
    let wrong = preds
        .predictions()
        .into_iter()
        .zip(preds.labels())
        .map(|(p, &c)| p != c);
    histogram(&u, wrong, m)
}

/// Σ_m (|B_m|/N)·|err_m − uncertainty_m| over normalized-entropy bins.
pub fn uce(preds: &PredictionSet, m: usize) -> Result<f64> {
    Ok(ece(&uncertainty_bins(preds, m)?))
}
