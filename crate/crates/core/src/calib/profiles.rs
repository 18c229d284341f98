use serde::{Deserialize, Serialize};

use super::metrics::PredictionSet;
use crate::error::{LdlError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub class: usize,
    /// Samples whose true label is this class.
    pub support: usize,
    /// Samples predicted as this class.
    pub predicted: usize,
    /// 2PR/(P+R), 0 when P+R = 0.
    pub f1: f64,
    /// Mean probability assigned to this class on its own samples; `None`
    /// when the class has no samples.
    pub mean_confidence: Option<f64>,
}

pub fn class_profiles(preds: &PredictionSet) -> Vec<ClassProfile> {
    let k = preds.classes();
    let mut tp = vec![0usize; k];
    let mut support = vec![0usize; k];
    let mut predicted = vec![0usize; k];
    let mut conf = vec![0.0f64; k];
    for ((row, &c), p) in preds
        .probs()
        .iter_rows()
        .zip(preds.labels())
        .zip(preds.predictions())
    {
        support[c] += 1;
        predicted[p] += 1;
        conf[c] += row[c];
        if p == c {
            tp[c] += 1;
        }
    }
    (0..k)
        .map(|c| {
            let precision = if predicted[c] > 0 {
                tp[c] as f64 / predicted[c] as f64
            } else {
                0.0
            };
            let recall = if support[c] > 0 {
                tp[c] as f64 / support[c] as f64
            } else {
                0.0
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassProfile {
                class: c,
                support: support[c],
                predicted: predicted[c],
                f1,
                mean_confidence: (support[c] > 0).then(|| conf[c] / support[c] as f64),
            }
        })
        .collect()
}

/// The `k` classes with highest mean probability over samples of `class`,
/// descending, ties broken by lower class index.
pub fn top_k_profile(preds: &PredictionSet, class: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let classes = preds.classes();
    if k > classes {
        return Err(LdlError::Domain(format!(
            "top-{k} requested with only {classes} classes"
        )));
    }
    if class >= classes {
        return Err(LdlError::Index {
            index: class,
            bound: classes,
        });
    }
    let mut sums = vec![0.0f64; classes];
    let mut n = 0usize;
    for (row, _) in preds
        .probs()
        .iter_rows()
        .zip(preds.labels())
        .filter(|(_, &c)| c == class)
    {
        n += 1;
        sums.iter_mut().zip(row).for_each(|(s, p)| *s += p);
    }
    if n == 0 {
        return Err(LdlError::Domain(format!("class {class} has no samples")));
    }
    let mut ranked: Vec<(usize, f64)> = sums.into_iter().map(|s| s / n as f64).enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn from_preds(pred: &[usize], truth: &[usize], k: usize) -> PredictionSet {
        let mut data = vec![0.0; pred.len() * k];
        for (i, &p) in pred.iter().enumerate() {
            data[i * k + p] = 1.0;
        }
        PredictionSet::new(Matrix::new(pred.len(), k, data), truth.to_vec()).unwrap()
    }

    #[test]
    fn perfect_classifier() {
        let p = from_preds(&[0, 1, 2, 1], &[0, 1, 2, 1], 3);
        assert!(class_profiles(&p).iter().all(|c| c.f1 == 1.0));
    }

    #[test]
    fn hand_confusion() {
        // truth 0: predicted 0,0,1 ; truth 1: predicted 1,2 ; truth 2: predicted 2
        let p = from_preds(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 2], 4);
        let prof = class_profiles(&p);
        // class 0: P = 2/2, R = 2/3 → F1 = 0.8
        assert!((prof[0].f1 - 0.8).abs() < 1e-12);
        // class 1: P = 1/2, R = 1/2 → 0.5
        assert!((prof[1].f1 - 0.5).abs() < 1e-12);
        // class 2: P = 1/2, R = 1 → 2/3
        assert!((prof[2].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(prof[3].f1, 0.0);
        assert_eq!(prof[3].mean_confidence, None);
        assert_eq!(prof[0].mean_confidence, Some(2.0 / 3.0));
    }

    #[test]
    fn top_k_order_and_ties() {
        let probs = Matrix::new(2, 4, vec![0.4, 0.2, 0.2, 0.2, 0.6, 0.2, 0.0, 0.2]);
        let p = PredictionSet::new(probs, vec![0, 0]).unwrap();
        let top = top_k_profile(&p, 0, 3).unwrap();
        assert_eq!(top.iter().map(|t| t.0).collect::<Vec<_>>(), vec![0, 1, 3]);
        assert!((top[0].1 - 0.5).abs() < 1e-12);
        assert!(matches!(top_k_profile(&p, 0, 5), Err(LdlError::Domain(_))));
        assert!(matches!(top_k_profile(&p, 1, 2), Err(LdlError::Domain(_))));
    }
}
