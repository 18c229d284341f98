//! Calibration metrics: reliability bins, ECE, UCE, NLL, Brier, temperature
//! scaling and per-class profiles.

mod metrics;
mod profiles;
mod temperature;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use metrics::{
    accuracy, bin_index, brier, ece, nll, normalized_entropy, reliability_bins, uce, uncertainty_bins, Bin,
    PredictionSet, ReliabilityBins,
};
pub use profiles::{class_profiles, top_k_profile, ClassProfile};
pub use temperature::{fit_temperature, nll_at_temperature, GOLDEN_ITERS, T_MAX, T_MIN};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibReport {
    pub accuracy: f64,
    pub ece: f64,
    pub uce: f64,
    pub nll: f64,
    pub brier: f64,
    /// Temperature fitted on held-out logits, when one was fitted.
    pub temperature: Option<f64>,
}

impl CalibReport {
    pub fn evaluate(preds: &PredictionSet, bins: usize, temperature: Option<f64>) -> Result<Self> {
        Ok(CalibReport {
            accuracy: accuracy(preds)?,
            ece: ece(&reliability_bins(preds, bins)?),
            uce: uce(preds, bins)?,
            nll: nll(preds)?,
            brier: brier(preds)?,
            temperature,
        })
    }
}

pub const RELIABILITY_HEADER: &str = "bin_lo,bin_hi,count,accuracy,mean_confidence,gap";

/// One row per bin; `gap` is mean confidence minus accuracy, so positive
/// values mean over-confidence.
pub fn reliability_csv(bins: &ReliabilityBins) -> String {
    let mut out = String::from(RELIABILITY_HEADER);
    out.push('\n');
    for (i, b) in bins.bins.iter().enumerate() {
        let (lo, hi) = bins.edges(i + 1);
        let _ = writeln!(
            out,
            "{lo:.6},{hi:.6},{},{:.6},{:.6},{:.6}",
            b.count,
            b.accuracy,
            b.mean_confidence,
            b.mean_confidence - b.accuracy
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;
    use crate::rng::Prng;
    use proptest::prelude::*;

    /// Per-sample ECE with explicit interval tests.
    fn brute_ece(conf: &[f64], correct: &[bool], m: usize) -> f64 {
        let n = conf.len() as f64;
        let mut total = 0.0;
        for b in 1..=m {
            let lo = (b - 1) as f64 / m as f64;
            let hi = b as f64 / m as f64;
            let members: Vec<usize> = (0..conf.len())
                .filter(|&i| (conf[i] > lo && conf[i] <= hi) || (b == 1 && conf[i] == 0.0))
                .collect();
            if members.is_empty() {
                continue;
            }
            let c = members.len() as f64;
            let acc = members.iter().filter(|&&i| correct[i]).count() as f64 / c;
            let mc = members.iter().map(|&i| conf[i]).sum::<f64>() / c;
            total += c / n * (acc - mc).abs();
        }
        total
    }

    fn random_set(seed: u64, n: usize, k: usize) -> PredictionSet {
        let mut r = Prng::new(seed);
        let scale = 4.0 * r.uniform();
        let logits = Matrix::new(n, k, (0..n * k).map(|_| scale * r.normal()).collect());
        let labels = (0..n).map(|_| r.below(k)).collect();
        PredictionSet::from_logits(&logits, labels, 1.0).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn ece_matches_brute_force(seed in any::<u64>(), n in 1usize..200, k in 2usize..12, m in 1usize..20) {
            let p = random_set(seed, n, k);
            let correct: Vec<bool> = p.predictions().iter().zip(p.labels()).map(|(a, b)| a == b).collect();
            let fast = ece(&reliability_bins(&p, m).unwrap());
            prop_assert!((fast - brute_ece(&p.confidences(), &correct, m)).abs() < 1e-12);
        }

        #[test]
        fn metric_ranges_and_order_invariance(seed in any::<u64>(), n in 1usize..100, k in 2usize..8) {
            let p = random_set(seed, n, k);
            let r = CalibReport::evaluate(&p, 10, None).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.ece));
            prop_assert!((0.0..=1.0).contains(&r.uce));
            prop_assert!((0.0..=2.0).contains(&r.brier));
            prop_assert!(r.nll >= 0.0);
            let perm = Prng::new(seed ^ 1).permutation(n);
            let probs = Matrix::new(n, k, perm.iter().flat_map(|&i| p.probs().row(i).to_vec()).collect());
            let labels = perm.iter().map(|&i| p.labels()[i]).collect();
            let shuffled = CalibReport::evaluate(&PredictionSet::new(probs, labels).unwrap(), 10, None).unwrap();
            prop_assert!((shuffled.ece - r.ece).abs() < 1e-12);
            prop_assert!((shuffled.uce - r.uce).abs() < 1e-12);
            prop_assert!((shuffled.nll - r.nll).abs() < 1e-12);
            prop_assert!((shuffled.brier - r.brier).abs() < 1e-12);
        }

        #[test]
        fn temperature_keeps_argmax(seed in any::<u64>(), t in 0.05f64..10.0) {
            let mut r = Prng::new(seed);
            let logits = Matrix::new(20, 5, (0..100).map(|_| 3.0 * r.normal()).collect());
            let labels: Vec<usize> = (0..20).map(|_| r.below(5)).collect();
            let a = PredictionSet::from_logits(&logits, labels.clone(), 1.0).unwrap();
            let b = PredictionSet::from_logits(&logits, labels, t).unwrap();
            prop_assert_eq!(a.predictions(), b.predictions());
        }
    }

    #[test]
    fn csv_layout() {
        let p = PredictionSet::new(Matrix::new(2, 2, vec![0.95, 0.05, 0.25, 0.75]), vec![0, 0]).unwrap();
        let csv = reliability_csv(&reliability_bins(&p, 10).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RELIABILITY_HEADER);
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[8], "0.700000,0.800000,1,0.000000,0.750000,0.750000");
        assert_eq!(lines[10], "0.900000,1.000000,1,1.000000,0.950000,-0.050000");
    }

    #[test]
    fn report_json_keys() {
        let p = PredictionSet::new(Matrix::new(1, 2, vec![0.5, 0.5]), vec![0]).unwrap();
        let v = serde_json::to_value(CalibReport::evaluate(&p, 10, Some(1.5)).unwrap()).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["accuracy", "brier", "ece", "nll", "temperature", "uce"]);
    }
}
