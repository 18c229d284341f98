use crate::error::{LdlError, Result};
use crate::nn::{Matrix, LOG_CLAMP};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 10.0;
pub const GOLDEN_ITERS: usize = 200;

/// Mean NLL of softmax(logits / T), computed through log-sum-exp.
pub fn nll_at_temperature(logits: &Matrix<f64>, labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    for (row, &c) in logits.iter_rows().zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) / t;
        let lse = max + row.iter().map(|&z| (z / t - max).exp()).sum::<f64>().ln();
        let log_p = (row[c] / t - lse).max(LOG_CLAMP.ln());
        total -= log_p;
    }
    total / labels.len() as f64
}

/// Temperature minimizing validation NLL: golden-section search over
/// log T ∈ [ln 0.05, ln 10]. Falls back to T = 1 when the search result
/// would not improve on NLL(1) by more than 1e-9.
pub fn fit_temperature(logits: &Matrix<f64>, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(LdlError::Domain(
            "temperature fit needs a nonempty validation set".into(),
        ));
    }
    if labels.len() != logits.rows {
        return Err(LdlError::dim("labels vs logit rows", logits.rows, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= logits.cols) {
        return Err(LdlError::Index {
            index: bad,
            bound: logits.cols,
        });
    }
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(LdlError::Numeric("non-finite validation logit".into()));
    }
    let f = |log_t: f64| nll_at_temperature(logits, labels, log_t.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (T_MIN.ln(), T_MAX.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let t = ((a + b) / 2.0).exp();
    let base = nll_at_temperature(logits, labels, 1.0);
    Ok(if nll_at_temperature(logits, labels, t) <= base + 1e-9 {
        t
    } else {
        1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    /// Logits whose softmax is the true label distribution: labels are drawn from it.
    fn calibrated(n: usize, k: usize, seed: u64) -> (Matrix<f64>, Vec<usize>) {
        let mut r = Prng::new(seed);
        let mut data = Vec::with_capacity(n * k);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..k).map(|_| 2.0 * r.normal()).collect();
            let p = crate::nn::softmax_row(&z);
            let u = r.uniform();
            let mut acc = 0.0;
            let mut c = k - 1;
            for (j, pj) in p.iter().enumerate() {
                acc += pj;
                if u < acc {
                    c = j;
                    break;
                }
            }
            labels.push(c);
            data.extend(z);
        }
        (Matrix::new(n, k, data), labels)
    }

    #[test]
    fn calibrated_logits_fit_near_one() {
        let (z, y) = calibrated(20_000, 10, 3);
        let t = fit_temperature(&z, &y).unwrap();
        assert!((t - 1.0).abs() < 0.05, "T = {t}");
        let gain = nll_at_temperature(&z, &y, 1.0) - nll_at_temperature(&z, &y, t);
        assert!((0.0..1e-4).contains(&gain), "{gain}");
    }

    #[test]
    fn scaled_logits_recover_scale() {
        let (z, y) = calibrated(20_000, 10, 4);
        let scaled = Matrix::new(z.rows, z.cols, z.data.iter().map(|v| 4.0 * v).collect());
        let t = fit_temperature(&scaled, &y).unwrap();
        assert!((t - 4.0).abs() < 0.2, "T = {t}");
    }

    #[test]
    fn never_worse_than_identity() {
        let mut r = Prng::new(9);
        for _ in 0..20 {
            let z = Matrix::new(30, 4, (0..120).map(|_| 5.0 * r.normal()).collect());
            let y: Vec<usize> = (0..30).map(|_| r.below(4)).collect();
            let t = fit_temperature(&z, &y).unwrap();
            assert!(nll_at_temperature(&z, &y, t) <= nll_at_temperature(&z, &y, 1.0) + 1e-9);
        }
    }

    #[test]
    fn empty_set_is_error() {
        assert!(fit_temperature(&Matrix::new(0, 3, vec![]), &[]).is_err());
    }
}
