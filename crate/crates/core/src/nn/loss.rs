use super::tensor::Matrix;
use crate::error::{LdlError, Result};

/// Lower bound applied to probabilities before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Tolerance on row sums of probability and label rows.
pub const ROW_SUM_TOL: f64 = 1e-6;

/// Softmax of one row, shifted by the row maximum.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Row-wise softmax. Rejects non-finite logits.
pub fn softmax_stable(logits: &Matrix<f64>) -> Result<Matrix<f64>> {
    if let Some(pos) = logits.data.iter().position(|v| !v.is_finite()) {
        return Err(LdlError::Numeric(format!(
            "non-finite logit at row {}, column {}",
            pos / logits.cols.max(1),
            pos % logits.cols.max(1)
        )));
    }
    let mut data = Vec::with_capacity(logits.data.len());
    for row in logits.iter_rows() {
        data.extend(softmax_row(row));
    }
    Ok(Matrix::new(logits.rows, logits.cols, data))
}

#[inline]
pub fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// −Σ_k z_k log p_k for one sample.
#[inline]
pub fn cross_entropy_row(probs: &[f64], target: &[f64]) -> f64 {
    -probs
        .iter()
        .zip(target)
        .map(|(&p, &z)| if z == 0.0 { 0.0 } else { z * clamped_ln(p) })
        .sum::<f64>()
}

pub(crate) fn check_rows(m: &Matrix<f64>, what: &str) -> Result<()> {
    for (i, row) in m.iter_rows().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(LdlError::Contract(format!(
                "{what} row {i} is not a distribution (sum {s})"
            )));
        }
    }
    Ok(())
}

fn check_same_shape(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(LdlError::dim(
            "cross-entropy operands",
            format!("{}×{}", a.rows, a.cols),
            format!("{}×{}", b.rows, b.cols),
        ));
    }
    Ok(())
}

/// Mean soft-target cross-entropy −(1/N) Σ_i Σ_k z_ik log p_ik.
pub fn soft_ce(probs: &Matrix<f64>, targets: &Matrix<f64>) -> Result<f64> {
    check_same_shape(probs, targets)?;
    check_rows(probs, "probability")?;
    check_rows(targets, "target")?;
    Ok(mean_ce_unchecked(probs, targets))
}

/// Same as [`soft_ce`] without row-sum checks; targets may carry any mass.
pub(crate) fn mean_ce_unchecked(probs: &Matrix<f64>, targets: &Matrix<f64>) -> f64 {
    let n = probs.rows.max(1) as f64;
    probs
        .iter_rows()
        .zip(targets.iter_rows())
        .map(|(p, z)| cross_entropy_row(p, z))
        .sum::<f64>()
        / n
}

/// ∂/∂logits of the mean cross-entropy against `targets` whose rows may
/// have total mass s_i ≠ 1: (s_i·p_i − z_i)/N, with s_i given explicitly.
pub(crate) fn ce_logit_grad(probs: &Matrix<f64>, targets: &Matrix<f64>, mass: f64) -> Matrix<f64> {
    let n = probs.rows.max(1) as f64;
    let data = probs
        .data
        .iter()
        .zip(&targets.data)
        .map(|(&p, &z)| (mass * p - z) / n)
        .collect();
    Matrix::new(probs.rows, probs.cols, data)
}
