use serde::{Deserialize, Serialize};

use crate::error::{LdlError, Result};
use crate::nn::{softmax_row, Matrix, ROW_SUM_TOL};

/// A probability vector over K classes: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelDist(Vec<f64>);

impl LabelDist {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LdlError::Domain("label distribution over zero classes".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(LdlError::Contract(format!(
                "label entries must be finite and nonnegative: {values:?}"
            )));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(LdlError::Contract(format!("label sums to {s}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Stack distributions into an N×K matrix.
pub fn stack(rows: &[LabelDist]) -> Result<Matrix<f64>> {
    let k = rows.first().map(LabelDist::classes).unwrap_or(0);
    let mut data = Vec::with_capacity(rows.len() * k);
    for (i, r) in rows.iter().enumerate() {
        if r.classes() != k {
            return Err(LdlError::dim(format!("label row {i}"), k, r.classes()));
        }
        data.extend_from_slice(r.values());
    }
    Ok(Matrix::new(rows.len(), k, data))
}

/// Rows of an N×K matrix as distributions (validating each).
pub fn unstack(m: &Matrix<f64>) -> Result<Vec<LabelDist>> {
    m.iter_rows().map(|r| LabelDist::new(r.to_vec())).collect()
}

pub fn one_hot(class: usize, classes: usize) -> Result<LabelDist> {
    if class >= classes {
        return Err(LdlError::Index {
            index: class,
            bound: classes,
        });
    }
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    Ok(LabelDist(v))
}

/// Hard-label matrix for a list of class indices.
pub fn one_hot_matrix(classes_of: &[usize], classes: usize) -> Result<Matrix<f64>> {
    let mut m = Matrix::zeros(classes_of.len(), classes);
    for (i, &c) in classes_of.iter().enumerate() {
        if c >= classes {
            return Err(LdlError::Index {
                index: c,
                bound: classes,
            });
        }
        m.row_mut(i)[c] = 1.0;
    }
    Ok(m)
}

/// Label smoothing: the hard target keeps 1 − α, every other class gets α/(K − 1).
pub fn smooth(y: &LabelDist, alpha: f64) -> Result<LabelDist> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(LdlError::Domain(format!("smoothing α = {alpha} outside [0, 1)")));
    }
    if alpha == 0.0 {
        return Ok(y.clone());
    }
    let k = y.classes();
    if k == 1 {
        return Err(LdlError::Domain(
            "label smoothing with α > 0 needs at least two classes".into(),
        ));
    }
    let target = y.argmax();
    let off = alpha / (k - 1) as f64;
    let mut v = vec![off; k];
    v[target] = 1.0 - alpha;
    Ok(LabelDist(v))
}

/// Smooth every row of a hard-label (or blended) matrix.
///
/// Applied to blended labels this is (1 − α')·ŷ + off-mass spread, computed
/// as smooth(one_hot) mixed with the blend weights, so for hard rows it
/// matches [`smooth`] exactly.
pub fn smooth_matrix(y: &Matrix<f64>, alpha: f64) -> Result<Matrix<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(LdlError::Domain(format!("smoothing α = {alpha} outside [0, 1)")));
    }
    if alpha == 0.0 {
        return Ok(y.clone());
    }
    let k = y.cols;
    if k == 1 {
        return Err(LdlError::Domain(
            "label smoothing with α > 0 needs at least two classes".into(),
        ));
    }
    let off = alpha / (k - 1) as f64;
    let on = 1.0 - alpha;
    let mut out = Matrix::zeros(y.rows, k);
    for i in 0..y.rows {
        let src = y.row(i);
        let dst = out.row_mut(i);
        // Each unit of mass on class j becomes `on` at j and `off` elsewhere.
        for (j, &w) in src.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (c, d) in dst.iter_mut().enumerate() {
                *d += w * if c == j { on } else { off };
            }
        }
    }
    Ok(out)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(LdlError::Domain(format!("temperature τ = {tau} must be > 0")));
    }
    Ok(())
}

/// Temperature-softened softmax of one logit vector.
pub fn soften(logits: &[f64], tau: f64) -> Result<LabelDist> {
    check_tau(tau)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(LdlError::Numeric("non-finite logit".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|&v| v / tau).collect();
    Ok(LabelDist(softmax_row(&scaled)))
}

/// Row-wise [`soften`].
pub fn soften_matrix(logits: &Matrix<f64>, tau: f64) -> Result<Matrix<f64>> {
    check_tau(tau)?;
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(LdlError::Numeric("non-finite logit".into()));
    }
    let mut data = Vec::with_capacity(logits.data.len());
    for row in logits.iter_rows() {
        let scaled: Vec<f64> = row.iter().map(|&v| v / tau).collect();
        data.extend(softmax_row(&scaled));
    }
    Ok(Matrix::new(logits.rows, logits.cols, data))
}
