use serde::{Deserialize, Serialize};

use super::dist::soften_matrix;
use crate::error::{LdlError, Result};
use crate::nn::{ce_logit_grad, mean_ce_unchecked, softmax_stable, Matrix, Network, Objective, Tensor4};

/// Rows evaluated per teacher forward pass.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankMode {
    /// First teacher only.
    Single,
    /// Arithmetic mean of every teacher's softened output.
    Ensemble,
}

/// Trained teachers, evaluated in eval mode, sharing input shape and class count.
#[derive(Debug, Clone)]
pub struct TeacherBank {
    teachers: Vec<Network<f32>>,
    tau: f64,
}

impl TeacherBank {
    pub fn new(teachers: Vec<Network<f32>>, tau: f64) -> Result<Self> {
        let first = teachers
            .first()
            .ok_or_else(|| LdlError::Config("teacher bank is empty".into()))?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(LdlError::Domain(format!(
                "bank temperature τ = {tau} must be > 0"
            )));
        }
        for (i, t) in teachers.iter().enumerate().skip(1) {
            if t.arch().input != first.arch().input || t.classes() != first.classes() {
                return Err(LdlError::Config(format!(
                    "teacher {i} has input {:?}/{} classes, teacher 0 has {:?}/{}",
                    t.arch().input,
                    t.classes(),
                    first.arch().input,
                    first.classes()
                )));
            }
        }
        Ok(Self { teachers, tau })
    }

    pub fn len(&self) -> usize {
        self.teachers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.teachers.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn classes(&self) -> usize {
        self.teachers[0].classes()
    }

    pub fn teachers(&self) -> &[Network<f32>] {
        &self.teachers
    }

    /// A bank holding only the first `n` teachers.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::new(self.teachers.iter().take(n).cloned().collect(), self.tau)
    }

    fn check_input(&self, x: &Tensor4<f32>) -> Result<()> {
        let [_, c, h, w] = x.shape();
        let want = self.teachers[0].arch().input;
        if [c, h, w] != want {
            return Err(LdlError::dim(
                "teacher input",
                format!("{want:?}"),
                format!("{:?}", [c, h, w]),
            ));
        }
        Ok(())
    }

    /// Softened eval-mode output of one teacher, at f32 precision.
    pub fn soft_labels(&self, teacher: usize, x: &Tensor4<f32>) -> Result<Matrix<f64>> {
        self.check_input(x)?;
        let net = self.teachers.get(teacher).ok_or(LdlError::Index {
            index: teacher,
            bound: self.teachers.len(),
        })?;
        let n = x.batch();
        let k = net.classes();
        let mut out = Matrix::zeros(n, k);
        let mut start = 0;
        while start < n {
            let end = (start + EVAL_CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let chunk = if start == 0 && end == n {
                x.clone()
            } else {
                x.gather(&idx)
            };
            let logits = net.logits_eval(&chunk)?.to_f64();
            let probs = soften_matrix(&logits, self.tau)?;
            out.data[start * k..end * k].copy_from_slice(&probs.data);
            start = end;
        }
        Ok(round_to_f32(out))
    }

    /// One label matrix per teacher.
    pub fn per_teacher_labels(&self, x: &Tensor4<f32>) -> Result<Vec<Matrix<f64>>> {
        (0..self.teachers.len()).map(|t| self.soft_labels(t, x)).collect()
    }

    /// Single or ensemble-mean soft labels for every sample of `x`.
    pub fn labels(&self, x: &Tensor4<f32>, mode: BankMode) -> Result<Matrix<f64>> {
        match mode {
            BankMode::Single => self.soft_labels(0, x),
            BankMode::Ensemble => {
                let per = self.per_teacher_labels(x)?;
                Ok(round_to_f32(mean_of(&per)))
            }
        }
    }
}

/// Elementwise mean of equally shaped matrices.
pub(crate) fn mean_of(ms: &[Matrix<f64>]) -> Matrix<f64> {
    let mut acc = Matrix::zeros(ms[0].rows, ms[0].cols);
    for m in ms {
        for (a, v) in acc.data.iter_mut().zip(&m.data) {
            *a += v;
        }
    }
    let n = ms.len() as f64;
    acc.data.iter_mut().for_each(|v| *v /= n);
    acc
}

/// Teacher labels are carried at the teacher's own (f32) precision so that
/// cached and freshly computed labels are identical.
pub(crate) fn round_to_f32(mut m: Matrix<f64>) -> Matrix<f64> {
    m.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
    m
}

/// Labels computed once for a whole training split (offline supervision).
pub fn offline_labels(bank: &TeacherBank, data: &Tensor4<f32>, mode: BankMode) -> Result<Matrix<f64>> {
    bank.labels(data, mode)
}

/// Labels for a freshly blended batch (online supervision). The blend's
/// mixed label is not consulted.
pub fn online_label(bank: &TeacherBank, blended: &Tensor4<f32>, mode: BankMode) -> Result<Matrix<f64>> {
    bank.labels(blended, mode)
}

/// Σ_n CE(z_n, p) averaged over the batch, without normalising by the
/// number of teachers.
pub fn mt_loss(student_probs: &Matrix<f64>, teacher_labels: &[Matrix<f64>]) -> Result<f64> {
    check_mt(student_probs, teacher_labels)?;
    Ok(teacher_labels
        .iter()
        .map(|z| mean_ce_unchecked(student_probs, z))
        .sum())
}

fn check_mt(p: &Matrix<f64>, labels: &[Matrix<f64>]) -> Result<()> {
    if labels.is_empty() {
        return Err(LdlError::Config(
            "multi-teacher loss needs at least one teacher".into(),
        ));
    }
    for (n, z) in labels.iter().enumerate() {
        if z.rows != p.rows || z.cols != p.cols {
            return Err(LdlError::dim(
                format!("teacher {n} labels"),
                format!("{}×{}", p.rows, p.cols),
                format!("{}×{}", z.rows, z.cols),
            ));
        }
    }
    Ok(())
}

/// Multi-teacher objective: loss and Σ_n (p − z_n)/N.
pub fn mt_objective(logits: &Matrix<f64>, teacher_labels: &[Matrix<f64>]) -> Result<Objective> {
    let p = softmax_stable(logits)?;
    let loss = mt_loss(&p, teacher_labels)?;
    let mut grad = ce_logit_grad(&p, &teacher_labels[0], 1.0);
    for z in &teacher_labels[1..] {
        let g = ce_logit_grad(&p, z, 1.0);
        for (a, b) in grad.data.iter_mut().zip(&g.data) {
            *a += b;
        }
    }
    Ok(Objective { loss, dlogits: grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{soft_ce, soft_ce_objective, Architecture};
    use crate::rng::Prng;

    fn bank(n: usize, seed: u64) -> TeacherBank {
        let arch = Architecture::mlp([1, 4, 4], &[8], 3, 0.0);
        let mut rng = Prng::new(seed);
        let ts = (0..n).map(|_| Network::init(&arch, &mut rng).unwrap()).collect();
        TeacherBank::new(ts, 1.0).unwrap()
    }

    fn batch(n: usize, seed: u64) -> Tensor4<f32> {
        let mut rng = Prng::new(seed);
        Tensor4::from_vec([n, 1, 4, 4], (0..n * 16).map(|_| rng.normal() as f32).collect()).unwrap()
    }

    #[test]
    fn empty_bank_is_config_error() {
        assert!(matches!(TeacherBank::new(vec![], 1.0), Err(LdlError::Config(_))));
    }

    #[test]
    fn ensemble_of_one_is_single() {
        let b = bank(1, 3);
        let x = batch(5, 1);
        assert_eq!(
            b.labels(&x, BankMode::Ensemble).unwrap(),
            b.labels(&x, BankMode::Single).unwrap()
        );
    }

    #[test]
    fn ensemble_is_the_mean() {
        let ms = vec![
            Matrix::new(1, 2, vec![1.0, 0.0]),
            Matrix::new(1, 2, vec![0.0, 1.0]),
        ];
        assert_eq!(mean_of(&ms).data, vec![0.5, 0.5]);
    }

    #[test]
    fn ensemble_rows_are_distributions() {
        for seed in 0..100 {
            let b = bank(1 + (seed as usize % 5), seed);
            let m = b.labels(&batch(3, seed + 1000), BankMode::Ensemble).unwrap();
            for row in m.iter_rows() {
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn chunked_evaluation_matches_whole() {
        let b = bank(1, 9);
        let x = batch(600, 2);
        let all = b.soft_labels(0, &x).unwrap();
        let part = b
            .soft_labels(0, &x.gather(&(300..364).collect::<Vec<_>>()))
            .unwrap();
        assert_eq!(&all.data[300 * 3..364 * 3], part.data.as_slice());
    }

    #[test]
    fn mt_loss_identities() {
        let p = Matrix::new(2, 3, vec![0.2, 0.5, 0.3, 0.6, 0.3, 0.1]);
        let z1 = Matrix::new(2, 3, vec![0.1, 0.8, 0.1, 0.3, 0.3, 0.4]);
        let z2 = Matrix::new(2, 3, vec![0.5, 0.25, 0.25, 0.0, 1.0, 0.0]);
        assert_eq!(
            mt_loss(&p, std::slice::from_ref(&z1)).unwrap(),
            soft_ce(&p, &z1).unwrap()
        );
        let three = mt_loss(&p, &[z1.clone(), z1.clone(), z1.clone()]).unwrap();
        assert!((three - 3.0 * soft_ce(&p, &z1).unwrap()).abs() < 1e-12);
        let sum = Matrix::new(2, 3, z1.data.iter().zip(&z2.data).map(|(a, b)| a + b).collect());
        let both = mt_loss(&p, &[z1, z2]).unwrap();
        assert!((both - mean_ce_unchecked(&p, &sum)).abs() < 1e-12);
    }

    #[test]
    fn mt_objective_single_teacher_is_soft_ce() {
        let l = Matrix::new(2, 3, vec![0.3, -0.2, 1.0, 2.0, 0.0, -1.0]);
        let z = Matrix::new(2, 3, vec![0.1, 0.8, 0.1, 0.3, 0.3, 0.4]);
        let a = mt_objective(&l, std::slice::from_ref(&z)).unwrap();
        let b = soft_ce_objective(&l, &z).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.dlogits, b.dlogits);
    }

    #[test]
    fn mt_dimension_mismatch() {
        let p = Matrix::new(1, 3, vec![0.2, 0.5, 0.3]);
        let z = Matrix::new(1, 2, vec![0.5, 0.5]);
        assert!(matches!(mt_loss(&p, &[z]), Err(LdlError::Dimension { .. })));
    }
}
