//! Distillation objective: (1 − λ)·CE(y, p_s) + λ·CE(q_τ, p_τ).
//!
//! No τ² rescaling is applied to the soft term.

use super::dist::{soften, soften_matrix, LabelDist};
use crate::error::{LdlError, Result};
use crate::nn::{
    ce_logit_grad, cross_entropy_row, mean_ce_unchecked, softmax_row, softmax_stable, Matrix, Objective,
};

fn check(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LdlError::Domain(format!("KD weight λ = {lambda} outside [0, 1]")));
    }
    Ok(())
}

/// Single-sample distillation loss.
pub fn kd_total_loss(
    student_logits: &[f64],
    teacher_logits: &[f64],
    y: &LabelDist,
    lambda: f64,
    tau: f64,
) -> Result<f64> {
    check(lambda)?;
    if student_logits.len() != teacher_logits.len() || student_logits.len() != y.classes() {
        return Err(LdlError::dim(
            "kd operands",
            y.classes(),
            format!("{}/{}", student_logits.len(), teacher_logits.len()),
        ));
    }
    let p = softmax_row(student_logits);
    let hard = cross_entropy_row(&p, y.values());
    let q_t = soften(teacher_logits, tau)?;
    let p_t = soften(student_logits, tau)?;
    let soft = cross_entropy_row(p_t.values(), q_t.values());
    Ok((1.0 - lambda) * hard + lambda * soft)
}

/// Batch distillation objective with its logit gradient
/// (1 − λ)(p − y)/N + λ(p_τ − q_τ)/(τN).
pub fn kd_objective(
    student_logits: &Matrix<f64>,
    teacher_logits: &Matrix<f64>,
    y: &Matrix<f64>,
    lambda: f64,
    tau: f64,
) -> Result<Objective> {
    check(lambda)?;
    if student_logits.rows != teacher_logits.rows
        || student_logits.cols != teacher_logits.cols
        || y.rows != student_logits.rows
        || y.cols != student_logits.cols
    {
        return Err(LdlError::dim(
            "kd batch",
            format!("{}×{}", student_logits.rows, student_logits.cols),
            format!(
                "teacher {}×{}, labels {}×{}",
                teacher_logits.rows, teacher_logits.cols, y.rows, y.cols
            ),
        ));
    }
    let p = softmax_stable(student_logits)?;
    let hard_loss = mean_ce_unchecked(&p, y);
    let hard_grad = ce_logit_grad(&p, y, 1.0);

    let q_tau = soften_matrix(teacher_logits, tau)?;
    let p_tau = soften_matrix(student_logits, tau)?;
    let soft_loss = mean_ce_unchecked(&p_tau, &q_tau);
    let soft_grad = ce_logit_grad(&p_tau, &q_tau, 1.0);

    let loss = (1.0 - lambda) * hard_loss + lambda * soft_loss;
    let data = hard_grad
        .data
        .iter()
        .zip(&soft_grad.data)
        .map(|(&h, &s)| (1.0 - lambda) * h + lambda * (s / tau))
        .collect();
    Ok(Objective {
        loss,
        dlogits: Matrix::new(p.rows, p.cols, data),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelgen::dist::one_hot;
    use crate::nn::soft_ce_objective;

    #[test]
    fn lambda_zero_is_plain_ce() {
        let s = [0.3, -1.2, 2.0];
        let t = [1.0, 0.5, -0.5];
        let y = one_hot(2, 3).unwrap();
        let kd = kd_total_loss(&s, &t, &y, 0.0, 3.0).unwrap();
        let ce = cross_entropy_row(&softmax_row(&s), y.values());
        assert_eq!(kd, ce);
    }

    #[test]
    fn lambda_one_same_logits_is_entropy() {
        let s = [0.3, -1.2, 2.0, 0.7];
        let y = one_hot(0, 4).unwrap();
        let kd = kd_total_loss(&s, &s, &y, 1.0, 3.0).unwrap();
        let p = soften(&s, 3.0).unwrap();
        let h: f64 = -p.values().iter().map(|v| v * v.ln()).sum::<f64>();
        assert!((kd - h).abs() < 1e-12);
    }

    #[test]
    fn two_term_hand_computation() {
        let s = [1.5, -0.5, 0.25];
        let t = [0.2, 2.2, -1.0];
        let y = one_hot(1, 3).unwrap();
        // Independent evaluation with explicit exponentials.
        let sm = |v: &[f64], tau: f64| {
            let e: Vec<f64> = v.iter().map(|x| (x / tau).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|x| x / z).collect::<Vec<_>>()
        };
        let p = sm(&s, 1.0);
        let hard = -p[1].ln();
        let pt = sm(&s, 3.0);
        let qt = sm(&t, 3.0);
        let soft: f64 = -(0..3).map(|k| qt[k] * pt[k].ln()).sum::<f64>();
        let want = 0.9 * hard + 0.1 * soft;
        let got = kd_total_loss(&s, &t, &y, 0.1, 3.0).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn batch_objective_lambda_zero_matches_vanilla_bitwise() {
        let s = Matrix::new(2, 3, vec![0.3, -1.2, 2.0, 1.0, 1.0, -3.0]);
        let t = Matrix::new(2, 3, vec![-0.3, 0.2, 0.1, 2.0, 0.0, 1.0]);
        let y = Matrix::new(2, 3, vec![0., 0., 1., 1., 0., 0.]);
        let kd = kd_objective(&s, &t, &y, 0.0, 3.0).unwrap();
        let ce = soft_ce_objective(&s, &y).unwrap();
        assert_eq!(kd.loss, ce.loss);
        assert_eq!(kd.dlogits, ce.dlogits);
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let s = Matrix::new(1, 3, vec![0.4, -0.1, 0.9]);
        let t = Matrix::new(1, 3, vec![1.0, 0.0, -1.0]);
        let y = Matrix::new(1, 3, vec![0., 1., 0.]);
        let (lambda, tau) = (0.3, 2.5);
        let obj = kd_objective(&s, &t, &y, lambda, tau).unwrap();
        let yd = one_hot(1, 3).unwrap();
        for k in 0..3 {
            let mut plus = s.data.clone();
            let mut minus = s.data.clone();
            plus[k] += 1e-6;
            minus[k] -= 1e-6;
            let fd = (kd_total_loss(&plus, &t.data, &yd, lambda, tau).unwrap()
                - kd_total_loss(&minus, &t.data, &yd, lambda, tau).unwrap())
                / 2e-6;
            assert!((fd - obj.dlogits.data[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_lambda_rejected() {
        let y = one_hot(0, 2).unwrap();
        assert!(kd_total_loss(&[0., 0.], &[0., 0.], &y, 1.5, 1.0).is_err());
        assert!(kd_total_loss(&[0., 0.], &[0., 0.], &y, 0.5, 0.0).is_err());
    }
}
