use crate::error::{LdlError, Result};
use crate::nn::{softmax_stable, DropoutMode, Matrix, Network, Tensor4};
use crate::rng::Prng;

pub const DEFAULT_MCDO_RATE: f64 = 0.2;
pub const DEFAULT_MCDO_SAMPLES: usize = 20;

/// Monte-Carlo dropout label: mean of `samples` softmax outputs with every
/// dropout layer sampling at rate `rho`. With `rho == 0` this is the plain
/// eval-mode softmax.
pub fn mcdo_label(
    teacher: &Network<f32>,
    x: &Tensor4<f32>,
    rho: f64,
    samples: usize,
    rng: &mut Prng,
) -> Result<Matrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(LdlError::Domain(format!(
            "MC dropout rate ρ = {rho} outside [0, 1)"
        )));
    }
    if samples == 0 {
        return Err(LdlError::Domain("MC dropout needs at least one sample".into()));
    }
    if !teacher.arch().has_dropout() {
        return Err(LdlError::Config(
            "MC dropout labels need a teacher with dropout layers".into(),
        ));
    }
    if rho == 0.0 {
        return softmax_stable(&teacher.logits_eval(x)?.to_f64());
    }
    let mode = DropoutMode::Sample {
        rate_override: Some(rho),
    };
    let mut acc: Option<Matrix<f64>> = None;
    for _ in 0..samples {
        let trace = teacher.trace(x, mode, rng)?;
        let logits = Matrix::new(x.batch(), teacher.classes(), trace.logits().to_vec()).to_f64();
        let p = softmax_stable(&logits)?;
        match acc.as_mut() {
            None => acc = Some(p),
            Some(a) => a.data.iter_mut().zip(&p.data).for_each(|(s, v)| *s += v),
        }
    }
    let mut mean = acc.expect("samples ≥ 1");
    let n = samples as f64;
    mean.data.iter_mut().for_each(|v| *v /= n);
    Ok(mean)
}
