use crate::error::{LdlError, Result};
use crate::rng::Prng;

/// Draw λ ~ Beta(α, α).
///
/// For α ≤ 1 this is Jöhnk's method evaluated in log space, so tiny α does
/// not underflow `U^(1/α)`. For α > 1 it is Cheng's BB rejection sampler.
/// Both consume uniforms from `rng` only, so streams are reproducible.
pub fn beta_sample(alpha: f64, rng: &mut Prng) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(LdlError::Domain(format!(
            "Beta parameter α = {alpha} must be > 0"
        )));
    }
    Ok(if alpha <= 1.0 {
        johnk(alpha, rng)
    } else {
        cheng_bb(alpha, rng)
    })
}

fn johnk(alpha: f64, rng: &mut Prng) -> f64 {
    loop {
        let log_x = rng.uniform_open().ln() / alpha;
        let log_y = rng.uniform_open().ln() / alpha;
        let log_m = log_x.max(log_y);
        let x = (log_x - log_m).exp();
        let y = (log_y - log_m).exp();
        let sum = x + y;
        if log_m + sum.ln() <= 0.0 {
            return (x / sum).clamp(0.0, 1.0);
        }
    }
}

fn cheng_bb(a: f64, rng: &mut Prng) -> f64 {
    let b = a;
    let sum = a + b;
    let beta = ((sum - 2.0) / (2.0 * a * b - sum)).sqrt();
    let gamma = a + 1.0 / beta;
    const LN4: f64 = 1.386_294_361_119_890_6;
    const ONE_PLUS_LN5: f64 = 2.609_437_912_434_100_3;
    loop {
        let u1 = rng.uniform_open();
        let u2 = rng.uniform_open();
        let v = beta * (u1 / (1.0 - u1)).ln();
        let w = a * v.exp();
        let z = u1 * u1 * u2;
        let r = gamma * v - LN4;
        let s = a + r - w;
        if s + ONE_PLUS_LN5 >= 5.0 * z {
            return w / (b + w);
        }
        let t = z.ln();
        if s > t || r + sum * (sum / (b + w)).ln() >= t {
            return w / (b + w);
        }
    }
}
