//! Label-coupled batch augmentation (mixup, CutMix, RICAP) with exact λ and
//! mask bookkeeping.

mod beta;
mod blend;

use serde::{Deserialize, Serialize};

use crate::error::{LdlError, Result};
use crate::nn::{Matrix, Tensor4};
use crate::rng::Prng;

pub use beta::beta_sample;
pub use blend::{
    cutmix, cutmix_box, cutmix_with, identity, mixup, mixup_with, ricap, ricap_geometry, ricap_with,
    BlendResult, MaskDigest, Rect, RicapGeometry,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMethod {
    None,
    Mixup,
    Cutmix,
    Ricap,
}

impl AugmentMethod {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentMethod::None => "none",
            AugmentMethod::Mixup => "mixup",
            AugmentMethod::Cutmix => "cutmix",
            AugmentMethod::Ricap => "ricap",
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub method: AugmentMethod,
    /// Beta(α, α) parameter; 1.0 is the usual default of all three methods.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            method: AugmentMethod::None,
            alpha: default_alpha(),
        }
    }
}

impl AugmentConfig {
    pub fn new(method: AugmentMethod, alpha: f64) -> Result<Self> {
        let cfg = AugmentConfig { method, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LdlError::Config(format!(
                "augment α = {} must be > 0",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Blend one batch with this configuration.
    pub fn apply(&self, batch: &Tensor4<f32>, labels: &Matrix<f64>, rng: &mut Prng) -> Result<BlendResult> {
        match self.method {
            AugmentMethod::None => identity(batch, labels),
            AugmentMethod::Mixup => mixup(batch, labels, self.alpha, rng),
            AugmentMethod::Cutmix => cutmix(batch, labels, self.alpha, rng),
            AugmentMethod::Ricap => ricap(batch, labels, self.alpha, rng),
        }
    }
}
