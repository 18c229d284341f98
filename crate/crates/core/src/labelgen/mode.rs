use serde::{Deserialize, Serialize};

use super::mcdo::{DEFAULT_MCDO_RATE, DEFAULT_MCDO_SAMPLES};
use super::ogr::DEFAULT_OGR_GAP;
use super::teacher::BankMode;
use crate::error::{LdlError, Result};

fn default_ls_alpha() -> f64 {
    0.1
}
fn default_kd_lambda() -> f64 {
    0.1
}
fn default_kd_tau() -> f64 {
    3.0
}
fn default_rho() -> f64 {
    DEFAULT_MCDO_RATE
}
fn default_samples() -> usize {
    DEFAULT_MCDO_SAMPLES
}
fn default_gap() -> usize {
    DEFAULT_OGR_GAP
}

/// Supervision configuration. Numbered variants follow the nine training
/// configurations (#1 vanilla … #9 online multi-teacher); `Mcdo` and `Ogr`
/// are the uncertainty-based variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelMode {
    Vanilla,
    LabelSmoothing {
        #[serde(default = "default_ls_alpha")]
        alpha: f64,
    },
    Kd {
        #[serde(default = "default_kd_lambda")]
        lambda: f64,
        #[serde(default = "default_kd_tau")]
        tau: f64,
    },
    OffLdl,
    OffEnLdl,
    OffMtLdl,
    OnLdl,
    OnEnLdl,
    OnMtLdl,
    Mcdo {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Ogr {
        #[serde(default = "default_gap")]
        gap: usize,
    },
}

impl LabelMode {
    /// Every mode with default parameters.
    pub fn all() -> [LabelMode; 11] {
        [
            LabelMode::Vanilla,
            LabelMode::LabelSmoothing {
                alpha: default_ls_alpha(),
            },
            LabelMode::Kd {
                lambda: default_kd_lambda(),
                tau: default_kd_tau(),
            },
            LabelMode::OffLdl,
            LabelMode::OffEnLdl,
            LabelMode::OffMtLdl,
            LabelMode::OnLdl,
            LabelMode::OnEnLdl,
            LabelMode::OnMtLdl,
            LabelMode::Mcdo {
                rho: default_rho(),
                samples: default_samples(),
            },
            LabelMode::Ogr { gap: default_gap() },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            LabelMode::Vanilla => "vanilla",
            LabelMode::LabelSmoothing { .. } => "ls",
            LabelMode::Kd { .. } => "kd",
            LabelMode::OffLdl => "off_ldl",
            LabelMode::OffEnLdl => "off_en_ldl",
            LabelMode::OffMtLdl => "off_mt_ldl",
            LabelMode::OnLdl => "on_ldl",
            LabelMode::OnEnLdl => "on_en_ldl",
            LabelMode::OnMtLdl => "on_mt_ldl",
            LabelMode::Mcdo { .. } => "mcdo",
            LabelMode::Ogr { .. } => "ogr",
        }
    }

    /// Configuration number #1 to #9, `None` for the uncertainty variants.
    pub fn number(&self) -> Option<u8> {
        Some(match self {
            LabelMode::Vanilla => 1,
            LabelMode::LabelSmoothing { .. } => 2,
            LabelMode::Kd { .. } => 3,
            LabelMode::OffLdl => 4,
            LabelMode::OffEnLdl => 5,
            LabelMode::OffMtLdl => 6,
            LabelMode::OnLdl => 7,
            LabelMode::OnEnLdl => 8,
            LabelMode::OnMtLdl => 9,
            LabelMode::Mcdo { .. } | LabelMode::Ogr { .. } => return None,
        })
    }

    pub fn needs_teachers(&self) -> bool {
        !matches!(
            self,
            LabelMode::Vanilla | LabelMode::LabelSmoothing { .. } | LabelMode::Ogr { .. }
        )
    }

    pub fn is_offline(&self) -> bool {
        matches!(
            self,
            LabelMode::OffLdl | LabelMode::OffEnLdl | LabelMode::OffMtLdl
        )
    }

    pub fn is_online(&self) -> bool {
        matches!(self, LabelMode::OnLdl | LabelMode::OnEnLdl | LabelMode::OnMtLdl)
    }

    /// Teacher combination used by the LDL modes.
    pub fn bank_mode(&self) -> Option<BankMode> {
        match self {
            LabelMode::OffLdl | LabelMode::OnLdl => Some(BankMode::Single),
            LabelMode::OffEnLdl | LabelMode::OnEnLdl => Some(BankMode::Ensemble),
            _ => None,
        }
    }

    pub fn is_multi_teacher(&self) -> bool {
        matches!(self, LabelMode::OffMtLdl | LabelMode::OnMtLdl)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LabelMode::LabelSmoothing { alpha } if !(0.0..1.0).contains(&alpha) => Err(LdlError::Config(
                format!("label smoothing α = {alpha} outside [0, 1)"),
            )),
            LabelMode::Kd { lambda, .. } if !(0.0..=1.0).contains(&lambda) => {
                Err(LdlError::Config(format!("KD λ = {lambda} outside [0, 1]")))
            }
            LabelMode::Kd { tau, .. } if tau.is_nan() || tau <= 0.0 => {
                Err(LdlError::Config(format!("KD τ = {tau} must be > 0")))
            }
            LabelMode::Mcdo { rho, .. } if !(0.0..1.0).contains(&rho) => {
                Err(LdlError::Config(format!("MC dropout ρ = {rho} outside [0, 1)")))
            }
            LabelMode::Mcdo { samples: 0, .. } => Err(LdlError::Config("MC dropout N must be ≥ 1".into())),
            LabelMode::Ogr { gap: 0 } => Err(LdlError::Config("OGR gap must be ≥ 1".into())),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcdo_defaults_fill_in() {
        let m: LabelMode = serde_json::from_str(r#"{"kind":"mcdo"}"#).unwrap();
        assert_eq!(
            m,
            LabelMode::Mcdo {
                rho: 0.2,
                samples: 20
            }
        );
        let k: LabelMode = serde_json::from_str(r#"{"kind":"kd"}"#).unwrap();
        assert_eq!(
            k,
            LabelMode::Kd {
                lambda: 0.1,
                tau: 3.0
            }
        );
    }

    #[test]
    fn eleven_distinct_names() {
        let mut names: Vec<_> = LabelMode::all().iter().map(|m| m.name()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 11);
    }

    #[test]
    fn range_checks() {
        assert!(LabelMode::LabelSmoothing { alpha: 1.0 }.validate().is_err());
        assert!(LabelMode::Mcdo { rho: 1.0, samples: 3 }.validate().is_err());
        assert!(LabelMode::Kd {
            lambda: 0.5,
            tau: 0.0
        }
        .validate()
        .is_err());
        assert!(LabelMode::all().iter().all(|m| m.validate().is_ok()));
    }
}
