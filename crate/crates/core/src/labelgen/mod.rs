//! Supervision targets for every training configuration.

pub mod cache;
mod dist;
mod kd;
mod mcdo;
mod mode;
mod ogr;
mod teacher;

pub use dist::{
    argmax, one_hot, one_hot_matrix, smooth, smooth_matrix, soften, soften_matrix, stack, unstack, LabelDist,
};
pub use kd::{kd_objective, kd_total_loss};
pub use mcdo::{mcdo_label, DEFAULT_MCDO_RATE, DEFAULT_MCDO_SAMPLES};
pub use mode::LabelMode;
pub use ogr::{ogr, OgrWeights, DEFAULT_OGR_GAP, OGR_EPS};
pub use teacher::{mt_loss, mt_objective, offline_labels, online_label, BankMode, TeacherBank};
