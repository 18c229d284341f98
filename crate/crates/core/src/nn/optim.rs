use serde::{Deserialize, Serialize};

use super::loss::{ce_logit_grad, mean_ce_unchecked, softmax_stable};
use super::network::{DropoutMode, Network, ParamBuffers};
use super::tensor::{Matrix, Tensor4};
use super::Real;
use crate::error::{LdlError, Result};
use crate::rng::Prng;

/// Step schedule: the rate is multiplied by `gamma` at each milestone epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub milestones: Vec<usize>,
    pub gamma: f64,
}

impl StepSchedule {
    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, lr0: f64, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        lr0 * self.gamma.powi(passed as i32)
    }
}

#[derive(Debug, Clone)]
pub struct OptimState<F> {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: StepSchedule,
    lr: f64,
    velocity: ParamBuffers<F>,
}

impl<F: Real> OptimState<F> {
    pub fn new(
        net: &Network<F>,
        lr0: f64,
        momentum: f64,
        weight_decay: f64,
        schedule: StepSchedule,
    ) -> Result<Self> {
        if !(lr0 >= 0.0 && lr0.is_finite()) {
            return Err(LdlError::Config(format!("learning rate {lr0} must be ≥ 0")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(LdlError::Config(format!("momentum {momentum} outside [0, 1)")));
        }
        if weight_decay < 0.0 {
            return Err(LdlError::Config("weight decay must be ≥ 0".into()));
        }
        if !(schedule.gamma > 0.0 && schedule.gamma <= 1.0) {
            return Err(LdlError::Config(format!(
                "schedule gamma {} outside (0, 1]",
                schedule.gamma
            )));
        }
        Ok(Self {
            lr0,
            momentum,
            weight_decay,
            schedule,
            lr: lr0,
            velocity: ParamBuffers::zeros_like(net.params()),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.lr = self.schedule.lr_at(self.lr0, epoch);
    }

    pub fn velocity(&self) -> &ParamBuffers<F> {
        &self.velocity
    }

    /// v ← m·v + g + wd·θ ;  θ ← θ − lr·v
    pub fn apply(&mut self, net: &mut Network<F>, grads: &ParamBuffers<F>) {
        let m = F::from_f64(self.momentum);
        let wd = F::from_f64(self.weight_decay);
        let lr = F::from_f64(self.lr);
        for ((theta, v), &g) in net
            .params_mut()
            .iter_mut()
            .zip(self.velocity.iter_mut())
            .zip(grads.iter())
        {
            *v = m * *v + g + wd * *theta;
            *theta -= lr * *v;
        }
    }
}

/// Position of an update inside training, carried by divergence errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepIndex {
    pub epoch: usize,
    pub batch: usize,
}

/// Loss value and ∂loss/∂logits for one batch, both computed in f64.
pub struct Objective {
    pub loss: f64,
    pub dlogits: Matrix<f64>,
}

/// One SGD update with a caller-supplied objective on the logits.
/// Returns the loss measured before the update.
pub fn step_with<F, O>(
    net: &mut Network<F>,
    batch: &Tensor4<F>,
    opt: &mut OptimState<F>,
    rng: &mut Prng,
    at: StepIndex,
    objective: O,
) -> Result<f64>
where
    F: Real,
    O: FnOnce(&Matrix<f64>) -> Result<Objective>,
{
    let trace = net.trace(batch, DropoutMode::Sample { rate_override: None }, rng)?;
    let logits = Matrix::new(batch.batch(), net.classes(), trace.logits().to_vec()).to_f64();
    let diverged = |detail: String| LdlError::Diverged {
        epoch: at.epoch,
        batch: at.batch,
        detail,
    };
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(diverged("non-finite logits".into()));
    }
    let Objective { loss, dlogits } = objective(&logits)?;
    if !loss.is_finite() {
        return Err(diverged(format!("loss is {loss}")));
    }
    let dl: Vec<F> = dlogits.data.iter().map(|&v| F::from_f64(v)).collect();
    let grads = net.backward(&trace, &dl);
    if !grads.all_finite() {
        return Err(diverged("non-finite gradient".into()));
    }
    opt.apply(net, &grads);
    Ok(loss)
}

/// Soft-target cross-entropy objective: loss and (p − z)/N.
pub fn soft_ce_objective(logits: &Matrix<f64>, targets: &Matrix<f64>) -> Result<Objective> {
    let probs = softmax_stable(logits)?;
    super::loss::check_rows(targets, "target")?;
    Ok(Objective {
        loss: mean_ce_unchecked(&probs, targets),
        dlogits: ce_logit_grad(&probs, targets, 1.0),
    })
}

/// Training step on soft targets (rows summing to one).
pub fn backward_step<F: Real>(
    net: &mut Network<F>,
    batch: &Tensor4<F>,
    targets: &Matrix<f64>,
    opt: &mut OptimState<F>,
    rng: &mut Prng,
    at: StepIndex,
) -> Result<f64> {
    if targets.rows != batch.batch() || targets.cols != net.classes() {
        return Err(LdlError::dim(
            "targets",
            format!("{}×{}", batch.batch(), net.classes()),
            format!("{}×{}", targets.rows, targets.cols),
        ));
    }
    step_with(net, batch, opt, rng, at, |logits| {
        soft_ce_objective(logits, targets)
    })
}
