//! One training run per (config, seed).

use std::path::Path;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::data::{Dataset, Split};
use super::record::{ClassLosses, EpochStats, OgrUpdate, RunRecord};
use crate::augment::BlendResult;
use crate::calib::{fit_temperature, CalibReport, PredictionSet};
use crate::error::{LdlError, Result};
use crate::labelgen::{
    cache, kd_objective, mcdo_label, mt_objective, ogr, online_label, smooth_matrix, BankMode, LabelMode,
    TeacherBank, OGR_EPS,
};
use crate::nn::{
    clamped_ln, soft_ce_objective, softmax_stable, step_with, Matrix, Network, Objective, OptimState,
    StepIndex, Tensor4,
};
use crate::rng::Prng;

const EVAL_CHUNK: usize = 512;

/// A teacher bank together with the hash identifying its parameter files.
#[derive(Debug, Clone)]
pub struct LoadedBank {
    pub bank: TeacherBank,
    pub hash: String,
}

/// Everything a run produces besides its record.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub model: Network<f32>,
    pub val_logits: Matrix<f64>,
    pub val_labels: Vec<usize>,
    pub test_logits: Matrix<f64>,
    pub test_labels: Vec<usize>,
}

/// Hands out the splits and refuses train/val access once the test split
/// has been opened.
struct SplitGuard<'a> {
    ds: &'a Dataset,
    test_opened: bool,
}

impl<'a> SplitGuard<'a> {
    fn train(&self) -> Result<&'a Split> {
        self.check("train")?;
        Ok(&self.ds.train)
    }

    fn val(&self) -> Result<&'a Split> {
        self.check("validation")?;
        Ok(&self.ds.val)
    }

    fn test(&mut self) -> Result<&'a Split> {
        if self.test_opened {
            return Err(LdlError::State("test split evaluated twice".into()));
        }
        self.test_opened = true;
        Ok(self.ds.test.open())
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.test_opened {
            return Err(LdlError::State(format!(
                "{what} split accessed after the test split"
            )));
        }
        Ok(())
    }
}

/// Eval-mode logits for a whole split, in fixed-size chunks.
pub fn split_logits(net: &Network<f32>, x: &Tensor4<f32>) -> Result<Matrix<f64>> {
    let n = x.batch();
    let k = net.classes();
    let mut out = Matrix::zeros(n, k);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let logits = net.logits_eval(&x.gather(&idx))?.to_f64();
        out.data[start * k..end * k].copy_from_slice(&logits.data);
    }
    Ok(out)
}

/// Mean hard-label loss, accuracy and per-class mean loss (0 for absent classes).
fn hard_metrics(logits: &Matrix<f64>, labels: &[usize]) -> Result<(f64, f64, Vec<f64>)> {
    let p = softmax_stable(logits)?;
    let k = logits.cols;
    let mut per_class = vec![0.0; k];
    let mut counts = vec![0usize; k];
    let mut total = 0.0;
    let mut hits = 0usize;
    for (row, &c) in p.iter_rows().zip(labels) {
        let l = -clamped_ln(row[c]);
        total += l;
        per_class[c] += l;
        counts[c] += 1;
        if crate::labelgen::argmax(row) == c {
            hits += 1;
        }
    }
    for (s, &n) in per_class.iter_mut().zip(&counts) {
        if n > 0 {
            *s /= n as f64;
        }
    }
    let n = labels.len() as f64;
    Ok((total / n, hits as f64 / n, per_class))
}

fn gather_rows(m: &Matrix<f64>, idx: &[usize]) -> Matrix<f64> {
    let mut data = Vec::with_capacity(idx.len() * m.cols);
    for &i in idx {
        data.extend_from_slice(m.row(i));
    }
    Matrix::new(idx.len(), m.cols, data)
}

/// What the student is fitted to on one batch.
enum Targets {
    Soft(Matrix<f64>),
    Multi(Vec<Matrix<f64>>),
    Kd {
        teacher_logits: Matrix<f64>,
        hard: Matrix<f64>,
        lambda: f64,
        tau: f64,
    },
    Weighted {
        targets: Matrix<f64>,
        weights: Vec<f64>,
    },
}

impl Targets {
    fn objective(&self, logits: &Matrix<f64>) -> Result<Objective> {
        match self {
            Targets::Soft(z) => soft_ce_objective(logits, z),
            Targets::Multi(zs) => mt_objective(logits, zs),
            Targets::Kd {
                teacher_logits,
                hard,
                lambda,
                tau,
            } => kd_objective(logits, teacher_logits, hard, *lambda, *tau),
            Targets::Weighted { targets, weights } => weighted_objective(logits, targets, weights),
        }
    }
}

/// (1/N) Σ_i w_i·CE(z_i, p_i) with gradient w_i(p_i − z_i)/N.
fn weighted_objective(logits: &Matrix<f64>, targets: &Matrix<f64>, weights: &[f64]) -> Result<Objective> {
    if weights.len() != logits.rows {
        return Err(LdlError::dim(
            "sample weights vs batch",
            logits.rows,
            weights.len(),
        ));
    }
    let base = soft_ce_objective(logits, targets)?;
    let p = softmax_stable(logits)?;
    let n = logits.rows as f64;
    let mut loss = 0.0;
    let mut grad = base.dlogits;
    for (i, &w) in weights.iter().enumerate() {
        let ce: f64 = -p
            .row(i)
            .iter()
            .zip(targets.row(i))
            .map(|(&pk, &zk)| if zk == 0.0 { 0.0 } else { zk * clamped_ln(pk) })
            .sum::<f64>();
        loss += w * ce;
        grad.row_mut(i).iter_mut().for_each(|g| *g *= w);
    }
    Ok(Objective {
        loss: loss / n,
        dlogits: grad,
    })
}

/// Offline labels for the whole train split, one matrix per teacher for
/// the multi-teacher mode.
enum Offline {
    None,
    Rows(Matrix<f64>),
    PerTeacher(Vec<Matrix<f64>>),
}

fn cached(
    cache_dir: Option<&Path>,
    key: String,
    compute: impl FnOnce() -> Result<Matrix<f64>>,
) -> Result<Matrix<f64>> {
    match cache_dir {
        Some(dir) => cache::load_or_compute(dir, &key, compute),
        None => compute(),
    }
}

fn offline_targets(
    mode: LabelMode,
    train: &Split,
    bank: Option<&LoadedBank>,
    dataset_hash: &str,
    cache_dir: Option<&Path>,
) -> Result<(Offline, Option<String>)> {
    if !mode.is_offline() {
        return Ok((Offline::None, None));
    }
    let lb = bank.ok_or_else(|| LdlError::MissingBank(mode.name().into()))?;
    let key = |tag: &str| cache::cache_key(dataset_hash, &format!("{}:{tag}", lb.hash));
    if mode.is_multi_teacher() {
        let mut per = Vec::with_capacity(lb.bank.len());
        let mut hasher = Vec::new();
        for t in 0..lb.bank.len() {
            let m = cached(cache_dir, key(&format!("teacher{t}")), || {
                lb.bank.soft_labels(t, &train.x)
            })?;
            hasher.push(cache::labels_hash(&m));
            per.push(m);
        }
        Ok((Offline::PerTeacher(per), Some(hasher.join(":"))))
    } else {
        let bank_mode = mode.bank_mode().expect("offline single/ensemble mode");
        let tag = match bank_mode {
            BankMode::Single => "single",
            BankMode::Ensemble => "ensemble",
        };
        let m = cached(cache_dir, key(tag), || lb.bank.labels(&train.x, bank_mode))?;
        let h = cache::labels_hash(&m);
        Ok((Offline::Rows(m), Some(h)))
    }
}

struct Streams {
    init: Prng,
    shuffle: Prng,
    dropout: Prng,
    augment: Prng,
    mcdo: Prng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let root = Prng::new(seed);
        Streams {
            init: root.fork(1),
            shuffle: root.fork(2),
            dropout: root.fork(3),
            augment: root.fork(4),
            mcdo: root.fork(5),
        }
    }
}

fn need_bank(bank: Option<&LoadedBank>, mode: LabelMode) -> Result<&TeacherBank> {
    bank.map(|b| &b.bank)
        .ok_or_else(|| LdlError::MissingBank(mode.name().into()))
}

#[allow(clippy::too_many_arguments)]
fn batch_targets(
    mode: LabelMode,
    blend: &BlendResult,
    idx: &[usize],
    offline: &Offline,
    bank: Option<&LoadedBank>,
    ogr_weights: &[f64],
    mcdo_rng: &mut Prng,
) -> Result<Targets> {
    let x = &blend.x_hat;
    Ok(match mode {
        LabelMode::Vanilla => Targets::Soft(blend.y_hat.clone()),
        LabelMode::LabelSmoothing { alpha } => Targets::Soft(smooth_matrix(&blend.y_hat, alpha)?),
        LabelMode::Kd { lambda, tau } => {
            let teacher = &need_bank(bank, mode)?.teachers()[0];
            Targets::Kd {
                teacher_logits: teacher.logits_eval(x)?.to_f64(),
                hard: blend.y_hat.clone(),
                lambda,
                tau,
            }
        }
        LabelMode::OffLdl | LabelMode::OffEnLdl => match offline {
            Offline::Rows(z) => Targets::Soft(blend.mix(&gather_rows(z, idx))?),
            _ => return Err(LdlError::State("offline labels were not prepared".into())),
        },
        LabelMode::OffMtLdl => match offline {
            Offline::PerTeacher(zs) => Targets::Multi(
                zs.iter()
                    .map(|z| blend.mix(&gather_rows(z, idx)))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(LdlError::State("offline labels were not prepared".into())),
        },
        LabelMode::OnLdl | LabelMode::OnEnLdl => {
            let bank_mode = mode.bank_mode().expect("online single/ensemble mode");
            Targets::Soft(online_label(need_bank(bank, mode)?, x, bank_mode)?)
        }
        LabelMode::OnMtLdl => Targets::Multi(need_bank(bank, mode)?.per_teacher_labels(x)?),
        LabelMode::Mcdo { rho, samples } => {
            let teacher = &need_bank(bank, mode)?.teachers()[0];
            Targets::Soft(mcdo_label(teacher, x, rho, samples, mcdo_rng)?)
        }
        LabelMode::Ogr { .. } => {
            let weights = blend
                .y_hat
                .iter_rows()
                .map(|row| row.iter().zip(ogr_weights).map(|(y, w)| y * w).sum())
                .collect();
            Targets::Weighted {
                targets: blend.y_hat.clone(),
                weights,
            }
        }
    })
}

/// Train one student for one seed and evaluate it on the test split.
pub fn run_seed(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    bank: Option<&LoadedBank>,
    cache_dir: Option<&Path>,
    seed: u64,
) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    if cfg.student.input != ds.shape() || cfg.student.classes != ds.spec.classes {
        return Err(LdlError::dim(
            "student input/classes vs dataset",
            format!("{:?}/{}", ds.shape(), ds.spec.classes),
            format!("{:?}/{}", cfg.student.input, cfg.student.classes),
        ));
    }
    if cfg.mode.needs_teachers() {
        need_bank(bank, cfg.mode)?;
    }
    let mut guard = SplitGuard {
        ds,
        test_opened: false,
    };
    let train = guard.train()?;
    let val = guard.val()?;
    let k = ds.spec.classes;

    let mut rng = Streams::new(seed);
    let mut net: Network<f32> = Network::init(&cfg.student, &mut rng.init)?;
    let o = &cfg.optimizer;
    let mut opt = OptimState::new(
        &net,
        o.lr,
        o.momentum,
        o.weight_decay,
        cfg.schedule.step_schedule(),
    )?;

    let (offline, label_hash) = offline_targets(cfg.mode, train, bank, &ds.hash, cache_dir)?;
    let hard_train = train.one_hot()?;
    let cadence = cfg.ogr_cadence();
    let mut ogr_weights = vec![1.0; k];
    let mut ogr_updates = Vec::new();

    let mut epochs = Vec::with_capacity(cfg.schedule.epochs);
    let mut class_losses: Vec<ClassLosses> = Vec::with_capacity(cfg.schedule.epochs);
    for epoch in 0..cfg.schedule.epochs {
        opt.set_epoch(epoch);
        let order = rng.shuffle.permutation(train.len());
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(o.batch_size).enumerate() {
            let xb = train.x.gather(idx);
            let yb = gather_rows(&hard_train, idx);
            let blend = cfg.augment.apply(&xb, &yb, &mut rng.augment)?;
            let targets = batch_targets(cfg.mode, &blend, idx, &offline, bank, &ogr_weights, &mut rng.mcdo)?;
            let at = StepIndex { epoch, batch: b };
            let loss = step_with(&mut net, &blend.x_hat, &mut opt, &mut rng.dropout, at, |logits| {
                targets.objective(logits)
            })?;
            loss_sum += loss * idx.len() as f64;
        }
        let (_, _, train_classes) = hard_metrics(&split_logits(&net, &train.x)?, &train.labels)?;
        let (val_loss, val_accuracy, val_classes) = hard_metrics(&split_logits(&net, &val.x)?, &val.labels)?;
        epochs.push(EpochStats {
            epoch,
            lr: opt.lr(),
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_accuracy,
        });
        class_losses.push(ClassLosses {
            train: train_classes,
            val: val_classes,
        });
        if let Some(n) = cadence {
            if epoch >= n && (epoch + 1) % n == 0 {
                let tr: Vec<Vec<f64>> = class_losses.iter().map(|c| c.train.clone()).collect();
                let va: Vec<Vec<f64>> = class_losses.iter().map(|c| c.val.clone()).collect();
                ogr_weights = ogr(&tr, &va, epoch - n, n, OGR_EPS)?.normalized;
                ogr_updates.push(OgrUpdate {
                    from_epoch: epoch + 1,
                    weights: ogr_weights.clone(),
                });
            }
        }
        log::debug!(
            "{} seed {seed} epoch {epoch}: train {:.4} val {:.4} acc {:.4}",
            cfg.mode.name(),
            loss_sum / train.len() as f64,
            val_loss,
            val_accuracy
        );
    }

    let val_logits = split_logits(&net, &val.x)?;
    let t = fit_temperature(&val_logits, &val.labels)?;
    let test = guard.test()?;
    let test_logits = split_logits(&net, &test.x)?;
    let raw = PredictionSet::from_logits(&test_logits, test.labels.clone(), 1.0)?;
    let scaled = PredictionSet::from_logits(&test_logits, test.labels.clone(), t)?;
    let record = RunRecord {
        config_hash: cfg.hash()?,
        mode: cfg.mode.name().into(),
        augment: cfg.augment.method.name().into(),
        seed,
        dataset_hash: ds.hash.clone(),
        bank_hash: bank.filter(|_| cfg.mode.needs_teachers()).map(|b| b.hash.clone()),
        label_hash,
        epochs,
        class_losses,
        ogr_updates,
        bins: cfg.bins,
        test: CalibReport::evaluate(&raw, cfg.bins, Some(t))?,
        test_scaled: CalibReport::evaluate(&scaled, cfg.bins, Some(t))?,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    record.validate(cfg.schedule.epochs)?;
    Ok(RunOutput {
        record,
        model: net,
        val_logits,
        val_labels: val.labels.clone(),
        test_logits,
        test_labels: test.labels.clone(),
    })
}

/// Run every effective seed of `cfg` in order.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    bank: Option<&LoadedBank>,
    cache_dir: Option<&Path>,
) -> Result<Vec<RunOutput>> {
    cfg.effective_seeds()?
        .into_iter()
        .map(|s| run_seed(cfg, ds, bank, cache_dir, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::{gen_synth, DatasetSpec};

    #[test]
    fn guard_seals_after_test() {
        let ds = gen_synth(&DatasetSpec::benchmark(3, 10, 5, 5, 0.1, 0)).unwrap();
        let mut g = SplitGuard {
            ds: &ds,
            test_opened: false,
        };
        g.train().unwrap();
        g.test().unwrap();
        assert!(matches!(g.val(), Err(LdlError::State(_))));
        assert!(matches!(g.test(), Err(LdlError::State(_))));
    }

    #[test]
    fn weighted_objective_with_unit_weights_is_soft_ce() {
        let logits = Matrix::new(2, 3, vec![0.2, -1.0, 0.5, 1.5, 0.0, -0.3]);
        let z = Matrix::new(2, 3, vec![1.0, 0.0, 0.0, 0.2, 0.3, 0.5]);
        let a = weighted_objective(&logits, &z, &[1.0, 1.0]).unwrap();
        let b = soft_ce_objective(&logits, &z).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-12);
        assert_eq!(a.dlogits, b.dlogits);
        let c = weighted_objective(&logits, &z, &[2.0, 0.0]).unwrap();
        assert_eq!(c.dlogits.row(1), &[0.0, 0.0, 0.0]);
    }
}
