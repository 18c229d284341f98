//! Central-difference verification of the analytic backward pass.

use super::arch::{Architecture, LayerSpec};
use super::loss::{ce_logit_grad, mean_ce_unchecked, softmax_stable};
use super::network::{DropoutMode, Network};
use super::tensor::{Matrix, Tensor4};
use crate::error::Result;
use crate::rng::Prng;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Parameters checked; every parameter when the network is at most this large.
    pub max_params: usize,
    /// When set, dropout masks are sampled from this seed on every pass so
    /// the perturbed losses see identical masks. `None` runs in eval mode.
    pub dropout_seed: Option<u64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_params: 5000,
            dropout_seed: None,
        }
    }
}

fn mode_for(cfg: &GradCheckConfig) -> DropoutMode {
    match cfg.dropout_seed {
        Some(_) => DropoutMode::Sample { rate_override: None },
        None => DropoutMode::Identity,
    }
}

fn loss_of(
    net: &Network<f64>,
    x: &Tensor4<f64>,
    targets: &Matrix<f64>,
    cfg: &GradCheckConfig,
) -> Result<f64> {
    let mut rng = Prng::new(cfg.dropout_seed.unwrap_or(0));
    let trace = net.trace(x, mode_for(cfg), &mut rng)?;
    let logits = Matrix::new(x.batch(), net.classes(), trace.logits().to_vec());
    Ok(mean_ce_unchecked(&softmax_stable(&logits)?, targets))
}

/// Max over checked parameters of |g_a − g_fd| / max(1e-8, |g_a| + |g_fd|).
pub fn grad_check(
    net: &Network<f64>,
    x: &Tensor4<f64>,
    targets: &Matrix<f64>,
    cfg: &GradCheckConfig,
) -> Result<f64> {
    let mut rng = Prng::new(cfg.dropout_seed.unwrap_or(0));
    let trace = net.trace(x, mode_for(cfg), &mut rng)?;
    let logits = Matrix::new(x.batch(), net.classes(), trace.logits().to_vec());
    let probs = softmax_stable(&logits)?;
    let dlogits = ce_logit_grad(&probs, targets, 1.0);
    let analytic: Vec<f64> = net.backward(&trace, &dlogits.data).iter().copied().collect();

    let total = analytic.len();
    let indices: Vec<usize> = if total <= cfg.max_params {
        (0..total).collect()
    } else {
        let mut pick = Prng::new(0x6772_6164);
        let mut all = pick.permutation(total);
        all.truncate(cfg.max_params);
        all.sort_unstable();
        all
    };

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for idx in indices {
        let original = *probe.params().iter().nth(idx).expect("index in range");
        set_param(&mut probe, idx, original + cfg.eps);
        let plus = loss_of(&probe, x, targets, cfg)?;
        set_param(&mut probe, idx, original - cfg.eps);
        let minus = loss_of(&probe, x, targets, cfg)?;
        set_param(&mut probe, idx, original);
        let fd = (plus - minus) / (2.0 * cfg.eps);
        let ga = analytic[idx];
        let rel = (ga - fd).abs() / (ga.abs() + fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn set_param(net: &mut Network<f64>, idx: usize, value: f64) {
    if let Some(p) = net.params_mut().iter_mut().nth(idx) {
        *p = value;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckResult {
    pub case: &'static str,
    pub seed: u64,
    pub max_rel_error: f64,
}

/// Small network per layer family exercised by the verification suite.
pub fn suite_cases() -> Vec<(&'static str, Architecture, Option<u64>)> {
    let dense = Architecture::mlp([1, 2, 4], &[6], 3, 0.0);
    let conv = Architecture::small_conv([1, 6, 6], 2, 5, 3, 0.0);
    let deep_conv = Architecture {
        input: [2, 4, 4],
        classes: 3,
        layers: vec![
            LayerSpec::Conv3x3 { out_channels: 3 },
            LayerSpec::Relu,
            LayerSpec::Conv3x3 { out_channels: 2 },
            LayerSpec::MaxPool2,
            LayerSpec::Dense { out: 3 },
        ],
    };
    let dropout = Architecture::mlp([1, 2, 4], &[6, 5], 3, 0.3);
    vec![
        ("dense", dense, None),
        ("conv+pool", conv, None),
        ("conv+conv+pool", deep_conv, None),
        ("dropout-eval", dropout.clone(), None),
        ("dropout-train-fixed-mask", dropout, Some(0xD409)),
    ]
}

/// Run every suite case for each seed: random weights, batch of 4 random
/// inputs, random soft targets. Every parameter (biases included) gets a
/// small Gaussian jitter after initialisation. With zero biases a sample
/// whose hidden units are all inactive puts the next ReLU exactly on its
/// kink, where central differences measure half a one-sided slope.
pub fn verification_suite(seeds: impl IntoIterator<Item = u64>) -> Result<Vec<GradCheckResult>> {
    let cases = suite_cases();
    let mut out = Vec::new();
    for seed in seeds {
        for (name, arch, dropout_seed) in &cases {
            let mut rng = Prng::new(seed);
            let mut net: Network<f64> = Network::init(arch, &mut rng)?;
            for p in net.params_mut().iter_mut() {
                *p += 0.05 * rng.normal();
            }
            let n = 4;
            let x = Tensor4::from_vec(
                [n, arch.input[0], arch.input[1], arch.input[2]],
                (0..n * arch.input_len()).map(|_| rng.normal()).collect(),
            )?;
            let mut targets = Matrix::zeros(n, arch.classes);
            for i in 0..n {
                let raw: Vec<f64> = (0..arch.classes).map(|_| rng.uniform_open()).collect();
                let s: f64 = raw.iter().sum();
                for (t, r) in targets.row_mut(i).iter_mut().zip(raw) {
                    *t = r / s;
                }
            }
            let cfg = GradCheckConfig {
                dropout_seed: dropout_seed.map(|d| d ^ seed),
                ..GradCheckConfig::default()
            };
            out.push(GradCheckResult {
                case: name,
                seed,
                max_rel_error: grad_check(&net, &x, &targets, &cfg)?,
            });
        }
    }
    Ok(out)
}
