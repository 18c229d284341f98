use super::arch::{ActShape, Architecture, LayerSpec};
use super::tensor::{Matrix, Tensor4};
use super::Real;
use crate::error::{LdlError, Result};
use crate::rng::Prng;

/// Weight and bias buffers of one layer. Both are empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> LayerParams<F> {
    fn empty() -> Self {
        Self {
            weight: Vec::new(),
            bias: Vec::new(),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: vec![F::ZERO; self.weight.len()],
            bias: vec![F::ZERO; self.bias.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One buffer per layer, in layer order, shaped like the network parameters.
/// Used for gradients and optimizer velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBuffers<F> {
    pub layers: Vec<LayerParams<F>>,
}

impl<F: Real> ParamBuffers<F> {
    pub fn zeros_like(other: &ParamBuffers<F>) -> Self {
        Self {
            layers: other.layers.iter().map(LayerParams::zeros_like).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(LayerParams::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &F> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut F> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// How dropout layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DropoutMode {
    Identity,
    /// Sample inverted-dropout masks, optionally replacing every layer's rate.
    Sample {
        rate_override: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<F> {
    /// N×K pre-softmax scores.
    pub logits: Matrix<F>,
    /// N×D activation feeding the head.
    pub penultimate: Matrix<F>,
}

/// Everything a backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace<F> {
    batch: usize,
    /// `acts[i]` is the input of layer i; the last entry is the logits.
    acts: Vec<Vec<F>>,
    aux: Vec<Aux<F>>,
}

#[derive(Debug, Clone)]
enum Aux<F> {
    None,
    Cols(Vec<F>),
    Argmax(Vec<u32>),
    Mask(Vec<F>),
}

impl<F: Real> Trace<F> {
    pub(crate) fn logits(&self) -> &[F] {
        self.acts.last().expect("trace has logits")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    arch: Architecture,
    shapes: Vec<ActShape>,
    params: ParamBuffers<F>,
}

impl<F: Real> Network<F> {
    /// He-normal weights (std √(2/fan_in)), zero biases.
    pub fn init(arch: &Architecture, rng: &mut Prng) -> Result<Self> {
        let shapes = arch.shapes()?;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for (i, layer) in arch.layers.iter().enumerate() {
            let inp = shapes[i];
            let params = match *layer {
                LayerSpec::Dense { out } => {
                    let fan_in = inp.len();
                    LayerParams {
                        weight: he_normal(out * fan_in, fan_in, rng),
                        bias: vec![F::ZERO; out],
                    }
                }
                LayerSpec::Conv3x3 { out_channels } => {
                    let ActShape::Spatial { c, .. } = inp else {
                        unreachable!("validated by Architecture::shapes")
                    };
                    let fan_in = c * 9;
                    LayerParams {
                        weight: he_normal(out_channels * fan_in, fan_in, rng),
                        bias: vec![F::ZERO; out_channels],
                    }
                }
                _ => LayerParams::empty(),
            };
            layers.push(params);
        }
        Ok(Self {
            arch: arch.clone(),
            shapes,
            params: ParamBuffers { layers },
        })
    }

    /// Build from explicit parameter buffers (model loading, precision casts).
    pub fn from_params(arch: &Architecture, params: ParamBuffers<F>) -> Result<Self> {
        let shapes = arch.shapes()?;
        let template = Self::param_lengths(arch, &shapes);
        if params.layers.len() != template.len() {
            return Err(LdlError::dim(
                "parameter layers",
                template.len(),
                params.layers.len(),
            ));
        }
        for (i, ((w, b), p)) in template.iter().zip(&params.layers).enumerate() {
            if p.weight.len() != *w || p.bias.len() != *b {
                return Err(LdlError::dim(
                    format!("layer {i} parameters"),
                    format!("{w}+{b}"),
                    format!("{}+{}", p.weight.len(), p.bias.len()),
                ));
            }
        }
        Ok(Self {
            arch: arch.clone(),
            shapes,
            params,
        })
    }

    fn param_lengths(arch: &Architecture, shapes: &[ActShape]) -> Vec<(usize, usize)> {
        arch.layers
            .iter()
            .enumerate()
            .map(|(i, l)| match *l {
                LayerSpec::Dense { out } => (out * shapes[i].len(), out),
                LayerSpec::Conv3x3 { out_channels } => match shapes[i] {
                    ActShape::Spatial { c, .. } => (out_channels * c * 9, out_channels),
                    ActShape::Flat(_) => unreachable!(),
                },
                _ => (0, 0),
            })
            .collect()
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamBuffers<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamBuffers<F> {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn classes(&self) -> usize {
        self.arch.classes
    }

    pub fn penultimate_index(&self) -> usize {
        self.arch.penultimate_index()
    }

    pub fn cast<G: Real>(&self) -> Network<G> {
        let layers = self
            .params
            .layers
            .iter()
            .map(|l| LayerParams {
                weight: l.weight.iter().map(|v| G::from_f64(v.to_f64())).collect(),
                bias: l.bias.iter().map(|v| G::from_f64(v.to_f64())).collect(),
            })
            .collect();
        Network {
            arch: self.arch.clone(),
            shapes: self.shapes.clone(),
            params: ParamBuffers { layers },
        }
    }

    /// Zero the head's weights and bias.
    pub fn zero_head(&mut self) {
        let head = self.params.layers.last_mut().expect("head layer");
        head.weight.iter_mut().for_each(|v| *v = F::ZERO);
        head.bias.iter_mut().for_each(|v| *v = F::ZERO);
    }

    /// Forward pass. Eval mode without `mcdo` never touches `rng` and treats
    /// dropout as identity; otherwise dropout masks are sampled.
    pub fn forward(
        &self,
        batch: &Tensor4<F>,
        mode: Mode,
        mcdo: bool,
        rng: &mut Prng,
    ) -> Result<ForwardOutput<F>> {
        let dropout = if mode == Mode::Train || mcdo {
            DropoutMode::Sample { rate_override: None }
        } else {
            DropoutMode::Identity
        };
        let trace = self.trace(batch, dropout, rng)?;
        Ok(self.output_of(trace))
    }

    /// Deterministic eval-mode pass.
    pub fn forward_eval(&self, batch: &Tensor4<F>) -> Result<ForwardOutput<F>> {
        // The rng is never drawn from under DropoutMode::Identity.
        let mut unused = Prng::new(0);
        let trace = self.trace(batch, DropoutMode::Identity, &mut unused)?;
        Ok(self.output_of(trace))
    }

    /// Logits only, deterministic eval mode.
    pub fn logits_eval(&self, batch: &Tensor4<F>) -> Result<Matrix<F>> {
        Ok(self.forward_eval(batch)?.logits)
    }

    fn output_of(&self, mut trace: Trace<F>) -> ForwardOutput<F> {
        let n = trace.batch;
        let logits = trace.acts.pop().expect("logits");
        let pen = trace.acts.pop().expect("penultimate");
        let d = pen.len() / n.max(1);
        ForwardOutput {
            logits: Matrix::new(n, self.arch.classes, logits),
            penultimate: Matrix::new(n, d, pen),
        }
    }

    pub(crate) fn trace(&self, batch: &Tensor4<F>, dropout: DropoutMode, rng: &mut Prng) -> Result<Trace<F>> {
        let [n, c, h, w] = batch.shape();
        if [c, h, w] != self.arch.input {
            return Err(LdlError::dim(
                "network input",
                format!("{:?}", self.arch.input),
                format!("{:?}", [c, h, w]),
            ));
        }
        let layers = &self.arch.layers;
        let mut acts: Vec<Vec<F>> = Vec::with_capacity(layers.len() + 1);
        let mut aux = Vec::with_capacity(layers.len());
        acts.push(batch.data().to_vec());

        for (i, layer) in layers.iter().enumerate() {
            let inp_shape = self.shapes[i];
            let out_shape = self.shapes[i + 1];
            let x = &acts[i];
            let p = &self.params.layers[i];
            let (y, a) = match *layer {
                LayerSpec::Dense { out } => {
                    let inp = inp_shape.len();
                    let mut y = Vec::with_capacity(n * out);
                    for _ in 0..n {
                        y.extend_from_slice(&p.bias);
                    }
                    F::gemm(
                        n,
                        inp,
                        out,
                        F::ONE,
                        x,
                        inp,
                        1,
                        &p.weight,
                        1,
                        inp,
                        F::ONE,
                        &mut y,
                        out,
                        1,
                    );
                    (y, Aux::None)
                }
                LayerSpec::Conv3x3 { out_channels } => {
                    let ActShape::Spatial { c: ic, h, w } = inp_shape else {
                        unreachable!()
                    };
                    conv_forward(x, n, ic, h, w, out_channels, &p.weight, &p.bias)
                }
                LayerSpec::Relu => (
                    x.iter().map(|&v| if v > F::ZERO { v } else { F::ZERO }).collect(),
                    Aux::None,
                ),
                LayerSpec::MaxPool2 => {
                    let ActShape::Spatial { c, h, w } = inp_shape else {
                        unreachable!()
                    };
                    let (y, idx) = pool_forward(x, n, c, h, w);
                    (y, Aux::Argmax(idx))
                }
                LayerSpec::Dropout { rate } => {
                    let rate = match dropout {
                        DropoutMode::Identity => 0.0,
                        DropoutMode::Sample { rate_override } => rate_override.unwrap_or(rate),
                    };
                    if rate <= 0.0 {
                        (x.clone(), Aux::None)
                    } else {
                        let keep = 1.0 - rate;
                        let scale = F::from_f64(1.0 / keep);
                        let mask: Vec<F> = (0..x.len())
                            .map(|_| if rng.bernoulli(keep) { scale } else { F::ZERO })
                            .collect();
                        let y = x.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
                        (y, Aux::Mask(mask))
                    }
                }
            };
            debug_assert_eq!(y.len(), n * out_shape.len());
            acts.push(y);
            aux.push(a);
        }
        Ok(Trace { batch: n, acts, aux })
    }

    /// Gradients of the loss with respect to all parameters, given
    /// `dlogits` = ∂loss/∂logits (N×K, row-major).
    pub(crate) fn backward(&self, trace: &Trace<F>, dlogits: &[F]) -> ParamBuffers<F> {
        let n = trace.batch;
        let mut grads = ParamBuffers::zeros_like(&self.params);
        let mut dy = dlogits.to_vec();
        for i in (0..self.arch.layers.len()).rev() {
            let x = &trace.acts[i];
            let inp_shape = self.shapes[i];
            let p = &self.params.layers[i];
            let need_dx = i > 0;
            let dx = match (self.arch.layers[i], &trace.aux[i]) {
                (LayerSpec::Dense { out }, _) => {
                    let inp = inp_shape.len();
                    let g = &mut grads.layers[i];
                    F::gemm(
                        out,
                        n,
                        inp,
                        F::ONE,
                        &dy,
                        1,
                        out,
                        x,
                        inp,
                        1,
                        F::ZERO,
                        &mut g.weight,
                        inp,
                        1,
                    );
                    for row in dy.chunks(out) {
                        for (b, &d) in g.bias.iter_mut().zip(row) {
                            *b += d;
                        }
                    }
                    if need_dx {
                        let mut dx = vec![F::ZERO; n * inp];
                        F::gemm(
                            n,
                            out,
                            inp,
                            F::ONE,
                            &dy,
                            out,
                            1,
                            &p.weight,
                            inp,
                            1,
                            F::ZERO,
                            &mut dx,
                            inp,
                            1,
                        );
                        dx
                    } else {
                        Vec::new()
                    }
                }
                (LayerSpec::Conv3x3 { out_channels }, Aux::Cols(cols)) => {
                    let ActShape::Spatial { c: ic, h, w } = inp_shape else {
                        unreachable!()
                    };
                    let g = &mut grads.layers[i];
                    conv_backward(
                        &dy,
                        cols,
                        n,
                        ic,
                        h,
                        w,
                        out_channels,
                        &p.weight,
                        &mut g.weight,
                        &mut g.bias,
                        need_dx,
                    )
                }
                (LayerSpec::Relu, _) => dy
                    .iter()
                    .zip(x)
                    .map(|(&d, &v)| if v > F::ZERO { d } else { F::ZERO })
                    .collect(),
                (LayerSpec::MaxPool2, Aux::Argmax(idx)) => {
                    let in_len = inp_shape.len();
                    let out_len = dy.len() / n.max(1);
                    let mut dx = vec![F::ZERO; n * in_len];
                    for s in 0..n {
                        for o in 0..out_len {
                            dx[s * in_len + idx[s * out_len + o] as usize] += dy[s * out_len + o];
                        }
                    }
                    dx
                }
                (LayerSpec::Dropout { .. }, Aux::Mask(mask)) => {
                    dy.iter().zip(mask).map(|(&d, &m)| d * m).collect()
                }
                (LayerSpec::Dropout { .. }, _) => dy,
                (layer, _) => unreachable!("trace/layer mismatch for {layer:?}"),
            };
            dy = dx;
        }
        grads
    }
}

fn he_normal<F: Real>(count: usize, fan_in: usize, rng: &mut Prng) -> Vec<F> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..count).map(|_| F::from_f64(rng.normal() * std)).collect()
}

#[allow(clippy::too_many_arguments)]
fn conv_forward<F: Real>(
    x: &[F],
    n: usize,
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    kernels: &[F],
    bias: &[F],
) -> (Vec<F>, Aux<F>) {
    let hw = h * w;
    let ck = ic * 9;
    let mut cols = vec![F::ZERO; n * ck * hw];
    let mut y = vec![F::ZERO; n * oc * hw];
    for s in 0..n {
        let xs = &x[s * ic * hw..(s + 1) * ic * hw];
        let cs = &mut cols[s * ck * hw..(s + 1) * ck * hw];
        im2col(xs, ic, h, w, cs);
        let ys = &mut y[s * oc * hw..(s + 1) * oc * hw];
        for (o, row) in ys.chunks_mut(hw).enumerate() {
            row.iter_mut().for_each(|v| *v = bias[o]);
        }
        F::gemm(oc, ck, hw, F::ONE, kernels, ck, 1, cs, hw, 1, F::ONE, ys, hw, 1);
    }
    (y, Aux::Cols(cols))
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<F: Real>(
    dy: &[F],
    cols: &[F],
    n: usize,
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    kernels: &[F],
    dk: &mut [F],
    db: &mut [F],
    need_dx: bool,
) -> Vec<F> {
    let hw = h * w;
    let ck = ic * 9;
    let mut dx = if need_dx {
        vec![F::ZERO; n * ic * hw]
    } else {
        Vec::new()
    };
    let mut dcols = vec![F::ZERO; ck * hw];
    for s in 0..n {
        let dys = &dy[s * oc * hw..(s + 1) * oc * hw];
        let cs = &cols[s * ck * hw..(s + 1) * ck * hw];
        F::gemm(oc, hw, ck, F::ONE, dys, hw, 1, cs, 1, hw, F::ONE, dk, ck, 1);
        for (o, row) in dys.chunks(hw).enumerate() {
            for &v in row {
                db[o] += v;
            }
        }
        if need_dx {
            F::gemm(
                ck,
                oc,
                hw,
                F::ONE,
                kernels,
                1,
                ck,
                dys,
                hw,
                1,
                F::ZERO,
                &mut dcols,
                hw,
                1,
            );
            col2im(&dcols, ic, h, w, &mut dx[s * ic * hw..(s + 1) * ic * hw]);
        }
    }
    dx
}

fn im2col<F: Real>(x: &[F], ic: usize, h: usize, w: usize, cols: &mut [F]) {
    let hw = h * w;
    for c in 0..ic {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - 1;
                    for ox in 0..w {
                        let ix = ox as isize + kx as isize - 1;
                        row[oy * w + ox] = if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                            x[c * hw + iy as usize * w + ix as usize]
                        } else {
                            F::ZERO
                        };
                    }
                }
            }
        }
    }
}

fn col2im<F: Real>(cols: &[F], ic: usize, h: usize, w: usize, dx: &mut [F]) {
    let hw = h * w;
    for c in 0..ic {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((c * 9) + ky * 3 + kx) * hw..][..hw];
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..w {
                        let ix = ox as isize + kx as isize - 1;
                        if ix >= 0 && ix < w as isize {
                            dx[c * hw + iy as usize * w + ix as usize] += row[oy * w + ox];
                        }
                    }
                }
            }
        }
    }
}

fn pool_forward<F: Real>(x: &[F], n: usize, c: usize, h: usize, w: usize) -> (Vec<F>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let in_len = c * h * w;
    let out_len = c * oh * ow;
    let mut y = Vec::with_capacity(n * out_len);
    let mut idx = Vec::with_capacity(n * out_len);
    for s in 0..n {
        let xs = &x[s * in_len..(s + 1) * in_len];
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = ch * h * w + (2 * oy) * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let j = ch * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                        if xs[j] > xs[best] {
                            best = j;
                        }
                    }
                    y.push(xs[best]);
                    idx.push(best as u32);
                }
            }
        }
    }
    (y, idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mlp() -> Architecture {
        Architecture::mlp([1, 16, 16], &[64], 4, 0.0)
    }

    #[test]
    fn init_is_deterministic() {
        let a: Network<f32> = Network::init(&mlp(), &mut Prng::new(7)).unwrap();
        let b: Network<f32> = Network::init(&mlp(), &mut Prng::new(7)).unwrap();
        assert_eq!(a, b);
        let c: Network<f32> = Network::init(&mlp(), &mut Prng::new(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_start_at_zero() {
        let net: Network<f32> = Network::init(&mlp(), &mut Prng::new(7)).unwrap();
        let head = net.params().layers.last().unwrap();
        assert_eq!(head.bias, vec![0.0; 4]);
        assert_eq!(head.weight.len(), 64 * 4);
    }

    #[test]
    fn conv_output_matches_direct_convolution() {
        let arch = Architecture {
            input: [2, 5, 4],
            classes: 2,
            layers: vec![
                LayerSpec::Conv3x3 { out_channels: 3 },
                LayerSpec::Dense { out: 2 },
            ],
        };
        let mut rng = Prng::new(1);
        let net: Network<f64> = Network::init(&arch, &mut rng).unwrap();
        let x: Vec<f64> = (0..2 * 2 * 5 * 4).map(|_| rng.normal()).collect();
        let t = Tensor4::from_vec([2, 2, 5, 4], x.clone()).unwrap();
        let trace = net.trace(&t, DropoutMode::Identity, &mut rng).unwrap();
        let got = &trace.acts[1];
        let k = &net.params().layers[0].weight;
        for s in 0..2 {
            for o in 0..3 {
                for y in 0..5 {
                    for xx in 0..4 {
                        let mut acc = 0.0;
                        for c in 0..2 {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let iy = y as isize + ky as isize - 1;
                                    let ix = xx as isize + kx as isize - 1;
                                    if (0..5).contains(&iy) && (0..4).contains(&ix) {
                                        acc += k[((o * 2 + c) * 3 + ky) * 3 + kx]
                                            * x[((s * 2 + c) * 5 + iy as usize) * 4 + ix as usize];
                                    }
                                }
                            }
                        }
                        let v = got[((s * 3 + o) * 5 + y) * 4 + xx];
                        assert!((v - acc).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let mut net: Network<f32> = Network::init(&mlp(), &mut Prng::new(2)).unwrap();
        net.zero_head();
        let x = Tensor4::from_vec([3, 1, 16, 16], vec![0.5; 3 * 256]).unwrap();
        let out = net.forward_eval(&x).unwrap();
        assert!(out.logits.data.iter().all(|&v| v == 0.0));
        assert_eq!(out.penultimate.cols, 64);
    }

    #[test]
    fn zero_rate_mcdo_matches_eval() {
        let arch = Architecture::mlp([1, 4, 4], &[8], 3, 0.0);
        let mut arch0 = arch.clone();
        arch0.layers.insert(2, LayerSpec::Dropout { rate: 0.0 });
        let net: Network<f32> = Network::init(&arch0, &mut Prng::new(3)).unwrap();
        let x = Tensor4::from_vec([2, 1, 4, 4], (0..32).map(|v| v as f32 / 10.0).collect()).unwrap();
        let a = net.forward(&x, Mode::Eval, true, &mut Prng::new(9)).unwrap();
        let b = net.forward(&x, Mode::Eval, false, &mut Prng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_mode_reseeded_is_reproducible() {
        let arch = Architecture::mlp([1, 4, 4], &[16], 3, 0.5);
        let net: Network<f32> = Network::init(&arch, &mut Prng::new(3)).unwrap();
        let x = Tensor4::from_vec([2, 1, 4, 4], (0..32).map(|v| v as f32 / 10.0).collect()).unwrap();
        let a = net.forward(&x, Mode::Train, false, &mut Prng::new(5)).unwrap();
        let b = net.forward(&x, Mode::Train, false, &mut Prng::new(5)).unwrap();
        assert_eq!(a, b);
        let e1 = net.forward_eval(&x).unwrap();
        let e2 = net.forward_eval(&x).unwrap();
        assert_eq!(e1, e2);
        assert_ne!(a.logits, e1.logits);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let net: Network<f32> = Network::init(&mlp(), &mut Prng::new(2)).unwrap();
        let x = Tensor4::<f32>::zeros([1, 1, 8, 8]);
        assert!(matches!(net.forward_eval(&x), Err(LdlError::Dimension { .. })));
    }
}
