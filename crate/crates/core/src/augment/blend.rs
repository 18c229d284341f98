//! Batch blending: x̂ = Σ_i M_i ⊙ x_i, ŷ = Σ_i λ_i y_i.

use serde::{Deserialize, Serialize};

use super::beta::beta_sample;
use crate::error::{LdlError, Result};
use crate::nn::{Matrix, Tensor4};
use crate::rng::Prng;

/// Half-open pixel rectangle `[top, top+height) × [left, left+width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row)
            && (self.left..self.left + self.width).contains(&col)
    }
}

/// Compact description of one blending mask M_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaskDigest {
    /// The same weight at every pixel.
    Constant(f64),
    /// Weight one inside the union of disjoint rectangles, zero elsewhere.
    Rects(Vec<Rect>),
}

impl MaskDigest {
    /// Dense row-major `h × w` field.
    pub fn render(&self, h: usize, w: usize) -> Vec<f64> {
        match self {
            MaskDigest::Constant(v) => vec![*v; h * w],
            MaskDigest::Rects(rects) => {
                let mut m = vec![0.0; h * w];
                for r in rects {
                    for row in r.top..r.top + r.height {
                        m[row * w + r.left..row * w + r.left + r.width].fill(1.0);
                    }
                }
                m
            }
        }
    }
}

/// One blended batch. Slot `j` of sample `i` draws from batch index
/// `partners[i][j]` with label weight `lambdas[i][j]` and mask `masks[i][j]`.
/// Output pixel `(r, c)` of that slot reads source pixel
/// `(r + shifts[i][j].0, c + shifts[i][j].1)`; only RICAP crops are shifted.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendResult {
    pub x_hat: Tensor4<f32>,
    /// Reference mixed label; the online modes discard it.
    pub y_hat: Matrix<f64>,
    pub lambdas: Vec<Vec<f64>>,
    pub partners: Vec<Vec<usize>>,
    pub masks: Vec<Vec<MaskDigest>>,
    pub shifts: Vec<Vec<(isize, isize)>>,
}

impl BlendResult {
    /// Σ_j λ_j · labels[partner_j] per sample, for any per-sample label matrix.
    pub fn mix(&self, labels: &Matrix<f64>) -> Result<Matrix<f64>> {
        if labels.rows != self.partners.len() {
            return Err(LdlError::dim(
                "label rows vs batch",
                self.partners.len(),
                labels.rows,
            ));
        }
        Ok(mix_labels(labels, &self.partners, &self.lambdas))
    }

    /// Rebuild x̂ from the source batch using the mask digests.
    pub fn reconstruct(&self, batch: &Tensor4<f32>) -> Tensor4<f32> {
        let [n, c, h, w] = batch.shape();
        let mut out = Tensor4::zeros([n, c, h, w]);
        for i in 0..n {
            let mut acc = vec![0.0f64; c * h * w];
            for (slot, mask) in self.masks[i].iter().enumerate() {
                let m = mask.render(h, w);
                let src = batch.sample(self.partners[i][slot]);
                let (dr, dc) = self.shifts[i][slot];
                for p in (0..h * w).filter(|&p| m[p] != 0.0) {
                    let sr = ((p / w) as isize + dr) as usize;
                    let sc = ((p % w) as isize + dc) as usize;
                    for ch in 0..c {
                        acc[ch * h * w + p] += m[p] * src[ch * h * w + sr * w + sc] as f64;
                    }
                }
            }
            for (o, a) in out.sample_mut(i).iter_mut().zip(&acc) {
                *o = *a as f32;
            }
        }
        out
    }
}

fn check_inputs(batch: &Tensor4<f32>, labels: &Matrix<f64>) -> Result<()> {
    if batch.batch() == 0 {
        return Err(LdlError::Contract("cannot augment an empty batch".into()));
    }
    if labels.rows != batch.batch() {
        return Err(LdlError::dim("label rows vs batch", batch.batch(), labels.rows));
    }
    Ok(())
}

fn check_partners(n: usize, partners: &[usize]) -> Result<()> {
    if partners.len() != n {
        return Err(LdlError::dim("partner index list", n, partners.len()));
    }
    match partners.iter().find(|&&p| p >= n) {
        Some(&p) => Err(LdlError::Index { index: p, bound: n }),
        None => Ok(()),
    }
}

fn mix_labels(labels: &Matrix<f64>, partners: &[Vec<usize>], lambdas: &[Vec<f64>]) -> Matrix<f64> {
    let k = labels.cols;
    let mut y = Matrix::zeros(labels.rows, k);
    for i in 0..labels.rows {
        let row = y.row_mut(i);
        for (&p, &l) in partners[i].iter().zip(&lambdas[i]) {
            for (o, v) in row.iter_mut().zip(labels.row(p)) {
                *o += l * v;
            }
        }
    }
    y
}

/// Method `none`: x̂ and ŷ are exact copies.
pub fn identity(batch: &Tensor4<f32>, labels: &Matrix<f64>) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    let n = batch.batch();
    Ok(BlendResult {
        x_hat: batch.clone(),
        y_hat: labels.clone(),
        lambdas: vec![vec![1.0]; n],
        partners: (0..n).map(|i| vec![i]).collect(),
        masks: vec![vec![MaskDigest::Constant(1.0)]; n],
        shifts: vec![vec![(0, 0)]; n],
    })
}

/// mixup with one λ ~ Beta(α, α) per batch and a uniform partner permutation.
pub fn mixup(batch: &Tensor4<f32>, labels: &Matrix<f64>, alpha: f64, rng: &mut Prng) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    let lambda = beta_sample(alpha, rng)?;
    let perm = rng.permutation(batch.batch());
    mixup_with(batch, labels, lambda, &perm)
}

/// mixup with explicit λ and partner indices.
pub fn mixup_with(
    batch: &Tensor4<f32>,
    labels: &Matrix<f64>,
    lambda: f64,
    partners: &[usize],
) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    check_partners(batch.batch(), partners)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LdlError::Domain(format!("mixup λ = {lambda} outside [0, 1]")));
    }
    let n = batch.batch();
    let rest = 1.0 - lambda;
    let mut x_hat = batch.clone();
    for (i, &p) in partners.iter().enumerate() {
        let (a, b) = (batch.sample(i), batch.sample(p));
        for ((o, &u), &v) in x_hat.sample_mut(i).iter_mut().zip(a).zip(b) {
            *o = (lambda * u as f64 + rest * v as f64) as f32;
        }
    }
    let partners: Vec<Vec<usize>> = partners.iter().enumerate().map(|(i, &p)| vec![i, p]).collect();
    let lambdas = vec![vec![lambda, rest]; n];
    Ok(BlendResult {
        y_hat: mix_labels(labels, &partners, &lambdas),
        x_hat,
        lambdas,
        partners,
        masks: vec![vec![MaskDigest::Constant(lambda), MaskDigest::Constant(rest)]; n],
        shifts: vec![vec![(0, 0); 2]; n],
    })
}

/// The CutMix box: side lengths `floor(W·√(1−λ₀))` and `floor(H·√(1−λ₀))`,
/// centre uniform over the pixel grid, edges `centre ± side/2` (integer
/// halving) clipped to the image.
pub fn cutmix_box(h: usize, w: usize, lambda0: f64, rng: &mut Prng) -> Rect {
    let scale = (1.0 - lambda0).max(0.0).sqrt();
    let cut_w = (w as f64 * scale) as usize;
    let cut_h = (h as f64 * scale) as usize;
    let cx = rng.below(w);
    let cy = rng.below(h);
    let x1 = cx.saturating_sub(cut_w / 2);
    let x2 = (cx + cut_w / 2).min(w);
    let y1 = cy.saturating_sub(cut_h / 2);
    let y2 = (cy + cut_h / 2).min(h);
    Rect {
        top: y1,
        left: x1,
        height: y2 - y1,
        width: x2 - x1,
    }
}

/// CutMix: one box and one partner permutation per batch; λ is the fraction
/// of pixels left untouched.
pub fn cutmix(batch: &Tensor4<f32>, labels: &Matrix<f64>, alpha: f64, rng: &mut Prng) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    let [n, _, h, w] = batch.shape();
    let lambda0 = beta_sample(alpha, rng)?;
    let perm = rng.permutation(n);
    let rect = cutmix_box(h, w, lambda0, rng);
    cutmix_with(batch, labels, rect, &perm)
}

/// Rectangles covering the image outside `cut`.
fn complement(h: usize, w: usize, cut: Rect) -> Vec<Rect> {
    if cut.area() == 0 {
        return vec![Rect {
            top: 0,
            left: 0,
            height: h,
            width: w,
        }];
    }
    let bottom = cut.top + cut.height;
    let right = cut.left + cut.width;
    [
        Rect {
            top: 0,
            left: 0,
            height: cut.top,
            width: w,
        },
        Rect {
            top: bottom,
            left: 0,
            height: h - bottom,
            width: w,
        },
        Rect {
            top: cut.top,
            left: 0,
            height: cut.height,
            width: cut.left,
        },
        Rect {
            top: cut.top,
            left: right,
            height: cut.height,
            width: w - right,
        },
    ]
    .into_iter()
    .filter(|r| r.area() > 0)
    .collect()
}

/// CutMix with an explicit (already clipped) box and partner indices.
pub fn cutmix_with(
    batch: &Tensor4<f32>,
    labels: &Matrix<f64>,
    cut: Rect,
    partners: &[usize],
) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    check_partners(batch.batch(), partners)?;
    let [n, c, h, w] = batch.shape();
    if cut.top + cut.height > h || cut.left + cut.width > w {
        return Err(LdlError::Domain(format!("box {cut:?} exceeds {h}×{w} image")));
    }
    let mut x_hat = batch.clone();
    for (i, &p) in partners.iter().enumerate() {
        let src = batch.sample(p);
        let dst = x_hat.sample_mut(i);
        for ch in 0..c {
            for row in cut.top..cut.top + cut.height {
                let start = ch * h * w + row * w + cut.left;
                dst[start..start + cut.width].copy_from_slice(&src[start..start + cut.width]);
            }
        }
    }
    let total = (h * w) as f64;
    let pasted = cut.area() as f64 / total;
    let kept = (h * w - cut.area()) as f64 / total;
    let partners: Vec<Vec<usize>> = partners.iter().enumerate().map(|(i, &p)| vec![i, p]).collect();
    let lambdas = vec![vec![kept, pasted]; n];
    let masks = vec![
        vec![
            MaskDigest::Rects(complement(h, w, cut)),
            MaskDigest::Rects(vec![cut])
        ];
        n
    ];
    Ok(BlendResult {
        y_hat: mix_labels(labels, &partners, &lambdas),
        x_hat,
        lambdas,
        partners,
        masks,
        shifts: vec![vec![(0, 0); 2]; n],
    })
}

/// Random draws that fully determine one RICAP blend.
#[derive(Debug, Clone, PartialEq)]
pub struct RicapGeometry {
    /// Boundary position: quadrant 0 is rows `[0, h)`, cols `[0, w)`.
    pub w: usize,
    pub h: usize,
    /// Partner permutation per quadrant.
    pub partners: [Vec<usize>; 4],
    /// Top-left (row, col) of the crop taken from each partner.
    pub offsets: [(usize, usize); 4],
}

impl RicapGeometry {
    /// Quadrant placements in the output image, in slot order.
    pub fn quadrants(&self, img_h: usize, img_w: usize) -> [Rect; 4] {
        let (w, h) = (self.w, self.h);
        [
            Rect {
                top: 0,
                left: 0,
                height: h,
                width: w,
            },
            Rect {
                top: 0,
                left: w,
                height: h,
                width: img_w - w,
            },
            Rect {
                top: h,
                left: 0,
                height: img_h - h,
                width: w,
            },
            Rect {
                top: h,
                left: w,
                height: img_h - h,
                width: img_w - w,
            },
        ]
    }
}

pub fn ricap_geometry(n: usize, h: usize, w: usize, alpha: f64, rng: &mut Prng) -> Result<RicapGeometry> {
    let bw = (w as f64 * beta_sample(alpha, rng)?).round_ties_even() as usize;
    let bh = (h as f64 * beta_sample(alpha, rng)?).round_ties_even() as usize;
    let mut geo = RicapGeometry {
        w: bw.min(w),
        h: bh.min(h),
        partners: Default::default(),
        offsets: [(0, 0); 4],
    };
    for (k, q) in geo.quadrants(h, w).into_iter().enumerate() {
        geo.partners[k] = rng.permutation(n);
        let row = rng.range_inclusive(0, h - q.height);
        let col = rng.range_inclusive(0, w - q.width);
        geo.offsets[k] = (row, col);
    }
    Ok(geo)
}

/// RICAP: four crops from four independent permutations tile the image.
pub fn ricap(batch: &Tensor4<f32>, labels: &Matrix<f64>, alpha: f64, rng: &mut Prng) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    let [n, _, h, w] = batch.shape();
    let geo = ricap_geometry(n, h, w, alpha, rng)?;
    ricap_with(batch, labels, &geo)
}

pub fn ricap_with(batch: &Tensor4<f32>, labels: &Matrix<f64>, geo: &RicapGeometry) -> Result<BlendResult> {
    check_inputs(batch, labels)?;
    let [n, c, h, w] = batch.shape();
    if geo.w > w || geo.h > h {
        return Err(LdlError::Domain(format!(
            "boundary ({}, {}) outside {h}×{w} image",
            geo.w, geo.h
        )));
    }
    let quads = geo.quadrants(h, w);
    for (k, (q, &(r0, c0))) in quads.iter().zip(&geo.offsets).enumerate() {
        check_partners(n, &geo.partners[k])?;
        if r0 + q.height > h || c0 + q.width > w {
            return Err(LdlError::Domain(format!(
                "crop {k} at ({r0}, {c0}) leaves the image"
            )));
        }
    }
    let mut x_hat = Tensor4::zeros([n, c, h, w]);
    for i in 0..n {
        let dst = x_hat.sample_mut(i);
        for (k, q) in quads.iter().enumerate() {
            let src = batch.sample(geo.partners[k][i]);
            let (r0, c0) = geo.offsets[k];
            for ch in 0..c {
                for dr in 0..q.height {
                    let s = ch * h * w + (r0 + dr) * w + c0;
                    let d = ch * h * w + (q.top + dr) * w + q.left;
                    dst[d..d + q.width].copy_from_slice(&src[s..s + q.width]);
                }
            }
        }
    }
    let total = (h * w) as f64;
    let weights: Vec<f64> = quads.iter().map(|q| q.area() as f64 / total).collect();
    let partners: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..4).map(|k| geo.partners[k][i]).collect())
        .collect();
    let lambdas = vec![weights; n];
    let masks = vec![
        quads
            .iter()
            .map(|&q| MaskDigest::Rects(vec![q]))
            .collect::<Vec<_>>();
        n
    ];
    let shift: Vec<(isize, isize)> = quads
        .iter()
        .zip(&geo.offsets)
        .map(|(q, &(r0, c0))| (r0 as isize - q.top as isize, c0 as isize - q.left as isize))
        .collect();
    Ok(BlendResult {
        y_hat: mix_labels(labels, &partners, &lambdas),
        x_hat,
        lambdas,
        partners,
        masks,
        shifts: vec![shift; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelgen::one_hot_matrix;

    fn batch(n: usize, h: usize, w: usize) -> Tensor4<f32> {
        let mut r = Prng::new(21);
        Tensor4::from_vec(
            [n, 2, h, w],
            (0..n * 2 * h * w).map(|_| r.normal() as f32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn mixup_label_example() {
        let x = batch(2, 4, 4);
        let y = one_hot_matrix(&[0, 2], 3).unwrap();
        let b = mixup_with(&x, &y, 0.3, &[1, 0]).unwrap();
        let row = b.y_hat.row(0);
        assert!((row[0] - 0.3).abs() < 1e-15 && row[1] == 0.0 && (row[2] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mixup_lambda_one_is_identity() {
        let x = batch(3, 4, 4);
        let y = one_hot_matrix(&[0, 1, 2], 3).unwrap();
        let b = mixup_with(&x, &y, 1.0, &[2, 0, 1]).unwrap();
        assert_eq!(b.x_hat, x);
        assert_eq!(b.y_hat, y);
    }

    #[test]
    fn mixup_half_of_zeros_and_ones() {
        let mut data = vec![0.0f32; 16];
        data.extend(vec![1.0f32; 16]);
        let x = Tensor4::from_vec([2, 1, 4, 4], data).unwrap();
        let y = one_hot_matrix(&[0, 1], 2).unwrap();
        let b = mixup_with(&x, &y, 0.5, &[1, 0]).unwrap();
        assert!(b.x_hat.sample(0).iter().all(|&v| v == 0.5));
    }

    #[test]
    fn cutmix_area_example() {
        let x = batch(2, 16, 16);
        let y = one_hot_matrix(&[0, 1], 2).unwrap();
        let cut = Rect {
            top: 3,
            left: 5,
            height: 8,
            width: 8,
        };
        let b = cutmix_with(&x, &y, cut, &[1, 0]).unwrap();
        assert_eq!(b.lambdas[0], vec![0.75, 0.25]);
        let changed = (0..256)
            .filter(|&p| b.x_hat.sample(0)[p] == x.sample(1)[p] && b.x_hat.sample(0)[p] != x.sample(0)[p])
            .count();
        assert_eq!(changed, 64);
    }

    #[test]
    fn cutmix_degenerate_boxes() {
        let x = batch(2, 8, 8);
        let y = one_hot_matrix(&[0, 1], 2).unwrap();
        let empty = cutmix_with(
            &x,
            &y,
            Rect {
                top: 2,
                left: 2,
                height: 0,
                width: 5,
            },
            &[1, 0],
        )
        .unwrap();
        assert_eq!(empty.x_hat, x);
        assert_eq!(empty.lambdas[0][0], 1.0);
        let full = cutmix_with(
            &x,
            &y,
            Rect {
                top: 0,
                left: 0,
                height: 8,
                width: 8,
            },
            &[1, 0],
        )
        .unwrap();
        assert_eq!(full.x_hat.sample(0), x.sample(1));
        assert_eq!(full.lambdas[0][0], 0.0);
    }

    #[test]
    fn cutmix_box_is_clipped() {
        let mut r = Prng::new(3);
        for _ in 0..2000 {
            let l = r.uniform();
            let b = cutmix_box(16, 12, l, &mut r);
            assert!(b.top + b.height <= 16 && b.left + b.width <= 12);
        }
    }

    #[test]
    fn ricap_area_example() {
        let x = batch(3, 16, 16);
        let y = one_hot_matrix(&[0, 1, 2], 3).unwrap();
        let geo = RicapGeometry {
            w: 4,
            h: 12,
            partners: [vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1], vec![0, 2, 1]],
            offsets: [(0, 0), (2, 3), (7, 9), (10, 1)],
        };
        let b = ricap_with(&x, &y, &geo).unwrap();
        assert_eq!(b.lambdas[0], vec![0.1875, 0.5625, 0.0625, 0.1875]);
        b.assert_crops_match(&x, &geo);
    }

    #[test]
    fn ricap_full_boundary() {
        let x = batch(2, 6, 6);
        let y = one_hot_matrix(&[0, 1], 2).unwrap();
        let geo = RicapGeometry {
            w: 6,
            h: 6,
            partners: [vec![0, 1], vec![1, 0], vec![0, 1], vec![1, 0]],
            offsets: [(0, 0); 4],
        };
        let b = ricap_with(&x, &y, &geo).unwrap();
        assert_eq!(b.lambdas[0], vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.x_hat, x);
    }

    impl BlendResult {
        /// Every output pixel of a RICAP blend equals the matching pixel of its crop source.
        fn assert_crops_match(&self, x: &Tensor4<f32>, geo: &RicapGeometry) {
            let [n, c, h, w] = x.shape();
            for i in 0..n {
                for (k, q) in geo.quadrants(h, w).iter().enumerate() {
                    let (r0, c0) = geo.offsets[k];
                    for ch in 0..c {
                        for dr in 0..q.height {
                            for dc in 0..q.width {
                                let got = self.x_hat.sample(i)[ch * h * w + (q.top + dr) * w + q.left + dc];
                                let want = x.sample(geo.partners[k][i])[ch * h * w + (r0 + dr) * w + c0 + dc];
                                assert_eq!(got, want);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let x = batch(2, 4, 4);
        let y = one_hot_matrix(&[0], 2).unwrap();
        assert!(matches!(
            mixup_with(&x, &y, 0.5, &[0, 1]),
            Err(LdlError::Dimension { .. })
        ));
        let y = one_hot_matrix(&[0, 1], 2).unwrap();
        assert!(matches!(
            mixup_with(&x, &y, 0.5, &[0, 2]),
            Err(LdlError::Index { .. })
        ));
    }
}
