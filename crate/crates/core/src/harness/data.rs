//! Synthetic spatial-template dataset and the `LDLD` split format.
//!
//! ```text
//! "LDLD" | version u32 = 1 | n u32 | c u32 | h u32 | w u32 | classes u32
//!        | labels u32 × n | pixels f32 × n·c·h·w
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binio::{to_u32, Reader, Writer};
use crate::error::{LdlError, Result};
use crate::labelgen::one_hot_matrix;
use crate::nn::{Matrix, Tensor4};
use crate::rng::Prng;

pub const DATASET_MAGIC: &[u8; 4] = b"LDLD";
pub const DATASET_VERSION: u32 = 1;

fn default_grid() -> usize {
    16
}
fn default_channels() -> usize {
    1
}
fn default_jitter() -> usize {
    2
}
fn default_shared() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Image side G.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    pub classes: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Maximum template displacement in pixels along each axis.
    #[serde(default = "default_jitter")]
    pub jitter: usize,
    /// Weight of the pattern shared by classes living in the same quadrant.
    #[serde(default = "default_shared")]
    pub shared_weight: f64,
}

impl DatasetSpec {
    /// The bundled benchmark: 16×16, one channel.
    pub fn benchmark(
        classes: usize,
        n_train: usize,
        n_val: usize,
        n_test: usize,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        DatasetSpec {
            grid: default_grid(),
            channels: default_channels(),
            classes,
            n_train,
            n_val,
            n_test,
            noise_sigma,
            seed,
            jitter: default_jitter(),
            shared_weight: default_shared(),
        }
    }

    /// The bundled benchmark used for the directional calibration checks:
    /// ten classes, 5000/1000/2000 samples, noise σ = 1.
    pub fn bundled() -> Self {
        DatasetSpec::benchmark(10, 5000, 1000, 2000, 1.0, 7)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LdlError::Config(msg));
        if self.grid < 8 {
            return bad(format!("grid {} must be ≥ 8", self.grid));
        }
        if self.channels == 0 || self.classes < 2 {
            return bad("need ≥ 1 channel and ≥ 2 classes".into());
        }
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return bad("every split needs at least one sample".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise σ = {} must be ≥ 0", self.noise_sigma));
        }
        if self.jitter >= self.grid / 4 {
            return bad(format!("jitter {} must be < grid/4", self.jitter));
        }
        if !(0.0..=1.0).contains(&self.shared_weight) {
            return bad("shared_weight must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Side of the square class template.
    pub fn template_side(&self) -> usize {
        self.grid / 2 - 2
    }
}

/// One labelled split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub x: Tensor4<f32>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self) -> Result<Matrix<f64>> {
        one_hot_matrix(&self.labels, self.classes)
    }

    pub fn subset(&self, idx: &[usize]) -> Split {
        Split {
            x: self.x.gather(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

/// The test split. The runner opens it once, after training has finished.
#[derive(Debug, Clone, PartialEq)]
pub struct SealedSplit(Split);

impl SealedSplit {
    pub fn new(split: Split) -> Self {
        SealedSplit(split)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn open(&self) -> &Split {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: Split,
    pub val: Split,
    pub test: SealedSplit,
    /// Hex SHA-256 over the encoded train, val and test files.
    pub hash: String,
}

impl Dataset {
    pub fn shape(&self) -> [usize; 3] {
        [self.spec.channels, self.spec.grid, self.spec.grid]
    }
}

struct Templates {
    side: usize,
    /// Per class, `channels × side × side`.
    patterns: Vec<Vec<f64>>,
}

fn templates(spec: &DatasetSpec, rng: &mut Prng) -> Templates {
    let side = spec.template_side();
    let len = spec.channels * side * side;
    let shared: Vec<Vec<f64>> = (0..4).map(|_| (0..len).map(|_| rng.normal()).collect()).collect();
    let patterns = (0..spec.classes)
        .map(|k| {
            let a = spec.shared_weight;
            let b = (1.0 - a * a).sqrt();
            shared[k % 4].iter().map(|&s| a * s + b * rng.normal()).collect()
        })
        .collect();
    Templates { side, patterns }
}

fn render(spec: &DatasetSpec, t: &Templates, class: usize, rng: &mut Prng, out: &mut [f32]) {
    let g = spec.grid;
    let half = g / 2;
    let q = class % 4;
    let (qr, qc) = ((q / 2) * half + 1, (q % 2) * half + 1);
    let j = spec.jitter as isize;
    let shift = |base: usize, rng: &mut Prng| {
        let d = rng.range_inclusive(0, 2 * spec.jitter) as isize - j;
        (base as isize + d).clamp(0, (g - t.side) as isize) as usize
    };
    let top = shift(qr, rng);
    let left = shift(qc, rng);
    for v in out.iter_mut() {
        *v = (spec.noise_sigma * rng.normal()) as f32;
    }
    let pat = &t.patterns[class];
    for ch in 0..spec.channels {
        for r in 0..t.side {
            for c in 0..t.side {
                let o = ch * g * g + (top + r) * g + left + c;
                out[o] = (out[o] as f64 + pat[ch * t.side * t.side + r * t.side + c]) as f32;
            }
        }
    }
}

fn make_split(spec: &DatasetSpec, t: &Templates, n: usize, rng: &mut Prng) -> Split {
    let mut labels: Vec<usize> = (0..n).map(|i| i % spec.classes).collect();
    rng.shuffle(&mut labels);
    let mut x = Tensor4::zeros([n, spec.channels, spec.grid, spec.grid]);
    for (i, &c) in labels.iter().enumerate() {
        render(spec, t, c, rng, x.sample_mut(i));
    }
    Split {
        x,
        labels,
        classes: spec.classes,
    }
}

/// Generate all three splits. Each split draws from its own stream, so
/// changing one split size leaves the others untouched.
pub fn gen_synth(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let root = Prng::new(spec.seed);
    let t = templates(spec, &mut root.fork(0));
    let train = make_split(spec, &t, spec.n_train, &mut root.fork(1));
    let val = make_split(spec, &t, spec.n_val, &mut root.fork(2));
    let test = make_split(spec, &t, spec.n_test, &mut root.fork(3));
    let hash = hash_splits(&[&train, &val, &test])?;
    Ok(Dataset {
        spec: spec.clone(),
        train,
        val,
        test: SealedSplit(test),
        hash,
    })
}

pub fn encode_split(split: &Split) -> Result<Vec<u8>> {
    let [n, c, h, w] = split.x.shape();
    let mut wr = Writer::default();
    wr.bytes(DATASET_MAGIC);
    wr.u32(DATASET_VERSION);
    for (v, what) in [
        (n, "sample count"),
        (c, "channels"),
        (h, "height"),
        (w, "width"),
        (split.classes, "classes"),
    ] {
        wr.u32(to_u32(v, what)?);
    }
    let labels = split
        .labels
        .iter()
        .map(|&l| to_u32(l, "label"))
        .collect::<Result<Vec<u32>>>()?;
    wr.u32s(&labels);
    wr.f32s(split.x.data());
    Ok(wr.buf)
}

pub fn decode_split(bytes: &[u8]) -> Result<Split> {
    let mut r = Reader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    r.version(DATASET_VERSION)?;
    let n = r.u32("sample count")? as usize;
    let c = r.u32("channels")? as usize;
    let h = r.u32("height")? as usize;
    let w = r.u32("width")? as usize;
    let classes = r.u32("classes")? as usize;
    let at = r.pos();
    let labels: Vec<usize> = r
        .u32_vec(n, "label block")?
        .into_iter()
        .map(|l| l as usize)
        .collect();
    if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(LdlError::Format {
            offset: at + 4 * i,
            detail: format!("label {l} not below class count {classes}"),
        });
    }
    let count = [c, h, w]
        .iter()
        .try_fold(n, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| LdlError::Format {
            offset: r.pos(),
            detail: "pixel block length overflows".into(),
        })?;
    let data = r.f32_vec(count, "pixel block")?;
    r.finish()?;
    Ok(Split {
        x: Tensor4::from_vec([n, c, h, w], data)?,
        labels,
        classes,
    })
}

fn hash_splits(splits: &[&Split]) -> Result<String> {
    let mut h = Sha256::new();
    for s in splits {
        h.update(encode_split(s)?);
    }
    Ok(hex::encode(h.finalize()))
}

pub const SPLIT_FILES: [&str; 3] = ["train.ldld", "val.ldld", "test.ldld"];

/// Write `spec.json` and the three split files into `dir`.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("spec.json"), serde_json::to_vec_pretty(&ds.spec)?)?;
    let splits = [&ds.train, &ds.val, &ds.test.0];
    for (name, split) in SPLIT_FILES.iter().zip(splits) {
        std::fs::write(dir.join(name), encode_split(split)?)?;
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(LdlError::NotFound(path.to_path_buf()));
    }
    Ok(std::fs::read(path)?)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let spec: DatasetSpec = serde_json::from_slice(&read_file(&dir.join("spec.json"))?)?;
    let mut splits = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        splits.push(decode_split(&read_file(&dir.join(name))?)?);
    }
    let test = splits.pop().expect("three splits");
    let val = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");
    for s in [&train, &val, &test] {
        let [_, c, h, w] = s.x.shape();
        if [c, h, w] != [spec.channels, spec.grid, spec.grid] || s.classes != spec.classes {
            return Err(LdlError::dim(
                "split shape vs spec.json",
                format!("{:?}/{}", [spec.channels, spec.grid, spec.grid], spec.classes),
                format!("{:?}/{}", [c, h, w], s.classes),
            ));
        }
    }
    let hash = hash_splits(&[&train, &val, &test])?;
    Ok(Dataset {
        spec,
        train,
        val,
        test: SealedSplit(test),
        hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetSpec {
        DatasetSpec::benchmark(10, 103, 40, 40, 0.3, 5)
    }

    #[test]
    fn deterministic_bytes() {
        let a = gen_synth(&small()).unwrap();
        let b = gen_synth(&small()).unwrap();
        assert_eq!(encode_split(&a.train).unwrap(), encode_split(&b.train).unwrap());
        assert_eq!(a.hash, b.hash);
        let mut other = small();
        other.seed = 6;
        assert_ne!(gen_synth(&other).unwrap().hash, a.hash);
    }

    #[test]
    fn stratified_counts() {
        let ds = gen_synth(&small()).unwrap();
        let mut counts = [0usize; 10];
        ds.train.labels.iter().for_each(|&c| counts[c] += 1);
        let target = 103.0 / 10.0;
        assert!(
            counts.iter().all(|&c| (c as f64 - target).abs() <= 1.0),
            "{counts:?}"
        );
    }

    #[test]
    fn split_round_trip_and_errors() {
        let ds = gen_synth(&small()).unwrap();
        let bytes = encode_split(&ds.val).unwrap();
        let back = decode_split(&bytes).unwrap();
        assert_eq!(back, ds.val);
        assert_eq!(encode_split(&back).unwrap(), bytes);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_split(&bad),
            Err(LdlError::Format { offset: 0, .. })
        ));
        let err = decode_split(&bytes[..bytes.len() - 3]).unwrap_err().to_string();
        assert!(err.contains("pixel block"), "{err}");
    }

    #[test]
    fn saved_dataset_reloads_with_same_hash() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_synth(&small()).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn invalid_specs() {
        let mut s = small();
        s.grid = 6;
        assert!(matches!(gen_synth(&s), Err(LdlError::Config(_))));
        let mut s = small();
        s.n_val = 0;
        assert!(matches!(gen_synth(&s), Err(LdlError::Config(_))));
    }

    #[test]
    fn template_sits_in_its_quadrant() {
        let mut s = small();
        s.noise_sigma = 0.0;
        s.jitter = 0;
        let ds = gen_synth(&s).unwrap();
        let g = s.grid;
        for (i, &c) in ds.train.labels.iter().enumerate() {
            let img = ds.train.x.sample(i);
            let q = c % 4;
            let (r0, c0) = ((q / 2) * g / 2, (q % 2) * g / 2);
            for (p, &v) in img.iter().enumerate() {
                let (r, col) = (p / g, p % g);
                let inside = (r0..r0 + g / 2).contains(&r) && (c0..c0 + g / 2).contains(&col);
                if !inside {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
}
