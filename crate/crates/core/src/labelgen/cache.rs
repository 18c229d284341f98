//! `LDLZ` label cache files.
//!
//! ```text
//! "LDLZ" | version u32 = 1 | samples u32 | classes u32 | f32 × samples·classes (row-major)
//! ```
//! Files are named by a key derived from the dataset hash and the teacher bank hash.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::binio::{to_u32, Reader, Writer};
use crate::error::{LdlError, Result};
use crate::nn::Matrix;

pub const LABEL_MAGIC: &[u8; 4] = b"LDLZ";
pub const LABEL_VERSION: u32 = 1;

pub fn encode_labels(labels: &Matrix<f64>) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.bytes(LABEL_MAGIC);
    w.u32(LABEL_VERSION);
    w.u32(to_u32(labels.rows, "sample count")?);
    w.u32(to_u32(labels.cols, "class count")?);
    let values: Vec<f32> = labels.data.iter().map(|&v| v as f32).collect();
    w.f32s(&values);
    Ok(w.buf)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Matrix<f64>> {
    let mut r = Reader::new(bytes);
    r.magic(LABEL_MAGIC)?;
    r.version(LABEL_VERSION)?;
    let n = r.u32("sample count")? as usize;
    let k = r.u32("class count")? as usize;
    let count = n.checked_mul(k).ok_or_else(|| LdlError::Format {
        offset: r.pos(),
        detail: "label block length overflows".into(),
    })?;
    let values = r.f32_vec(count, "label block")?;
    r.finish()?;
    Ok(Matrix::new(n, k, values.into_iter().map(f64::from).collect()))
}

/// Cache key for labels of `dataset_hash` produced by `bank_hash`.
pub fn cache_key(dataset_hash: &str, bank_hash: &str) -> String {
    let mut h = Sha256::new();
    h.update(dataset_hash.as_bytes());
    h.update(b"|");
    h.update(bank_hash.as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("labels_{}.ldlz", &key[..16.min(key.len())]))
}

/// Hex SHA-256 of label values as stored (f32 little-endian).
pub fn labels_hash(labels: &Matrix<f64>) -> String {
    let mut h = Sha256::new();
    for v in &labels.data {
        h.update((*v as f32).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Load cached labels for `key`, or compute, store and return them.
pub fn load_or_compute(
    dir: &Path,
    key: &str,
    compute: impl FnOnce() -> Result<Matrix<f64>>,
) -> Result<Matrix<f64>> {
    let path = cache_path(dir, key);
    if path.exists() {
        return decode_labels(&std::fs::read(&path)?);
    }
    let labels = compute()?;
    if labels.data.iter().any(|&v| (v as f32) as f64 != v) {
        return Err(LdlError::Contract(
            "cached labels must be exactly representable in f32".into(),
        ));
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(&path, encode_labels(&labels)?)?;
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Matrix<f64> {
        Matrix::new(
            2,
            3,
            [0.25f32, 0.5, 0.25, 0.1, 0.2, 0.7]
                .iter()
                .map(|&v| v as f64)
                .collect(),
        )
    }

    #[test]
    fn round_trip_bytes() {
        let bytes = encode_labels(&sample()).unwrap();
        let back = decode_labels(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!(encode_labels(&back).unwrap(), bytes);
    }

    #[test]
    fn rejects_magic_and_truncation() {
        let mut bytes = encode_labels(&sample()).unwrap();
        assert!(decode_labels(&bytes[..bytes.len() - 1]).is_err());
        bytes[2] = 0;
        assert!(matches!(
            decode_labels(&bytes),
            Err(LdlError::Format { offset: 0, .. })
        ));
    }

    #[test]
    fn second_lookup_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key("data", "bank");
        let a = load_or_compute(dir.path(), &key, || Ok(sample())).unwrap();
        let b = load_or_compute(dir.path(), &key, || panic!("should be cached")).unwrap();
        assert_eq!(a, b);
    }
}
