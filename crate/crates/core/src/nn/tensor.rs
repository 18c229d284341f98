use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{LdlError, Result};

/// Dense row-major array of shape (batch, channels, height, width).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor4<F> {
    shape: [usize; 4],
    data: Vec<F>,
}

impl<F: Real> Tensor4<F> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![F::ZERO; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<F>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(LdlError::dim("tensor data", expected, data.len()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LdlError::Numeric(format!("non-finite tensor value at {pos}")));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Elements per sample (c·h·w).
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[F] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [F] {
        let len = self.sample_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    /// New tensor made of the listed samples, in order.
    pub fn gather(&self, indices: &[usize]) -> Self {
        let len = self.sample_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Self {
            shape: [indices.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }

    pub fn cast<G: Real>(&self) -> Tensor4<G> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|v| G::from_f64(v.to_f64())).collect(),
        }
    }
}

/// Row-major 2-D matrix used for logits, probabilities and activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Copy> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::ZERO; rows * cols],
        }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.to_f64()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(Tensor4::<f32>::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor4::<f32>::from_vec([1, 1, 1, 2], vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn gather_picks_samples() {
        let t = Tensor4::<f32>::from_vec([3, 1, 1, 2], vec![0., 1., 2., 3., 4., 5.]).unwrap();
        let g = t.gather(&[2, 0]);
        assert_eq!(g.shape(), [2, 1, 1, 2]);
        assert_eq!(g.data(), &[4., 5., 0., 1.]);
    }
}
