//! Dense row-major `f64` arrays of rank 1 to 3.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 3 {
        return Err(Error::Rank(shape.len()));
    }
    if shape.contains(&0) {
        return Err(Error::EmptyExtent(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    /// Builds a tensor, validating shape, length and finiteness.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::DataLength {
                shape: shape.to_vec(),
                len: data.len(),
            });
        }
        let t = Tensor {
            shape: shape.to_vec(),
            data,
        };
        t.check_finite("Tensor::new")?;
        Ok(t)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    /// I.i.d. Gaussian draws, consuming `rng` in row-major order.
    pub fn randn(shape: &[usize], rng: &mut Rng, mean: f64, std: f64) -> Result<Self> {
        if !(std >= 0.0) {
            return Err(Error::InvalidArgument(format!("randn std {std} < 0")));
        }
        let n = check_shape(shape)?;
        let data = (0..n).map(|_| rng.normal(mean, std)).collect();
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Zeros with the shape of `self`.
    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Raw mutable access. Callers that write through this are responsible
    /// for keeping the values finite (see [`Tensor::check_finite`]).
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Row-major linear index of a multi-index.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, e)| i >= e) {
            return Err(Error::Shape {
                expected: self.shape.clone(),
                actual: index.to_vec(),
            });
        }
        Ok(index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &e)| acc * e + i))
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let k = self.offset(index)?;
        self.data[k] = value;
        Ok(())
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: shape.to_vec(),
                actual: self.shape.clone(),
            })
        }
    }

    pub fn reduce_mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t = Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        };
        t.check_finite("map")?;
        Ok(t)
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Tensor) -> Result<Self> {
        other.expect_shape(&self.shape)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// In-place `self += other`.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        other.expect_shape(&self.shape)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Number of rows of a rank-2 tensor (the leading extent in general).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Length of each row: product of the trailing extents.
    pub fn row_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    /// Slice of the `i`-th leading-axis row.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.row_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.row_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    /// Stacks equal-length rows into a `[rows.len(), len]` tensor.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let len = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * len);
        for r in rows {
            let r = r.as_ref();
            if r.len() != len {
                return Err(Error::Shape {
                    expected: vec![len],
                    actual: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Tensor::new(&[rows.len(), len], data)
    }

    /// Copies leading-axis rows `[start, end)` into a new tensor.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rows() {
            return Err(Error::InvalidArgument(format!(
                "row range {start}..{end} outside 0..{}",
                self.rows()
            )));
        }
        let n = self.row_len();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Ok(Tensor {
            shape,
            data: self.data[start * n..end * n].to_vec(),
        })
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::DataLength {
                shape: shape.to_vec(),
                len: self.data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }
}
