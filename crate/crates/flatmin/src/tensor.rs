//! Row-major dense tensor of `f64` values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    /// Build a tensor, checking that the value count matches the dims and
    /// every entry is finite.
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expect: usize = dims.iter().product();
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-sized dimension in {dims:?}")));
        }
        if values.len() != expect {
            return Err(Error::Shape(format!(
                "{} values for dims {dims:?} (need {expect})",
                values.len()
            )));
        }
        if !crate::numeric::all_finite(&values) {
            return Err(Error::NonFinite { context: "tensor construction".into() });
        }
        Ok(Self { dims, values })
    }

    /// Two-dimensional convenience constructor.
    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        Self { dims, values: vec![0.0; n] }
    }

    /// Internal constructor for computed values; skips the finiteness scan
    /// (callers validate where the contract requires it).
    pub(crate) fn from_computed(dims: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), values.len());
        Self { dims, values }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of rows (first dimension).
    pub fn rows(&self) -> usize {
        self.dims[0]
    }

    /// Row width for 2-d tensors.
    pub fn cols(&self) -> usize {
        debug_assert_eq!(self.dims.len(), 2);
        self.dims[1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.cols();
        &self.values[i * w..(i + 1) * w]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        assert!(DenseTensor::new(vec![2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DenseTensor::new(vec![2], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn row_access() {
        let t = DenseTensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0]);
    }
}
