//! Datasets: IDX ingestion, synthetic generation, augmentation, and
//! adversarial example construction.

pub mod adversarial;
pub mod augment;
pub mod idx;
pub mod synth;

pub use adversarial::adversarial_examples;
pub use augment::{augment, flip_horizontal, AugmentPolicy};
pub use idx::{load_idx, write_idx};
pub use synth::synth_gaussian;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// An in-memory classification dataset: `m` rows of `d` features plus an
/// integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u32>,
    m: usize,
    d: usize,
    classes: usize,
    image_shape: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(m: usize, d: usize, features: Vec<f64>, labels: Vec<u32>, classes: usize) -> Result<Self> {
        if features.len() != m * d {
            return Err(Error::Shape(format!(
                "{} feature values for {m} x {d} dataset",
                features.len()
            )));
        }
        if labels.len() != m {
            return Err(Error::Shape(format!("{} labels for {m} rows", labels.len())));
        }
        if classes < 2 {
            return Err(Error::Shape("dataset needs at least 2 classes".into()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range [0, {classes})")));
        }
        if !crate::numeric::all_finite(&features) {
            return Err(Error::NonFinite { context: "dataset features".into() });
        }
        Ok(Self { features, labels, m, d, classes, image_shape: None })
    }

    /// Record that each row is an `h` x `w` image (row-major pixels).
    pub fn with_image_shape(mut self, h: usize, w: usize) -> Result<Self> {
        if h * w != self.d {
            return Err(Error::Shape(format!(
                "image shape {h}x{w} does not cover {} features",
                self.d
            )));
        }
        self.image_shape = Some((h, w));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    /// Copy the given rows into a batch tensor plus label vector.
    pub fn gather(&self, indices: &[usize]) -> (DenseTensor, Vec<u32>) {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.feature_row(i));
            labels.push(self.labels[i]);
        }
        (DenseTensor::from_computed(vec![indices.len(), self.d], values), labels)
    }

    /// View of a contiguous row range as a batch tensor.
    pub fn rows_tensor(&self, start: usize, end: usize) -> (DenseTensor, &[u32]) {
        let values = self.features[start * self.d..end * self.d].to_vec();
        (
            DenseTensor::from_computed(vec![end - start, self.d], values),
            &self.labels[start..end],
        )
    }

    /// Rebuild with new feature values (same shape, labels, metadata).
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.m, self.d, features, self.labels.clone(), self.classes)?;
        out.image_shape = self.image_shape;
        Ok(out)
    }
}
