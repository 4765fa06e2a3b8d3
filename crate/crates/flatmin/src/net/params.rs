//! Flat parameter vector, its layout over layers, initialization, and the
//! binary snapshot format.
//!
//! Snapshot files are little-endian: magic `MSPV`, version `u32`, parameter
//! count `u64`, then that many `f64` values.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::spec::{LayerSpec, NetworkSpec};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"MSPV";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Parameter slices owned by one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerParams {
    Dense {
        fan_in: usize,
        fan_out: usize,
        /// (offset, len) of the row-major weight matrix (fan_in x fan_out).
        weights: (usize, usize),
        bias: Option<(usize, usize)>,
    },
    BatchNorm {
        dim: usize,
        gamma: (usize, usize),
        beta: (usize, usize),
    },
    /// Layer without trainable parameters.
    None,
}

/// Deterministic mapping from layer index to contiguous slices of the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    per_layer: Vec<LayerParams>,
    n: usize,
}

impl ParamLayout {
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut per_layer = Vec::with_capacity(spec.layers.len());
        let mut offset = 0usize;
        for layer in &spec.layers {
            match *layer {
                LayerSpec::Dense { fan_in, fan_out, bias } => {
                    let weights = (offset, fan_in * fan_out);
                    offset += weights.1;
                    let bias = if bias {
                        let b = (offset, fan_out);
                        offset += fan_out;
                        Some(b)
                    } else {
                        None
                    };
                    per_layer.push(LayerParams::Dense { fan_in, fan_out, weights, bias });
                }
                LayerSpec::Batchnorm { dim, .. } => {
                    let gamma = (offset, dim);
                    offset += dim;
                    let beta = (offset, dim);
                    offset += dim;
                    per_layer.push(LayerParams::BatchNorm { dim, gamma, beta });
                }
                LayerSpec::Relu | LayerSpec::SoftmaxCe { .. } => per_layer.push(LayerParams::None),
            }
        }
        Ok(Self { per_layer, n: offset })
    }

    /// Total parameter count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layer(&self, idx: usize) -> &LayerParams {
        &self.per_layer[idx]
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.per_layer
    }
}

/// Flat weight vector together with the layout that interprets it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<ParamLayout>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Arc<ParamLayout>) -> Result<Self> {
        if values.len() != layout.n() {
            return Err(Error::Shape(format!(
                "parameter vector has {} values, layout expects {}",
                values.len(),
                layout.n()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        Self { values: vec![0.0; layout.n()], layout }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    /// Replace the stored values, keeping the layout.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::Shape("parameter value count changed".into()));
        }
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn slice(&self, range: (usize, usize)) -> &[f64] {
        &self.values[range.0..range.0 + range.1]
    }

    /// Write the snapshot format to `w`.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a snapshot written by [`ParamVector::write_snapshot`], checking
    /// it matches `layout`.
    pub fn read_snapshot<R: Read>(r: &mut R, layout: Arc<ParamLayout>) -> Result<Self> {
        let err = |offset: u64, message: String| Error::Format {
            path: "<snapshot>".into(),
            offset,
            message,
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(err(0, format!("bad magic {magic:?}")));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != SNAPSHOT_VERSION {
            return Err(err(4, format!("unsupported version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let n = u64::from_le_bytes(u64buf) as usize;
        if n != layout.n() {
            return Err(err(8, format!("snapshot has {n} params, layout expects {}", layout.n())));
        }
        let mut values = vec![0.0f64; n];
        let mut fbuf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut fbuf)?;
            *v = f64::from_le_bytes(fbuf);
        }
        Self::new(values, layout)
    }
}

/// Glorot-style uniform initialization: dense weights uniform in
/// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, biases zero,
/// batch-norm scale one and shift zero. Deterministic per seed.
pub fn init_params(layout: &Arc<ParamLayout>, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0f64; layout.n()];
    for layer in layout.layers() {
        match layer {
            LayerParams::Dense { fan_in, fan_out, weights, .. } => {
                let bound = (6.0 / (*fan_in as f64 + *fan_out as f64)).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound)
                    .expect("valid uniform bounds");
                for v in &mut values[weights.0..weights.0 + weights.1] {
                    *v = dist.sample(&mut rng);
                }
                // biases stay zero
            }
            LayerParams::BatchNorm { gamma, .. } => {
                for v in &mut values[gamma.0..gamma.0 + gamma.1] {
                    *v = 1.0;
                }
                // beta stays zero
            }
            LayerParams::None => {}
        }
    }
    ParamVector { values, layout: Arc::clone(layout) }
}
