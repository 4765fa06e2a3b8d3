//! Network architecture description and its JSON form.
//!
//! The JSON schema is:
//!
//! ```json
//! {
//!   "input_dim": 784,
//!   "layers": [
//!     {"kind": "dense", "in": 784, "out": 128, "bias": true},
//!     {"kind": "batchnorm", "dim": 128},
//!     {"kind": "relu"},
//!     {"kind": "dense", "in": 128, "out": 10, "bias": true},
//!     {"kind": "softmax_ce", "classes": 10}
//!   ]
//! }
//! ```
//!
//! `batchnorm` accepts optional `momentum` (default 0.9) and
//! `variance_epsilon` (default 1e-5) fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BN_VARIANCE_EPSILON: f64 = 1e-5;

fn default_bias() -> bool {
    true
}
fn default_momentum() -> f64 {
    DEFAULT_BN_MOMENTUM
}
fn default_variance_epsilon() -> f64 {
    DEFAULT_BN_VARIANCE_EPSILON
}
#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_default_momentum(m: &f64) -> bool {
    *m == DEFAULT_BN_MOMENTUM
}
#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_default_variance_epsilon(e: &f64) -> bool {
    *e == DEFAULT_BN_VARIANCE_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        #[serde(rename = "in")]
        fan_in: usize,
        #[serde(rename = "out")]
        fan_out: usize,
        #[serde(default = "default_bias")]
        bias: bool,
    },
    Relu,
    Batchnorm {
        dim: usize,
        #[serde(default = "default_momentum", skip_serializing_if = "is_default_momentum")]
        momentum: f64,
        #[serde(
            default = "default_variance_epsilon",
            skip_serializing_if = "is_default_variance_epsilon"
        )]
        variance_epsilon: f64,
    },
    SoftmaxCe {
        classes: usize,
    },
}

impl LayerSpec {
    pub fn batchnorm(dim: usize) -> Self {
        LayerSpec::Batchnorm {
            dim,
            momentum: DEFAULT_BN_MOMENTUM,
            variance_epsilon: DEFAULT_BN_VARIANCE_EPSILON,
        }
    }

    pub fn dense(fan_in: usize, fan_out: usize) -> Self {
        LayerSpec::Dense { fan_in, fan_out, bias: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Check layer-to-layer dimension compatibility and output-layer rules.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Spec("input_dim must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Spec("network has no layers".into()));
        }
        let mut cur = self.input_dim;
        for (idx, layer) in self.layers.iter().enumerate() {
            let last = idx + 1 == self.layers.len();
            match *layer {
                LayerSpec::Dense { fan_in, fan_out, .. } => {
                    if fan_in == 0 || fan_out == 0 {
                        return Err(Error::Spec(format!("layer {idx}: zero fan in/out")));
                    }
                    if fan_in != cur {
                        return Err(Error::Spec(format!(
                            "layer {idx}: dense expects {fan_in} inputs but receives {cur}"
                        )));
                    }
                    cur = fan_out;
                }
                LayerSpec::Relu => {}
                LayerSpec::Batchnorm { dim, momentum, variance_epsilon } => {
                    if dim != cur {
                        return Err(Error::Spec(format!(
                            "layer {idx}: batchnorm dim {dim} but receives {cur}"
                        )));
                    }
                    if !(momentum > 0.0 && momentum < 1.0) {
                        return Err(Error::Spec(format!(
                            "layer {idx}: batchnorm momentum must be in (0,1), got {momentum}"
                        )));
                    }
                    if variance_epsilon <= 0.0 {
                        return Err(Error::Spec(format!(
                            "layer {idx}: variance_epsilon must be positive, got {variance_epsilon}"
                        )));
                    }
                }
                LayerSpec::SoftmaxCe { classes } => {
                    if !last {
                        return Err(Error::Spec(format!(
                            "layer {idx}: softmax_ce must be the final layer"
                        )));
                    }
                    if classes < 2 {
                        return Err(Error::Spec("softmax_ce needs at least 2 classes".into()));
                    }
                    if classes != cur {
                        return Err(Error::Spec(format!(
                            "layer {idx}: softmax_ce over {classes} classes but receives {cur}"
                        )));
                    }
                }
            }
        }
        match self.layers.last() {
            Some(LayerSpec::SoftmaxCe { .. }) => Ok(()),
            _ => Err(Error::Spec("final layer must be softmax_ce".into())),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::SoftmaxCe { classes }) => *classes,
            _ => 0,
        }
    }

    /// Fully-connected classifier: dense -> [batchnorm] -> relu blocks
    /// followed by the softmax output layer.
    pub fn fully_connected(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        batch_norm: bool,
    ) -> Self {
        let mut layers = Vec::new();
        let mut cur = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::dense(cur, h));
            if batch_norm {
                layers.push(LayerSpec::batchnorm(h));
            }
            layers.push(LayerSpec::Relu);
            cur = h;
        }
        layers.push(LayerSpec::dense(cur, classes));
        layers.push(LayerSpec::SoftmaxCe { classes });
        NetworkSpec { input_dim, layers }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_uses_documented_keys() {
        let spec = NetworkSpec::fully_connected(4, &[3], 2, true);
        let json = spec.to_json().unwrap();
        assert!(json.contains("\"kind\": \"dense\""));
        assert!(json.contains("\"in\": 4"));
        assert!(json.contains("\"kind\": \"batchnorm\""));
        assert!(json.contains("\"kind\": \"softmax_ce\""));
        // defaults are not serialized
        assert!(!json.contains("momentum"));
        let back = NetworkSpec::from_json(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_incompatible_dims() {
        let spec = NetworkSpec {
            input_dim: 4,
            layers: vec![LayerSpec::dense(5, 3), LayerSpec::SoftmaxCe { classes: 3 }],
        };
        assert!(matches!(spec.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn rejects_missing_output_layer() {
        let spec = NetworkSpec { input_dim: 4, layers: vec![LayerSpec::dense(4, 3)] };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rejects_bad_batchnorm_constants() {
        let spec = NetworkSpec {
            input_dim: 2,
            layers: vec![
                LayerSpec::Batchnorm { dim: 2, momentum: 1.0, variance_epsilon: 1e-5 },
                LayerSpec::dense(2, 2),
                LayerSpec::SoftmaxCe { classes: 2 },
            ],
        };
        assert!(spec.validate().is_err());
    }
}
