//! Fast-gradient-sign adversarial copies of a dataset.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{NetState, Network, ParamVector};

/// `features' = features + eta * sign(d loss / d features)`, labels
/// unchanged. Image-shaped datasets (pixel range `[0, 1]`) are clipped back
/// into `[0, 1]`; unconstrained feature spaces are left unclipped.
pub fn adversarial_examples(
    net: &Network,
    params: &ParamVector,
    state: &NetState,
    data: &Dataset,
    eta: f64,
) -> Result<Dataset> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be >= 0, got {eta}")));
    }
    let clip = data.image_shape().is_some();
    let mut features = Vec::with_capacity(data.len() * data.dim());
    let chunk = 512;
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let (inputs, labels) = data.rows_tensor(start, end);
        let grad = net.input_gradient(params, &inputs, labels, state)?;
        for (&v, &g) in inputs.values().iter().zip(grad.values()) {
            let step = eta * sign(g);
            let x = v + step;
            features.push(if clip { x.clamp(0.0, 1.0) } else { x });
        }
        start = end;
    }
    data.with_features(features)
}

fn sign(g: f64) -> f64 {
    if g > 0.0 {
        1.0
    } else if g < 0.0 {
        -1.0
    } else {
        0.0
    }
}
