//! Forward and reverse passes over the fixed layer set.

use crate::error::{Error, Result};
use crate::net::params::LayerParams;
use crate::net::spec::LayerSpec;
use crate::net::{EvalMode, Forward, NetState, Network, ParamVector};
use crate::numeric::{
    column_sq_dev_pairwise, column_sums_pairwise, matmul, matmul_at_b_pairwise, matmul_bt,
};
use crate::tensor::DenseTensor;

/// Cached activations from one forward pass.
pub(crate) struct ForwardPass {
    /// Input matrix of each layer (batch x fan-in of that layer).
    pub layer_inputs: Vec<Vec<f64>>,
    /// Per batch-norm layer cache, in layer order.
    pub bn: Vec<BnCache>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub batch: usize,
    pub classes: usize,
    pub mode: EvalMode,
}

pub(crate) struct BnCache {
    /// Normalized pre-affine activations (batch x dim).
    pub xhat: Vec<f64>,
    /// 1 / sqrt(var + eps) actually used for normalization.
    pub istd: Vec<f64>,
}

/// Batch statistics gathered in train mode, ready for the EMA update:
/// (bn index, batch mean, batch variance).
type EmaUpdates = Vec<(usize, Vec<f64>, Vec<f64>)>;

pub(crate) fn into_forward(pass: ForwardPass) -> Forward {
    let probs = DenseTensor::from_computed(vec![pass.batch, pass.classes], pass.probs.clone());
    Forward { probs, pass }
}

fn ensure_finite(layer: usize, values: &[f64]) -> Result<()> {
    if crate::numeric::all_finite(values) {
        Ok(())
    } else {
        Err(Error::NumericOverflow { layer })
    }
}

pub(crate) fn run_forward(
    net: &Network,
    params: &ParamVector,
    inputs: &DenseTensor,
    mode: EvalMode,
    state: &NetState,
) -> Result<(ForwardPass, EmaUpdates)> {
    let spec = net.spec();
    if inputs.dims().len() != 2 || inputs.dims()[1] != spec.input_dim {
        return Err(Error::Shape(format!(
            "inputs must be (batch, {}), got {:?}",
            spec.input_dim,
            inputs.dims()
        )));
    }
    let batch = inputs.dims()[0];
    if batch == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let has_bn = spec.layers.iter().any(|l| matches!(l, LayerSpec::Batchnorm { .. }));
    if mode == EvalMode::Train && has_bn && batch < 2 {
        return Err(Error::InvalidBatch { got: batch });
    }

    let mut layer_inputs = Vec::with_capacity(spec.layers.len());
    let mut bn_caches = Vec::new();
    let mut ema = Vec::new();
    let mut cur = inputs.values().to_vec();
    let mut bn_index = 0usize;
    let mut logits = Vec::new();

    for (idx, layer) in spec.layers.iter().enumerate() {
        layer_inputs.push(cur.clone());
        match (layer, net.layout().layer(idx)) {
            (LayerSpec::Dense { fan_in, fan_out, .. }, LayerParams::Dense { weights, bias, .. }) => {
                let w = params.slice(*weights);
                let mut z = vec![0.0; batch * fan_out];
                matmul(batch, *fan_in, *fan_out, &cur, w, &mut z);
                if let Some(bias) = bias {
                    let b = params.slice(*bias);
                    for row in z.chunks_mut(*fan_out) {
                        for (zv, &bv) in row.iter_mut().zip(b) {
                            *zv += bv;
                        }
                    }
                }
                cur = z;
            }
            (LayerSpec::Relu, _) => {
                for v in &mut cur {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            (
                LayerSpec::Batchnorm { dim, variance_epsilon, .. },
                LayerParams::BatchNorm { gamma, beta, .. },
            ) => {
                let d = *dim;
                let (mean, var) = match mode {
                    EvalMode::Train => {
                        let mut mean = column_sums_pairwise(batch, d, &cur);
                        let inv_b = 1.0 / batch as f64;
                        for m in &mut mean {
                            *m *= inv_b;
                        }
                        let mut var = column_sq_dev_pairwise(batch, d, &cur, &mean);
                        for v in &mut var {
                            *v *= inv_b;
                        }
                        ema.push((bn_index, mean.clone(), var.clone()));
                        (mean, var)
                    }
                    EvalMode::Eval => {
                        let stats = &state.bn[bn_index];
                        (stats.mean.clone(), stats.var.clone())
                    }
                };
                let istd: Vec<f64> =
                    var.iter().map(|&v| 1.0 / (v + variance_epsilon).sqrt()).collect();
                let g = params.slice(*gamma);
                let b = params.slice(*beta);
                let mut xhat = vec![0.0; batch * d];
                let mut out = vec![0.0; batch * d];
                for row in 0..batch {
                    let x_row = &cur[row * d..(row + 1) * d];
                    let xh_row = &mut xhat[row * d..(row + 1) * d];
                    let o_row = &mut out[row * d..(row + 1) * d];
                    for j in 0..d {
                        let h = (x_row[j] - mean[j]) * istd[j];
                        xh_row[j] = h;
                        o_row[j] = g[j] * h + b[j];
                    }
                }
                bn_caches.push(BnCache { xhat, istd });
                bn_index += 1;
                cur = out;
            }
            (LayerSpec::SoftmaxCe { classes }, _) => {
                logits = cur.clone();
                let k = *classes;
                let mut probs = vec![0.0; batch * k];
                for row in 0..batch {
                    let z = &cur[row * k..(row + 1) * k];
                    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let p = &mut probs[row * k..(row + 1) * k];
                    let mut sum = 0.0;
                    for (pv, &zv) in p.iter_mut().zip(z) {
                        let e = (zv - m).exp();
                        *pv = e;
                        sum += e;
                    }
                    for pv in p.iter_mut() {
                        *pv /= sum;
                    }
                }
                ensure_finite(idx, &probs)?;
                cur = probs;
            }
            _ => unreachable!("layout and spec built together"),
        }
        if !matches!(layer, LayerSpec::SoftmaxCe { .. }) {
            ensure_finite(idx, &cur)?;
        }
    }

    let classes = spec.num_classes();
    Ok((
        ForwardPass {
            layer_inputs,
            bn: bn_caches,
            logits,
            probs: cur,
            batch,
            classes,
            mode,
        },
        ema,
    ))
}

/// Apply collected batch statistics as exponential moving averages:
/// `running = momentum * running + (1 - momentum) * batch`.
pub(crate) fn apply_ema_updates(
    spec: &crate::net::NetworkSpec,
    state: &mut NetState,
    updates: EmaUpdates,
) {
    let momenta: Vec<f64> = spec
        .layers
        .iter()
        .filter_map(|l| match l {
            LayerSpec::Batchnorm { momentum, .. } => Some(*momentum),
            _ => None,
        })
        .collect();
    for (bn_index, mean, var) in updates {
        let m = momenta[bn_index];
        let stats = &mut state.bn[bn_index];
        for (r, b) in stats.mean.iter_mut().zip(&mean) {
            *r = m * *r + (1.0 - m) * *b;
        }
        for (r, b) in stats.var.iter_mut().zip(&var) {
            *r = m * *r + (1.0 - m) * *b;
        }
    }
}

/// Per-example cross-entropy losses, computed stably from the logits.
pub(crate) fn example_losses(pass: &ForwardPass, labels: &[u32]) -> Result<Vec<f64>> {
    if labels.len() != pass.batch {
        return Err(Error::Shape(format!(
            "{} labels for batch of {}",
            labels.len(),
            pass.batch
        )));
    }
    let k = pass.classes;
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(Error::Shape(format!("label {bad} out of range [0, {k})")));
    }
    let mut losses = Vec::with_capacity(pass.batch);
    for row in 0..pass.batch {
        let z = &pass.logits[row * k..(row + 1) * k];
        let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for &zv in z {
            sum += (zv - m).exp();
        }
        let logp = z[labels[row] as usize] - m - sum.ln();
        losses.push(-logp);
    }
    Ok(losses)
}

pub(crate) struct BackwardOutput {
    pub example_losses: Vec<f64>,
    pub param_grad: Vec<f64>,
    pub input_grad: Option<Vec<f64>>,
}

/// Reverse pass. `inv_scale` multiplies the logit gradient, so `1/batch`
/// yields the gradient of the mean loss and `1.0` the gradient of the sum.
/// Per-example losses are always returned unscaled.
pub(crate) fn run_backward(
    net: &Network,
    params: &ParamVector,
    pass: &ForwardPass,
    labels: &[u32],
    inv_scale: f64,
    want_input_grad: bool,
) -> Result<BackwardOutput> {
    let spec = net.spec();
    let losses = example_losses(pass, labels)?;
    let batch = pass.batch;
    let k = pass.classes;

    // Gradient at the logits: (p - onehot) * inv_scale.
    let mut d: Vec<f64> = pass.probs.iter().map(|&p| p * inv_scale).collect();
    for (row, &label) in labels.iter().enumerate() {
        d[row * k + label as usize] -= inv_scale;
    }

    let mut param_grad = vec![0.0; net.layout().n()];
    let mut input_grad = None;
    let mut bn_index = pass.bn.len();
    let mut d_dim = k;

    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        match (layer, net.layout().layer(idx)) {
            (LayerSpec::SoftmaxCe { .. }, _) => {
                // d already holds the logit gradient.
            }
            (LayerSpec::Dense { fan_in, fan_out, .. }, LayerParams::Dense { weights, bias, .. }) => {
                let x = &pass.layer_inputs[idx];
                let dw = matmul_at_b_pairwise(batch, *fan_in, *fan_out, x, &d);
                param_grad[weights.0..weights.0 + weights.1].copy_from_slice(&dw);
                if let Some(bias) = bias {
                    let db = column_sums_pairwise(batch, *fan_out, &d);
                    param_grad[bias.0..bias.0 + bias.1].copy_from_slice(&db);
                }
                if idx > 0 || want_input_grad {
                    let w = params.slice(*weights);
                    let mut dx = vec![0.0; batch * fan_in];
                    // dx = d * W^T; W is (fan_in x fan_out) row-major.
                    matmul_bt(batch, *fan_out, *fan_in, &d, w, &mut dx);
                    ensure_finite(idx, &dx)?;
                    d = dx;
                    d_dim = *fan_in;
                } else {
                    d_dim = *fan_in;
                }
            }
            (LayerSpec::Relu, _) => {
                let x = &pass.layer_inputs[idx];
                for (dv, &xv) in d.iter_mut().zip(x) {
                    if xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            (LayerSpec::Batchnorm { dim, .. }, LayerParams::BatchNorm { gamma, beta, .. }) => {
                bn_index -= 1;
                let cache = &pass.bn[bn_index];
                let dn = *dim;
                debug_assert_eq!(d_dim, dn);
                let g = params.slice(*gamma);

                // d_gamma = sum_b d .* xhat ; d_beta = sum_b d
                let prod: Vec<f64> = d.iter().zip(&cache.xhat).map(|(&a, &b)| a * b).collect();
                let dgamma = column_sums_pairwise(batch, dn, &prod);
                let dbeta = column_sums_pairwise(batch, dn, &d);
                param_grad[gamma.0..gamma.0 + gamma.1].copy_from_slice(&dgamma);
                param_grad[beta.0..beta.0 + beta.1].copy_from_slice(&dbeta);

                // dxhat = d .* gamma
                let mut dxhat = d;
                for row in 0..batch {
                    let r = &mut dxhat[row * dn..(row + 1) * dn];
                    for (v, &gv) in r.iter_mut().zip(g) {
                        *v *= gv;
                    }
                }

                let mut dx = vec![0.0; batch * dn];
                match pass.mode {
                    EvalMode::Eval => {
                        // Frozen statistics: per-feature affine map.
                        for row in 0..batch {
                            let src = &dxhat[row * dn..(row + 1) * dn];
                            let dst = &mut dx[row * dn..(row + 1) * dn];
                            for j in 0..dn {
                                dst[j] = src[j] * cache.istd[j];
                            }
                        }
                    }
                    EvalMode::Train => {
                        // Batch statistics couple the rows:
                        // dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
                        let inv_b = 1.0 / batch as f64;
                        let mut mean_dxhat = column_sums_pairwise(batch, dn, &dxhat);
                        for v in &mut mean_dxhat {
                            *v *= inv_b;
                        }
                        let prod2: Vec<f64> =
                            dxhat.iter().zip(&cache.xhat).map(|(&a, &b)| a * b).collect();
                        let mut mean_dxhat_xhat = column_sums_pairwise(batch, dn, &prod2);
                        for v in &mut mean_dxhat_xhat {
                            *v *= inv_b;
                        }
                        for row in 0..batch {
                            let xh = &cache.xhat[row * dn..(row + 1) * dn];
                            let src = &dxhat[row * dn..(row + 1) * dn];
                            let dst = &mut dx[row * dn..(row + 1) * dn];
                            for j in 0..dn {
                                dst[j] = cache.istd[j]
                                    * (src[j] - mean_dxhat[j] - xh[j] * mean_dxhat_xhat[j]);
                            }
                        }
                    }
                }
                ensure_finite(idx, &dx)?;
                d = dx;
            }
            _ => unreachable!(),
        }
    }
    let _ = d_dim;

    if !crate::numeric::all_finite(&param_grad) {
        return Err(Error::NonFinite { context: "parameter gradient".into() });
    }
    if want_input_grad {
        ensure_finite(0, &d)?;
        input_grad = Some(d);
    }

    Ok(BackwardOutput { example_losses: losses, param_grad, input_grad })
}
