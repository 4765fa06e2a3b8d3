//! One-dimensional parametric slices between two trained solutions, and
//! distance-from-start diagnostics.
//!
//! The linear slice evaluates `f(alpha * x_l + (1 - alpha) * x_s)`; the
//! curvilinear slice evaluates `f(sin(alpha pi/2) x_l + cos(alpha pi/2) x_s)`.
//! Both run in eval mode; batch-norm running statistics are combined with the
//! same coefficients as the parameters (variance clamped at zero) so the
//! endpoints reproduce direct evaluation of each solution exactly.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{NetState, Network, ParamVector};
use crate::numeric::pairwise_dot;
use crate::optim::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub alpha: f64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceKind {
    Linear,
    Curvilinear,
}

/// Default grid: 61 uniform points on `[-1, 2]`, hitting 0 and 1 exactly.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=60).map(|i| (i as f64 - 20.0) / 20.0).collect()
}

fn combine_checkpoint(
    end_s: &Checkpoint,
    end_l: &Checkpoint,
    coeff_l: f64,
    coeff_s: f64,
) -> (ParamVector, NetState) {
    let mut params = end_s.params.clone();
    for ((out, &l), &s) in params
        .values_mut()
        .iter_mut()
        .zip(end_l.params.values())
        .zip(end_s.params.values())
    {
        *out = coeff_l * l + coeff_s * s;
    }
    let mut state = end_s.bn_state.clone();
    for (bn, (bn_l, bn_s)) in state
        .bn
        .iter_mut()
        .zip(end_l.bn_state.bn.iter().zip(&end_s.bn_state.bn))
    {
        for ((out, &l), &s) in bn.mean.iter_mut().zip(&bn_l.mean).zip(&bn_s.mean) {
            *out = coeff_l * l + coeff_s * s;
        }
        for ((out, &l), &s) in bn.var.iter_mut().zip(&bn_l.var).zip(&bn_s.var) {
            *out = (coeff_l * l + coeff_s * s).max(0.0);
        }
    }
    (params, state)
}

fn evaluate_slice(
    net: &Network,
    end_s: &Checkpoint,
    end_l: &Checkpoint,
    train: &Dataset,
    test: &Dataset,
    alphas: &[f64],
    coeffs: impl Fn(f64) -> (f64, f64) + Sync,
) -> Result<Vec<SlicePoint>> {
    if end_s.params.n() != end_l.params.n() {
        return Err(Error::Shape(format!(
            "endpoint dimensions differ: {} vs {}",
            end_s.params.n(),
            end_l.params.n()
        )));
    }
    if alphas.is_empty() {
        return Err(Error::Domain("empty alpha grid".into()));
    }
    use rayon::prelude::*;
    alphas
        .par_iter()
        .map(|&alpha| {
            let (coeff_l, coeff_s) = coeffs(alpha);
            let (params, state) = combine_checkpoint(end_s, end_l, coeff_l, coeff_s);
            Ok(SlicePoint {
                alpha,
                train_loss: net.mean_loss(&params, train, &state)?,
                test_loss: net.mean_loss(&params, test, &state)?,
                train_acc: net.accuracy(&params, train, &state)?,
                test_acc: net.accuracy(&params, test, &state)?,
            })
        })
        .collect()
}

/// Evaluate loss and accuracy along the segment joining two solutions.
pub fn linear_slice(
    net: &Network,
    end_s: &Checkpoint,
    end_l: &Checkpoint,
    train: &Dataset,
    test: &Dataset,
    alphas: &[f64],
) -> Result<Vec<SlicePoint>> {
    evaluate_slice(net, end_s, end_l, train, test, alphas, |alpha| (alpha, 1.0 - alpha))
}

/// Evaluate along the curved path `sin(alpha pi/2) x_l + cos(alpha pi/2) x_s`.
/// The trigonometric coefficients are snapped at alpha = 0 and 1 so the
/// endpoints are exact.
pub fn curvilinear_slice(
    net: &Network,
    end_s: &Checkpoint,
    end_l: &Checkpoint,
    train: &Dataset,
    test: &Dataset,
    alphas: &[f64],
) -> Result<Vec<SlicePoint>> {
    evaluate_slice(net, end_s, end_l, train, test, alphas, |alpha| {
        if alpha == 0.0 {
            (0.0, 1.0)
        } else if alpha == 1.0 {
            (1.0, 0.0)
        } else {
            let t = alpha * std::f64::consts::FRAC_PI_2;
            (t.sin(), t.cos())
        }
    })
}

/// Distances from a shared starting point to two solutions, and their ratio
/// `||x_s - x0|| / ||x_l - x0||`.
pub fn distance_ratio(
    x0: &ParamVector,
    x_s: &ParamVector,
    x_l: &ParamVector,
) -> Result<(f64, f64, f64)> {
    if x0.n() != x_s.n() || x0.n() != x_l.n() {
        return Err(Error::Shape("distance_ratio endpoints differ in dimension".into()));
    }
    let dist = |a: &ParamVector, b: &ParamVector| {
        let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        pairwise_dot(&diff, &diff).sqrt()
    };
    let d_s = dist(x_s, x0);
    let d_l = dist(x_l, x0);
    if d_l == 0.0 {
        return Err(Error::Domain("large-batch solution coincides with the start point".into()));
    }
    Ok((d_s, d_l, d_s / d_l))
}
