//! Inexact maximization of a smooth function over an axis-aligned box, plus
//! an exact vertex-enumeration oracle for convex quadratics.
//!
//! The solver minimizes the negated objective: gradient projection identifies
//! active bounds, a limited-memory BFGS step runs on the free coordinates,
//! and a projected backtracking (Armijo) line search accepts steps. It stops
//! early when the projected-gradient infinity norm falls below tolerance and
//! always returns the best iterate seen, so the reported value can never be
//! worse than the starting point.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numeric::{inf_norm, pairwise_dot};

/// Axis-aligned box `lower_i <= z_i <= upper_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Shape(format!(
                "bounds have {} lower and {} upper entries",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::NonFinite { context: format!("bounds coordinate {i}") });
            }
            if l > u {
                return Err(Error::Domain(format!("lower {l} > upper {u} at coordinate {i}")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-half_width_i, +half_width_i]`.
    pub fn symmetric(half_widths: Vec<f64>) -> Result<Self> {
        let lower = half_widths.iter().map(|&h| -h).collect();
        Self::new(lower, half_widths)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Entrywise clamp of `z` into the box.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((&v, &l), &u)| v.clamp(l, u))
            .collect()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&v, &l), &u)| v >= l && v <= u)
    }
}

/// Black-box objective returning value and gradient, with a call counter.
pub struct ObjectiveOracle<F> {
    f: F,
    calls: u64,
}

impl<F> ObjectiveOracle<F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    pub fn new(f: F) -> Self {
        Self { f, calls: 0 }
    }

    pub fn eval(&mut self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.calls += 1;
        let (value, grad) = (self.f)(z)?;
        if !value.is_finite() || !crate::numeric::all_finite(&grad) {
            return Err(Error::NonFinite {
                context: format!("objective at z = {:?}", &z[..z.len().min(4)]),
            });
        }
        if grad.len() != z.len() {
            return Err(Error::Shape(format!(
                "oracle gradient has {} entries for {} variables",
                grad.len(),
                z.len()
            )));
        }
        Ok((value, grad))
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOptions {
    pub max_outer: usize,
    pub memory: usize,
    pub armijo_c: f64,
    pub max_halvings: usize,
    pub pg_tolerance: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self { max_outer: 10, memory: 10, armijo_c: 1e-4, max_halvings: 30, pg_tolerance: 1e-8 }
    }
}

impl MaximizeOptions {
    pub fn with_max_outer(max_outer: usize) -> Self {
        Self { max_outer, ..Default::default() }
    }
}

/// Solver diagnostics serialized into result CSVs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeDiagnostics {
    pub iterations: usize,
    pub oracle_calls: u64,
    pub final_projected_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub z: Vec<f64>,
    pub value: f64,
    /// Objective value at the starting point.
    pub start_value: f64,
    pub diagnostics: MaximizeDiagnostics,
}

/// Maximize `oracle` over `box bounds` starting from `z0`.
pub fn maximize<F>(
    oracle: &mut ObjectiveOracle<F>,
    bounds: &Bounds,
    z0: &[f64],
    opts: &MaximizeOptions,
) -> Result<Maximum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let p = bounds.dim();
    if z0.len() != p {
        return Err(Error::Shape(format!("start point has {} entries for {p} bounds", z0.len())));
    }
    let calls_before = oracle.calls();
    let mut z = bounds.project(z0);
    // Minimize g = -f.
    let (fz, gradf) = oracle.eval(&z)?;
    let start_value = fz;
    let mut g = -fz;
    let mut grad: Vec<f64> = gradf.iter().map(|v| -v).collect();
    let mut best_z = z.clone();
    let mut best_g = g;

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, rho)
    let mut pg_norm = projected_grad_norm(&z, &grad, bounds);
    let mut iterations = 0usize;

    // A stationary start (e.g. an exact minimizer of f at the box center)
    // has nothing for a gradient method to follow; probe halfway toward each
    // corner and continue from an improving point if one exists.
    if pg_norm < opts.pg_tolerance {
        let mut candidates = Vec::new();
        for toward_upper in [true, false] {
            let probe: Vec<f64> = z
                .iter()
                .zip(bounds.lower())
                .zip(bounds.upper())
                .map(|((&v, &l), &u)| {
                    let target = if toward_upper { u } else { l };
                    v + 0.5 * (target - v)
                })
                .collect();
            let (fp, gp) = oracle.eval(&probe)?;
            candidates.push((probe, -fp, gp));
        }
        if let Some((probe, gp, gradp)) = candidates
            .into_iter()
            .filter(|(_, gv, _)| *gv < g)
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite values"))
        {
            z = probe;
            g = gp;
            grad = gradp.iter().map(|v| -v).collect();
            if g < best_g {
                best_g = g;
                best_z = z.clone();
            }
            pg_norm = projected_grad_norm(&z, &grad, bounds);
        }
    }

    while iterations < opts.max_outer {
        if pg_norm < opts.pg_tolerance {
            break;
        }
        iterations += 1;

        let active = active_set(&z, &grad, bounds);
        let mut direction = lbfgs_direction(&grad, &history, &active);
        // Keep it a descent direction for the minimization.
        if pairwise_dot(&direction, &grad) >= 0.0 {
            direction = steepest(&grad, &active);
        }

        let mut step_ok = false;
        let mut t = 1.0;
        let mut z_new = Vec::new();
        let mut g_new = 0.0;
        let mut grad_new = Vec::new();
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&direction).map(|(&v, &d)| v + t * d).collect();
            let trial = bounds.project(&trial);
            if trial == z {
                break;
            }
            let (ft, gradt) = oracle.eval(&trial)?;
            let gt = -ft;
            let moved: Vec<f64> = trial.iter().zip(&z).map(|(&a, &b)| a - b).collect();
            let slope = pairwise_dot(&grad, &moved);
            if gt <= g + opts.armijo_c * slope {
                z_new = trial;
                g_new = gt;
                grad_new = gradt.iter().map(|v| -v).collect();
                step_ok = true;
                break;
            }
            t *= 0.5;
        }

        if !step_ok {
            // Projected-gradient fallback with a secant curvature estimate.
            let lips = history
                .back()
                .map(|(s, y, _)| {
                    let ss = pairwise_dot(s, s);
                    if ss > 0.0 {
                        (pairwise_dot(s, y).abs() / ss).max(1e-12)
                    } else {
                        1.0
                    }
                })
                .unwrap_or(1.0);
            let trial: Vec<f64> = z.iter().zip(&grad).map(|(&v, &gv)| v - gv / lips).collect();
            let trial = bounds.project(&trial);
            if trial == z {
                break;
            }
            let (ft, gradt) = oracle.eval(&trial)?;
            if -ft < g {
                z_new = trial;
                g_new = -ft;
                grad_new = gradt.iter().map(|v| -v).collect();
            } else {
                break;
            }
        }

        let s: Vec<f64> = z_new.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = pairwise_dot(&s, &y);
        if sy > 1e-12 * crate::numeric::l2_norm(&s) * crate::numeric::l2_norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        z = z_new;
        g = g_new;
        grad = grad_new;
        if g < best_g {
            best_g = g;
            best_z = z.clone();
        }
        pg_norm = projected_grad_norm(&z, &grad, bounds);
    }

    Ok(Maximum {
        z: best_z,
        value: -best_g,
        start_value,
        diagnostics: MaximizeDiagnostics {
            iterations,
            oracle_calls: oracle.calls() - calls_before,
            final_projected_grad_norm: pg_norm,
        },
    })
}

fn projected_grad_norm(z: &[f64], grad: &[f64], bounds: &Bounds) -> f64 {
    let stepped: Vec<f64> = z.iter().zip(grad).map(|(&v, &g)| v - g).collect();
    let projected = bounds.project(&stepped);
    let pg: Vec<f64> = z.iter().zip(&projected).map(|(&a, &b)| a - b).collect();
    inf_norm(&pg)
}

/// Coordinates pinned at a bound with the (minimization) gradient pushing
/// outward.
fn active_set(z: &[f64], grad: &[f64], bounds: &Bounds) -> Vec<bool> {
    z.iter()
        .zip(grad)
        .zip(bounds.lower().iter().zip(bounds.upper()))
        .map(|((&v, &g), (&l, &u))| (v <= l && g > 0.0) || (v >= u && g < 0.0))
        .collect()
}

fn steepest(grad: &[f64], active: &[bool]) -> Vec<f64> {
    grad.iter()
        .zip(active)
        .map(|(&g, &a)| if a { 0.0 } else { -g })
        .collect()
}

/// Two-loop recursion restricted to free coordinates.
fn lbfgs_direction(
    grad: &[f64],
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    active: &[bool],
) -> Vec<f64> {
    if history.is_empty() {
        return steepest(grad, active);
    }
    let mut q: Vec<f64> = grad
        .iter()
        .zip(active)
        .map(|(&g, &a)| if a { 0.0 } else { g })
        .collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * pairwise_dot(s, &q);
        for (qv, yv) in q.iter_mut().zip(y) {
            *qv -= alpha * yv;
        }
        alphas.push(alpha);
    }
    let (s_last, y_last, _) = history.back().expect("non-empty history");
    let gamma = pairwise_dot(s_last, y_last) / pairwise_dot(y_last, y_last).max(1e-300);
    for qv in q.iter_mut() {
        *qv *= gamma;
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * pairwise_dot(y, &q);
        for (qv, sv) in q.iter_mut().zip(s) {
            *qv += (alpha - beta) * sv;
        }
    }
    q.iter_mut()
        .zip(active)
        .for_each(|(qv, &a)| if a { *qv = 0.0 } else { *qv = -*qv });
    q
}

/// A symmetric quadratic `z -> 0.5 z^T H z + g^T z + c`, used as a test
/// oracle: for convex `H` the box maximum sits at a vertex, which
/// [`vertex_bruteforce_max`] finds exactly.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    h: Vec<f64>,
    lin: Vec<f64>,
    constant: f64,
    p: usize,
}

impl QuadraticObjective {
    pub fn new(p: usize, h: Vec<f64>, lin: Vec<f64>, constant: f64) -> Result<Self> {
        if h.len() != p * p || lin.len() != p {
            return Err(Error::Shape(format!("quadratic needs {p}x{p} matrix and {p} vector")));
        }
        for i in 0..p {
            for j in 0..i {
                if (h[i * p + j] - h[j * p + i]).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        h[i * p + j],
                        h[j * p + i]
                    )));
                }
            }
        }
        Ok(Self { h, lin, constant, p })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn eval(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let hz: Vec<f64> = self
            .h
            .chunks_exact(self.p)
            .map(|row| pairwise_dot(row, z))
            .collect();
        let value = 0.5 * pairwise_dot(z, &hz) + pairwise_dot(&self.lin, z) + self.constant;
        let grad: Vec<f64> = hz.iter().zip(&self.lin).map(|(&a, &b)| a + b).collect();
        (value, grad)
    }

    pub fn oracle(&self) -> ObjectiveOracle<impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + '_> {
        ObjectiveOracle::new(move |z: &[f64]| Ok(self.eval(z)))
    }
}

pub const VERTEX_ENUM_LIMIT: usize = 20;

/// Exact maximum of an arbitrary function over the box vertices (2^p
/// evaluations). Exact for the box maximum itself when the function is a
/// convex quadratic.
pub fn vertex_enumerate_max<F>(mut f: F, bounds: &Bounds) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let p = bounds.dim();
    if p > VERTEX_ENUM_LIMIT {
        return Err(Error::SizeLimit { got: p, limit: VERTEX_ENUM_LIMIT });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u64..(1u64 << p) {
        let vertex: Vec<f64> = (0..p)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    bounds.upper()[i]
                } else {
                    bounds.lower()[i]
                }
            })
            .collect();
        let value = f(&vertex)?;
        if best.as_ref().map(|(_, b)| value > *b).unwrap_or(true) {
            best = Some((vertex, value));
        }
    }
    Ok(best.expect("at least one vertex"))
}

/// Brute-force vertex maximum of a convex quadratic over a box.
pub fn vertex_bruteforce_max(q: &QuadraticObjective, bounds: &Bounds) -> Result<(Vec<f64>, f64)> {
    if bounds.dim() != q.dim() {
        return Err(Error::Shape(format!(
            "quadratic dim {} vs bounds dim {}",
            q.dim(),
            bounds.dim()
        )));
    }
    vertex_enumerate_max(|z| Ok(q.eval(z).0), bounds)
}
