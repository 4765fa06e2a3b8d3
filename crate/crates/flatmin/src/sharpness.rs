//! Box-constrained relative-rise sharpness of a function at a point.
//!
//! Given an iterate `x`, a box size `epsilon`, and (optionally) a random
//! subspace spanned by the columns of an `n x p` matrix `A`, the metric is
//!
//! ```text
//! phi = 100 * (max_{y in C_eps} f(x + A y) - f(x)) / (1 + f(x))
//! ```
//!
//! with the box `C_eps = { y : |y_i| <= eps * (|(A+ x)_i| + 1) }`, where `A+`
//! is the pseudo-inverse of `A`. Full space means `A = I` (never
//! materialized). The inner maximization starts at `y = 0`, so the reported
//! value is never negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boxmax::{
    maximize, vertex_enumerate_max, Bounds, MaximizeDiagnostics, MaximizeOptions, ObjectiveOracle,
};
use crate::error::{Error, Result};
use crate::numeric::{cholesky_solve, qr_least_squares};

/// Subspace descriptor recorded in reports and CSV rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubspaceKind {
    FullSpace,
    Random { p: usize, seed: u64 },
    /// Caller-provided matrix (tests, bespoke probes).
    Explicit { p: usize },
}

/// A manifold to maximize over: either the full space or `p` random
/// directions with dense normal entries.
#[derive(Debug, Clone)]
pub struct Subspace {
    kind: SubspaceKind,
    n: usize,
    /// Row-major `n x p`; `None` for the full space.
    matrix: Option<Vec<f64>>,
}

impl Subspace {
    pub fn full(n: usize) -> Self {
        Self { kind: SubspaceKind::FullSpace, n, matrix: None }
    }

    /// Sample `A` with i.i.d. standard normal entries. If the draw is not
    /// numerically full column rank (measure zero), the seed is bumped and
    /// the draw repeated; the seed actually used is recorded in `kind`.
    pub fn random(n: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::Domain(format!("subspace dimension must be in [1, {n}], got {p}")));
        }
        let mut use_seed = seed;
        for _ in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(use_seed);
            let matrix: Vec<f64> =
                (0..n * p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let candidate = Self {
                kind: SubspaceKind::Random { p, seed: use_seed },
                n,
                matrix: Some(matrix),
            };
            if candidate.gram_cholesky().is_some() {
                return Ok(candidate);
            }
            use_seed = use_seed.wrapping_add(1);
        }
        Err(Error::RankDeficient(format!(
            "could not draw a full-rank {n}x{p} subspace near seed {seed}"
        )))
    }

    /// Subspace with an explicitly provided matrix (row-major n x p).
    pub fn with_matrix(n: usize, p: usize, matrix: Vec<f64>) -> Result<Self> {
        if p == 0 || p > n || matrix.len() != n * p {
            return Err(Error::Shape(format!(
                "explicit subspace needs an {n} x {p} matrix, got {} values",
                matrix.len()
            )));
        }
        let candidate = Self { kind: SubspaceKind::Explicit { p }, n, matrix: Some(matrix) };
        if candidate.gram_cholesky().is_none() {
            return Err(Error::RankDeficient("explicit subspace matrix".into()));
        }
        Ok(candidate)
    }

    pub fn kind(&self) -> SubspaceKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the maximization variable: `p`, or `n` for full space.
    pub fn p(&self) -> usize {
        match self.kind {
            SubspaceKind::FullSpace => self.n,
            SubspaceKind::Random { p, .. } | SubspaceKind::Explicit { p } => p,
        }
    }

    /// `A y` (identity for full space).
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        match &self.matrix {
            None => y.to_vec(),
            Some(a) => {
                let p = self.p();
                let mut out = vec![0.0; self.n];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = crate::numeric::pairwise_dot(&a[i * p..(i + 1) * p], y);
                }
                out
            }
        }
    }

    /// `A^T g` (identity for full space).
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        match &self.matrix {
            None => g.to_vec(),
            Some(a) => {
                let p = self.p();
                let mut out = vec![0.0; p];
                for (i, &gv) in g.iter().enumerate() {
                    let row = &a[i * p..(i + 1) * p];
                    for (o, &av) in out.iter_mut().zip(row) {
                        *o += gv * av;
                    }
                }
                out
            }
        }
    }

    fn gram_cholesky(&self) -> Option<Vec<f64>> {
        let a = self.matrix.as_ref()?;
        let p = self.p();
        let mut gram = vec![0.0; p * p];
        for i in 0..self.n {
            let row = &a[i * p..(i + 1) * p];
            for r in 0..p {
                for c in 0..=r {
                    gram[r * p + c] += row[r] * row[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                gram[c * p + r] = gram[r * p + c];
            }
        }
        cholesky_solve(p, &gram, &vec![0.0; p]).map(|_| gram)
    }

    /// `A^+ x` via the normal equations `(A^T A) w = A^T x`, with a QR
    /// fallback when the Cholesky factorization is not safely positive.
    pub fn pseudo_inverse_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::Shape(format!(
                "vector has {} entries for an n = {} subspace",
                x.len(),
                self.n
            )));
        }
        match &self.matrix {
            None => Ok(x.to_vec()),
            Some(a) => pseudo_inverse_apply(a, self.n, self.p(), x),
        }
    }
}

/// Standalone pseudo-inverse application for a full-column-rank `A`
/// (row-major `n x p`).
pub fn pseudo_inverse_apply(a: &[f64], n: usize, p: usize, x: &[f64]) -> Result<Vec<f64>> {
    if a.len() != n * p || x.len() != n {
        return Err(Error::Shape(format!("pseudo-inverse expects {n}x{p} matrix and {n} vector")));
    }
    let mut gram = vec![0.0; p * p];
    let mut atx = vec![0.0; p];
    for i in 0..n {
        let row = &a[i * p..(i + 1) * p];
        for r in 0..p {
            atx[r] += row[r] * x[i];
            for c in 0..=r {
                gram[r * p + c] += row[r] * row[c];
            }
        }
    }
    for r in 0..p {
        for c in 0..r {
            gram[c * p + r] = gram[r * p + c];
        }
    }
    match cholesky_solve(p, &gram, &atx) {
        Some(w) => Ok(w),
        None => qr_least_squares(n, p, a, x),
    }
}

/// Constraint box of the inner maximization: half-width
/// `eps * (|(A+ x)_i| + 1)` per coordinate, symmetric about the origin.
pub fn build_box(subspace: &Subspace, x: &[f64], epsilon: f64) -> Result<Bounds> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let reference = subspace.pseudo_inverse_apply(x)?;
    let half_widths: Vec<f64> = reference.iter().map(|&w| epsilon * (w.abs() + 1.0)).collect();
    Bounds::symmetric(half_widths)
}

/// How the inner maximization is solved.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerSolver {
    /// Bounded quasi-Newton solve (default: 10 outer iterations).
    QuasiNewton(MaximizeOptions),
    /// Exact enumeration of box vertices; intended for convex quadratic test
    /// functions with small `p`.
    VertexEnumeration,
}

impl Default for InnerSolver {
    fn default() -> Self {
        InnerSolver::QuasiNewton(MaximizeOptions::default())
    }
}

#[derive(Debug, Clone)]
pub struct SharpnessReport {
    /// Metric value, in percent.
    pub phi: f64,
    pub epsilon: f64,
    pub subspace: SubspaceKind,
    /// Maximization dimension (n for full space).
    pub p: usize,
    pub f_at_x: f64,
    pub max_value_found: f64,
    pub diagnostics: MaximizeDiagnostics,
    pub restarts: usize,
}

/// Measure sharpness of `f` at `x`. The oracle maps a parameter vector to
/// `(value, gradient)`; the chain rule through the subspace is handled here.
/// Restarts add uniform-random feasible starting points on top of the
/// default `y = 0` start and report the best value found.
pub fn sharpness<F>(
    f: &F,
    x: &[f64],
    epsilon: f64,
    subspace: &Subspace,
    solver: &InnerSolver,
    restarts: usize,
    restart_seed: u64,
) -> Result<SharpnessReport>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if x.len() != subspace.n() {
        return Err(Error::Shape(format!(
            "point has {} entries for an n = {} subspace",
            x.len(),
            subspace.n()
        )));
    }
    let bounds = build_box(subspace, x, epsilon)?;
    let p = subspace.p();

    let eval_y = |y: &[f64]| -> Result<(f64, Vec<f64>)> {
        let shifted: Vec<f64> = match subspace.kind() {
            SubspaceKind::FullSpace => x.iter().zip(y).map(|(&a, &b)| a + b).collect(),
            _ => {
                let ay = subspace.apply(y);
                x.iter().zip(&ay).map(|(&a, &b)| a + b).collect()
            }
        };
        let (value, grad) = f(&shifted)?;
        Ok((value, subspace.apply_transpose(&grad)))
    };

    let (f_at_x, max_value_found, diagnostics) = match solver {
        InnerSolver::QuasiNewton(opts) => {
            let mut oracle = ObjectiveOracle::new(|y: &[f64]| eval_y(y));
            let origin = vec![0.0; p];
            let mut best = maximize(&mut oracle, &bounds, &origin, opts)?;
            let f_at_x = best.start_value;
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed);
            for _ in 0..restarts {
                let y0: Vec<f64> = bounds
                    .lower()
                    .iter()
                    .zip(bounds.upper())
                    .map(|(&l, &u)| if l == u { l } else { rng.random_range(l..=u) })
                    .collect();
                let run = maximize(&mut oracle, &bounds, &y0, opts)?;
                if run.value > best.value {
                    best = run;
                }
            }
            let calls = oracle.calls();
            (
                f_at_x,
                best.value,
                MaximizeDiagnostics { oracle_calls: calls, ..best.diagnostics },
            )
        }
        InnerSolver::VertexEnumeration => {
            let mut calls = 0u64;
            let (f_at_x, _) = eval_y(&vec![0.0; p])?;
            calls += 1;
            let (_, best_vertex) = vertex_enumerate_max(
                |y| {
                    calls += 1;
                    eval_y(y).map(|(v, _)| v)
                },
                &bounds,
            )?;
            // y = 0 is always a feasible candidate.
            let max_value = best_vertex.max(f_at_x);
            (
                f_at_x,
                max_value,
                MaximizeDiagnostics {
                    iterations: 0,
                    oracle_calls: calls,
                    final_projected_grad_norm: f64::NAN,
                },
            )
        }
    };

    Ok(SharpnessReport {
        phi: (max_value_found - f_at_x) / (1.0 + f_at_x) * 100.0,
        epsilon,
        subspace: subspace.kind(),
        p,
        f_at_x,
        max_value_found,
        diagnostics,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_oracle(
        h: Vec<f64>,
        n: usize,
    ) -> impl Fn(&[f64]) -> Result<(f64, Vec<f64>)> {
        move |z: &[f64]| {
            let mut hz = vec![0.0; n];
            for i in 0..n {
                hz[i] = crate::numeric::pairwise_dot(&h[i * n..(i + 1) * n], z);
            }
            let v = 0.5 * crate::numeric::pairwise_dot(z, &hz);
            Ok((v, hz))
        }
    }

    #[test]
    fn pseudo_inverse_examples() {
        // A = e1 in R^2: A+ x = x_1.
        let w = pseudo_inverse_apply(&[1.0, 0.0], 2, 1, &[3.0, 4.0]).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14);

        // A = (2, 0)^T: (A^T A)^-1 A^T x = 6/4 = 1.5.
        let w = pseudo_inverse_apply(&[2.0, 0.0], 2, 1, &[3.0, 4.0]).unwrap();
        assert!((w[0] - 1.5).abs() < 1e-14);

        // Square orthogonal A: A+ = A^T and norms are preserved.
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let a = vec![inv_sqrt2, inv_sqrt2, -inv_sqrt2, inv_sqrt2];
        let x = [0.3, -1.2];
        let w = pseudo_inverse_apply(&a, 2, 2, &x).unwrap();
        let at_x = [a[0] * x[0] + a[2] * x[1], a[1] * x[0] + a[3] * x[1]];
        assert!((w[0] - at_x[0]).abs() < 1e-12);
        assert!((w[1] - at_x[1]).abs() < 1e-12);
        assert!(
            (crate::numeric::l2_norm(&w) - crate::numeric::l2_norm(&x)).abs() < 1e-12
        );
    }

    #[test]
    fn box_construction_examples() {
        let sub = Subspace::full(2);
        let b = build_box(&sub, &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(b.upper(), &[1e-3, 1e-3]);
        assert_eq!(b.lower(), &[-1e-3, -1e-3]);

        let b = build_box(&sub, &[1.0, 0.0], 1e-3).unwrap();
        assert_eq!(b.upper(), &[2e-3, 1e-3]);
        // symmetric about zero
        for (l, u) in b.lower().iter().zip(b.upper()) {
            assert_eq!(-l, *u);
        }
    }

    #[test]
    fn one_dimensional_quadratic_full_space() {
        // f(z) = z^2 at x = 0, eps = 1e-3: phi = 1e-4 (max eps^2, denom 1).
        let f = |z: &[f64]| Ok((z[0] * z[0], vec![2.0 * z[0]]));
        let sub = Subspace::full(1);
        for solver in [InnerSolver::default(), InnerSolver::VertexEnumeration] {
            let rep = sharpness(&f, &[0.0], 1e-3, &sub, &solver, 0, 0).unwrap();
            assert!(
                (rep.phi - 1e-4).abs() <= 0.02 * 1e-4,
                "{solver:?}: phi = {}",
                rep.phi
            );
        }
    }

    #[test]
    fn anisotropic_quadratic_examples() {
        // f(z) = 0.5 (z1^2 + 4 z2^2) at x = 0.
        let f = quadratic_oracle(vec![1.0, 0.0, 0.0, 4.0], 2);
        let sub = Subspace::full(2);
        // full space: corner value 2.5e-6 -> phi = 2.5e-4
        let exact = sharpness(&f, &[0.0, 0.0], 1e-3, &sub, &InnerSolver::VertexEnumeration, 0, 0)
            .unwrap();
        assert!((exact.phi - 2.5e-4).abs() < 1e-14);
        let solved =
            sharpness(&f, &[0.0, 0.0], 1e-3, &sub, &InnerSolver::default(), 0, 0).unwrap();
        assert!((solved.phi - 2.5e-4).abs() <= 0.02 * 2.5e-4, "phi {}", solved.phi);
    }

    #[test]
    fn single_column_subspace_restricts_the_rise() {
        // Same f, A = first basis column: max over the 1-d box is eps^2/2.
        let f = quadratic_oracle(vec![1.0, 0.0, 0.0, 4.0], 2);
        let sub = Subspace::with_matrix(2, 1, vec![1.0, 0.0]).unwrap();
        for solver in [InnerSolver::default(), InnerSolver::VertexEnumeration] {
            let rep = sharpness(&f, &[0.0, 0.0], 1e-3, &sub, &solver, 0, 0).unwrap();
            assert!(
                (rep.phi - 5e-5).abs() <= 0.02 * 5e-5,
                "{solver:?}: phi = {}",
                rep.phi
            );
        }
    }

    #[test]
    fn constant_function_has_zero_sharpness() {
        let f = |z: &[f64]| Ok((2.0, vec![0.0; z.len()]));
        let sub = Subspace::full(3);
        let rep = sharpness(&f, &[0.5, -0.5, 0.0], 1e-3, &sub, &InnerSolver::default(), 0, 0)
            .unwrap();
        assert_eq!(rep.phi, 0.0);
    }

    #[test]
    fn phi_never_negative_even_under_vertex_enumeration() {
        // Concave function: every vertex is below f(x); y = 0 must win.
        let f = |z: &[f64]| {
            let v: f64 = -z.iter().map(|t| t * t).sum::<f64>();
            Ok((v, z.iter().map(|t| -2.0 * t).collect()))
        };
        let sub = Subspace::full(2);
        let rep =
            sharpness(&f, &[0.0, 0.0], 1e-2, &sub, &InnerSolver::VertexEnumeration, 0, 0).unwrap();
        assert_eq!(rep.phi, 0.0);
    }

    #[test]
    fn phi_monotone_in_epsilon_on_convex_quadratic() {
        let f = quadratic_oracle(vec![2.0, 0.4, 0.4, 1.0], 2);
        let sub = Subspace::full(2);
        let mut last = -1.0;
        for eps in [1e-4, 5e-4, 1e-3, 5e-3, 1e-2] {
            let rep =
                sharpness(&f, &[0.2, -0.1], eps, &sub, &InnerSolver::VertexEnumeration, 0, 0)
                    .unwrap();
            assert!(rep.phi >= last, "eps {eps}: {} < {last}", rep.phi);
            last = rep.phi;
        }
    }

    #[test]
    fn rank_one_eigenvalue_identity() {
        // f(x + z) = 0.5 z^T (lambda u u^T) z at x = 0: exact full-space
        // sharpness is 100 * 0.5 * lambda * eps^2 * ||u||_1^2.
        let n = 5;
        let lambda = 3.0;
        let u = [0.8, -0.3, 0.0, 1.1, -0.4];
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                h[i * n + j] = lambda * u[i] * u[j];
            }
        }
        let f = quadratic_oracle(h, n);
        let eps = 1e-3;
        let rep = sharpness(
            &f,
            &[0.0; 5],
            eps,
            &Subspace::full(n),
            &InnerSolver::VertexEnumeration,
            0,
            0,
        )
        .unwrap();
        let norm1: f64 = u.iter().map(|v| v.abs()).sum();
        let expect = 100.0 * 0.5 * lambda * eps * eps * norm1 * norm1;
        assert!((rep.phi - expect).abs() <= 1e-10, "{} vs {expect}", rep.phi);
    }

    #[test]
    fn projected_quadratic_identity_on_orthonormal_subspace() {
        // For quadratic f with PSD Hessian H and orthonormal A, subspace
        // sharpness equals the box maximum of 0.5 y^T (A^T H A) y, times 100.
        let n = 4;
        // H = D^T D for a fixed small D.
        let d_mat = [
            0.5, 0.1, 0.0, -0.2, //
            0.0, 0.7, 0.3, 0.0, //
            0.2, 0.0, 0.9, 0.1, //
            0.0, 0.1, 0.0, 0.6,
        ];
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += d_mat[k * n + i] * d_mat[k * n + j];
                }
                h[i * n + j] = acc;
            }
        }
        for i in 0..n {
            for j in 0..i {
                h[j * n + i] = h[i * n + j];
            }
        }
        // Orthonormal 2-column A (selected axes rotated in a plane).
        let c = (0.6f64).cos();
        let s = (0.6f64).sin();
        let a = vec![
            c, 0.0, //
            s, 0.0, //
            0.0, c, //
            0.0, s,
        ];
        let sub = Subspace::with_matrix(n, 2, a.clone()).unwrap();

        let f = quadratic_oracle(h.clone(), n);
        let eps = 1e-3;
        let rep = sharpness(&f, &[0.0; 4], eps, &sub, &InnerSolver::VertexEnumeration, 0, 0)
            .unwrap();

        // Independent route: 0.5 y^T (A^T H A) y via the quadratic vertex
        // oracle over the same box (A+ 0 = 0 -> half-widths eps).
        let p = 2;
        let mut atha = vec![0.0; p * p];
        for r in 0..p {
            for c2 in 0..p {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += a[i * p + r] * h[i * n + j] * a[j * p + c2];
                    }
                }
                atha[r * p + c2] = acc;
            }
        }
        for r in 0..p {
            for c2 in 0..r {
                let avg = 0.5 * (atha[r * p + c2] + atha[c2 * p + r]);
                atha[r * p + c2] = avg;
                atha[c2 * p + r] = avg;
            }
        }
        let q = crate::boxmax::QuadraticObjective::new(p, atha, vec![0.0; p], 0.0).unwrap();
        let bounds = Bounds::symmetric(vec![eps; p]).unwrap();
        let (_, projected_max) = crate::boxmax::vertex_bruteforce_max(&q, &bounds).unwrap();
        let expect = 100.0 * projected_max;
        assert!((rep.phi - expect).abs() <= 1e-10, "{} vs {expect}", rep.phi);
    }

    #[test]
    fn random_subspace_is_deterministic_per_seed() {
        let a = Subspace::random(30, 5, 7).unwrap();
        let b = Subspace::random(30, 5, 7).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.kind(), SubspaceKind::Random { p: 5, seed: 7 });
    }
}
