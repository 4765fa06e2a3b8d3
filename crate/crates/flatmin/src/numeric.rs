//! Deterministic numeric kernels.
//!
//! Every reduction that crosses batch rows goes through a fixed-shape pairwise
//! summation tree (sequential runs of [`PAIRWISE_BASE`] elements at the
//! leaves). The tree shape depends only on the element count, never on thread
//! count, so results are bit-identical however the surrounding work is
//! scheduled.

use crate::error::{Error, Result};

/// Leaf size of the pairwise summation tree.
pub const PAIRWISE_BASE: usize = 32;

/// Pairwise sum with a fixed reduction tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Pairwise dot product with the same fixed tree as [`pairwise_sum`].
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BASE {
        let mut acc = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            acc += x * y;
        }
        acc
    } else {
        let mid = a.len() / 2;
        pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
    }
}

pub fn l2_norm(x: &[f64]) -> f64 {
    pairwise_dot(x, x).sqrt()
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Streaming pairwise reducer for equal-length vectors (binary-counter
/// merging). Pushing blocks in a fixed order yields a fixed reduction tree.
pub struct PairwiseVecAccumulator {
    dim: usize,
    // (level, partial sum); entries with equal level are merged eagerly.
    stack: Vec<(u32, Vec<f64>)>,
}

impl PairwiseVecAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { dim, stack: Vec::new() }
    }

    pub fn push(&mut self, block: Vec<f64>) {
        debug_assert_eq!(block.len(), self.dim);
        let mut level = 0u32;
        let mut cur = block;
        while let Some((top_level, _)) = self.stack.last() {
            if *top_level != level {
                break;
            }
            let (_, top) = self.stack.pop().unwrap();
            for (c, t) in cur.iter_mut().zip(&top) {
                *c += *t;
            }
            level += 1;
        }
        self.stack.push((level, cur));
    }

    pub fn finish(mut self) -> Vec<f64> {
        let mut acc = match self.stack.pop() {
            Some((_, v)) => v,
            None => return vec![0.0; self.dim],
        };
        while let Some((_, next)) = self.stack.pop() {
            for (a, n) in acc.iter_mut().zip(&next) {
                *a += *n;
            }
        }
        acc
    }
}

/// `out = a * b` for row-major `a` (m x k) and `b` (k x n).
pub fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// `out = a * b^T` for row-major `a` (m x k) and `b` (n x k).
pub fn matmul_bt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&x, &y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            out[i * n + j] = acc;
        }
    }
}

/// `a^T * b` over the row (batch) index, reduced chunk-sequentially then
/// pairwise across chunks: the per-example gradient reduction tree.
pub fn matmul_at_b_pairwise(rows: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows * k);
    debug_assert_eq!(b.len(), rows * n);
    let mut acc = PairwiseVecAccumulator::new(k * n);
    let mut r = 0;
    while r < rows {
        let end = (r + PAIRWISE_BASE).min(rows);
        let mut block = vec![0.0; k * n];
        for row in r..end {
            let a_row = &a[row * k..(row + 1) * k];
            let b_row = &b[row * n..(row + 1) * n];
            for (i, &av) in a_row.iter().enumerate() {
                let dst = &mut block[i * n..(i + 1) * n];
                for (d, &bv) in dst.iter_mut().zip(b_row) {
                    *d += av * bv;
                }
            }
        }
        acc.push(block);
        r = end;
    }
    acc.finish()
}

/// Per-column sums over rows with the chunked pairwise tree.
pub fn column_sums_pairwise(rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows * cols);
    let mut acc = PairwiseVecAccumulator::new(cols);
    let mut r = 0;
    while r < rows {
        let end = (r + PAIRWISE_BASE).min(rows);
        let mut block = vec![0.0; cols];
        for row in r..end {
            let x_row = &x[row * cols..(row + 1) * cols];
            for (b, &v) in block.iter_mut().zip(x_row) {
                *b += v;
            }
        }
        acc.push(block);
        r = end;
    }
    acc.finish()
}

/// Per-column sums of `(x - mean)^2` with the chunked pairwise tree.
pub fn column_sq_dev_pairwise(rows: usize, cols: usize, x: &[f64], mean: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mean.len(), cols);
    let mut acc = PairwiseVecAccumulator::new(cols);
    let mut r = 0;
    while r < rows {
        let end = (r + PAIRWISE_BASE).min(rows);
        let mut block = vec![0.0; cols];
        for row in r..end {
            let x_row = &x[row * cols..(row + 1) * cols];
            for ((b, &v), &mu) in block.iter_mut().zip(x_row).zip(mean) {
                let d = v - mu;
                *b += d * d;
            }
        }
        acc.push(block);
        r = end;
    }
    acc.finish()
}

/// Solve the symmetric positive definite system `a w = b` (row-major p x p)
/// by Cholesky factorization. Returns `None` when a pivot is not safely
/// positive.
pub fn cholesky_solve(p: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), p * p);
    debug_assert_eq!(b.len(), p);
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for t in 0..j {
                s -= l[i * p + t] * l[j * p + t];
            }
            if i == j {
                let floor = 1e-12 * a[i * p + i].abs().max(1.0);
                if s <= floor {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for t in 0..i {
            s -= l[i * p + t] * y[t];
        }
        y[i] = s / l[i * p + i];
    }
    let mut w = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for t in i + 1..p {
            s -= l[t * p + i] * w[t];
        }
        w[i] = s / l[i * p + i];
    }
    Some(w)
}

/// Least-squares solve of `a w ~= x` for full-column-rank `a` (n x p,
/// row-major) via Householder QR. Fallback path for [`cholesky_solve`].
pub fn qr_least_squares(n: usize, p: usize, a: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * p);
    debug_assert_eq!(x.len(), n);
    if n < p {
        return Err(Error::Shape(format!(
            "least squares needs n >= p, got {n} x {p}"
        )));
    }
    let mut r = a.to_vec();
    let mut rhs = x.to_vec();
    for col in 0..p {
        // Householder vector for column `col` below the diagonal.
        let mut norm = 0.0;
        for i in col..n {
            norm += r[i * p + col] * r[i * p + col];
        }
        let norm = norm.sqrt();
        if norm == 0.0 {
            return Err(Error::RankDeficient(format!("zero column {col} in QR")));
        }
        let alpha = if r[col * p + col] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n - col];
        v[0] = r[col * p + col] - alpha;
        for i in col + 1..n {
            v[i - col] = r[i * p + col];
        }
        let vtv = v.iter().map(|t| t * t).sum::<f64>();
        if vtv == 0.0 {
            continue;
        }
        // Apply I - 2 v v^T / (v^T v) to the remaining columns and rhs.
        for j in col..p {
            let mut dot = 0.0;
            for i in col..n {
                dot += v[i - col] * r[i * p + j];
            }
            let scale = 2.0 * dot / vtv;
            for i in col..n {
                r[i * p + j] -= scale * v[i - col];
            }
        }
        let mut dot = 0.0;
        for i in col..n {
            dot += v[i - col] * rhs[i];
        }
        let scale = 2.0 * dot / vtv;
        for i in col..n {
            rhs[i] -= scale * v[i - col];
        }
    }
    let mut w = vec![0.0; p];
    for i in (0..p).rev() {
        let diag = r[i * p + i];
        if diag.abs() < 1e-12 {
            return Err(Error::RankDeficient(format!(
                "QR diagonal {i} is {diag:.3e}"
            )));
        }
        let mut s = rhs[i];
        for j in i + 1..p {
            s -= r[i * p + j] * w[j];
        }
        w[i] = s / diag;
    }
    Ok(w)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a tag path. Used so that every
/// task (trial, epoch, subspace draw, ...) owns an independent stream that
/// does not depend on scheduling.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0xff51_afd7_ed55_8ccd);
        out = splitmix64(&mut state);
    }
    out
}

/// FNV-1a over bytes; stable across runs and platforms (used for config
/// hashes in CSV comments).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mean and sample standard deviation (n-1 denominator; 0 when n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let devs: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&devs) / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}
