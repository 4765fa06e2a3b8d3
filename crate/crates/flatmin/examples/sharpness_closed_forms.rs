//! Sanity-check the sharpness metric on quadratics with known box maxima:
//! the exact vertex oracle and the 10-iteration bounded quasi-Newton solver
//! should agree to within a couple percent.
//!
//! Run with: cargo run --example sharpness_closed_forms

use flatmin::sharpness::{sharpness, InnerSolver, Subspace};

fn main() -> flatmin::Result<()> {
    let cases: Vec<(&str, f64, Box<dyn Fn(&[f64]) -> flatmin::Result<(f64, Vec<f64>)> + Sync>)> = vec![
        (
            "f(z) = z^2 at 0 (expect phi = 1e-4)",
            1e-4,
            Box::new(|z: &[f64]| Ok((z[0] * z[0], vec![2.0 * z[0]]))),
        ),
        (
            "f(z) = (z1^2 + 4 z2^2)/2 at 0 (expect phi = 2.5e-4)",
            2.5e-4,
            Box::new(|z: &[f64]| {
                Ok((
                    0.5 * (z[0] * z[0] + 4.0 * z[1] * z[1]),
                    vec![z[0], 4.0 * z[1]],
                ))
            }),
        ),
    ];

    for (label, expect, f) in &cases {
        let n = if label.contains("z2") { 2 } else { 1 };
        let x = vec![0.0; n];
        let subspace = Subspace::full(n);
        let exact = sharpness(f, &x, 1e-3, &subspace, &InnerSolver::VertexEnumeration, 0, 0)?;
        let solved = sharpness(f, &x, 1e-3, &subspace, &InnerSolver::default(), 0, 0)?;
        println!("{label}");
        println!("  vertex oracle phi = {:.9}  (expected {expect:.9})", exact.phi);
        println!(
            "  quasi-Newton  phi = {:.9}  (relative gap {:.2e})",
            solved.phi,
            (solved.phi - exact.phi).abs() / exact.phi
        );
    }

    // A constant function is perfectly flat.
    let flat = |z: &[f64]| Ok((1.0, vec![0.0; z.len()]));
    let report = sharpness(&flat, &[0.3, -0.1], 1e-3, &Subspace::full(2), &InnerSolver::default(), 0, 0)?;
    println!("constant function: phi = {}", report.phi);
    Ok(())
}
