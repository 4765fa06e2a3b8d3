//! The idealized speedup model: how many iterations may a large-batch run
//! take, relative to a small-batch run, and still finish first on P workers?
//!
//! Run with: cargo run --example parallel_scaling_model

use flatmin::harness::perfmodel::{perf_speedup_bound, PerfModelInputs};

fn main() -> flatmin::Result<()> {
    // Reference point: small-batch parallel efficiency 0.2 and a batch ratio
    // of 0.1 mean the large-batch run must converge in at most half as many
    // iterations to win.
    let reference = PerfModelInputs {
        i_s: 10000.0,
        i_l: 4000.0,
        b_s: 600.0,
        b_l: 6000.0,
        p: 64.0,
        f_s: 0.2,
    };
    let out = perf_speedup_bound(&reference)?;
    println!(
        "f_s = 0.2, B_s/B_l = 0.1: iteration-ratio bound = {} (large batch wins here: {})",
        out.bound, out.lb_faster
    );

    for (f_s, ratio) in [(0.1, 0.5), (0.2, 0.5), (0.5, 0.5), (1.0, 0.5)] {
        let inputs = PerfModelInputs {
            i_s: 1000.0,
            i_l: 1000.0 * ratio,
            b_s: 256.0,
            b_l: 2560.0,
            p: 32.0,
            f_s,
        };
        let out = perf_speedup_bound(&inputs)?;
        println!(
            "f_s = {f_s:.1}: bound = {:.3}, i_l/i_s = {ratio:.2} -> lb faster: {}",
            out.bound, out.lb_faster
        );
    }
    Ok(())
}
