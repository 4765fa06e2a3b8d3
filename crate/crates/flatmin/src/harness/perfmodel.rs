//! Idealized performance model for distributed training: when is a
//! large-batch run faster end-to-end than a small-batch run?
//!
//! With `I_s`/`I_l` iterations, batch sizes `B_s`/`B_l`, `P` processors, and
//! small-batch parallel efficiency `f_s` (the large-batch side is assumed
//! perfectly scalable), the large-batch method wins exactly when
//! `I_l * B_l / P < I_s * B_s / (P * f_s)`, i.e. when the iteration ratio
//! `I_l / I_s` stays strictly below `B_s / (f_s * B_l)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfModelInputs {
    /// Iterations for the small-batch method to reach the target accuracy.
    pub i_s: f64,
    /// Iterations for the large-batch method.
    pub i_l: f64,
    pub b_s: f64,
    pub b_l: f64,
    /// Processor count; the model assumes `p < b_l`.
    pub p: f64,
    /// Small-batch parallel efficiency, in (0, 1].
    pub f_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupBound {
    /// Iteration-ratio bound `b_s / (f_s * b_l)`.
    pub bound: f64,
    /// Whether the supplied iteration counts satisfy `i_l / i_s < bound`.
    pub lb_faster: bool,
}

pub fn perf_speedup_bound(inputs: &PerfModelInputs) -> Result<SpeedupBound> {
    if !(inputs.f_s > 0.0 && inputs.f_s <= 1.0) {
        return Err(Error::Domain(format!(
            "parallel efficiency must be in (0, 1], got {}",
            inputs.f_s
        )));
    }
    for (name, v) in [
        ("i_s", inputs.i_s),
        ("i_l", inputs.i_l),
        ("b_s", inputs.b_s),
        ("b_l", inputs.b_l),
        ("p", inputs.p),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if inputs.p >= inputs.b_l {
        return Err(Error::Domain(format!(
            "model assumes p < b_l, got p = {} and b_l = {}",
            inputs.p, inputs.b_l
        )));
    }
    let bound = inputs.b_s / (inputs.f_s * inputs.b_l);
    // Strict inequality: hitting the bound exactly is not a win.
    let lb_faster = inputs.i_l / inputs.i_s < bound;
    Ok(SpeedupBound { bound, lb_faster })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_example_gives_one_half() {
        // f_s = 0.2 and B_s/B_l = 0.1: the large-batch method must converge
        // in at most half as many iterations.
        let inputs =
            PerfModelInputs { i_s: 100.0, i_l: 40.0, b_s: 100.0, b_l: 1000.0, p: 10.0, f_s: 0.2 };
        let out = perf_speedup_bound(&inputs).unwrap();
        assert_eq!(out.bound, 0.5);
        assert!(out.lb_faster);
    }

    #[test]
    fn symmetric_case_bound_is_one() {
        let inputs =
            PerfModelInputs { i_s: 50.0, i_l: 50.0, b_s: 64.0, b_l: 64.0, p: 8.0, f_s: 1.0 };
        let out = perf_speedup_bound(&inputs).unwrap();
        assert_eq!(out.bound, 1.0);
        // equal iteration counts hit the bound exactly: not strictly faster
        assert!(!out.lb_faster);
    }

    #[test]
    fn hitting_the_bound_exactly_is_not_faster() {
        let inputs =
            PerfModelInputs { i_s: 100.0, i_l: 50.0, b_s: 100.0, b_l: 1000.0, p: 4.0, f_s: 0.2 };
        let out = perf_speedup_bound(&inputs).unwrap();
        assert_eq!(inputs.i_l / inputs.i_s, out.bound);
        assert!(!out.lb_faster);
    }

    #[test]
    fn domain_errors() {
        let mut inputs =
            PerfModelInputs { i_s: 1.0, i_l: 1.0, b_s: 1.0, b_l: 10.0, p: 2.0, f_s: 0.0 };
        assert!(perf_speedup_bound(&inputs).is_err());
        inputs.f_s = 0.5;
        inputs.p = 10.0;
        assert!(perf_speedup_bound(&inputs).is_err());
    }
}
