//! Measure the box-constrained sharpness of a trained minimizer, in the full
//! parameter space and in a random 100-dimensional subspace, at the two
//! standard box sizes.
//!
//! Run with: cargo run --example sharpness_of_a_minimizer

use std::sync::Arc;

use flatmin::data::synth_gaussian;
use flatmin::net::{Network, NetworkSpec};
use flatmin::optim::{train, Checkpoint, SampleStrategy, StopRule, TrainConfig};
use flatmin::sharpness::{sharpness, InnerSolver, Subspace};
use flatmin::ParamVector;

fn main() -> flatmin::Result<()> {
    let (train_data, test_data) = synth_gaussian(1000, 300, 24, 5, 3.0, 11)?;
    let net = Network::new(NetworkSpec::fully_connected(24, &[32], 5, false))?;

    let init = Checkpoint { params: net.init_params(1), bn_state: net.fresh_state() };
    let mut cfg = TrainConfig::new(Default::default(), 32, SampleStrategy::EpochShuffle, 5);
    cfg.stop = StopRule { rel_improvement_tol: 1e-4, patience_epochs: 8, max_epochs: 60 };
    let trace = train(&net, &init, &train_data, &test_data, &cfg)?;
    println!(
        "trained {} epochs, train loss {:.5}, test acc {:.3}",
        trace.epochs_run,
        trace.best_record().train_loss,
        trace.best_record().test_acc
    );

    // Sharpness oracle: full-training-set loss and gradient at arbitrary
    // parameter vectors, with the solution's frozen running statistics.
    let solution = &trace.best;
    let state = solution.bn_state.clone();
    let oracle = |x: &[f64]| {
        let params = ParamVector::new(x.to_vec(), Arc::clone(net.layout()))?;
        net.dataset_loss_and_grad(&params, &train_data, &state)
    };

    let n = net.num_params();
    for epsilon in [1e-3, 5e-4] {
        for subspace in [Subspace::full(n), Subspace::random(n, 100, 42)?] {
            let report = sharpness(
                &oracle,
                solution.params.values(),
                epsilon,
                &subspace,
                &InnerSolver::default(),
                0,
                0,
            )?;
            println!(
                "eps {epsilon:<7} subspace {:?}: phi = {:.6} (f(x) = {:.6}, max = {:.6}, {} oracle calls)",
                report.subspace,
                report.phi,
                report.f_at_x,
                report.max_value_found,
                report.diagnostics.oracle_calls
            );
        }
    }
    Ok(())
}
