//! Vanilla gradient descent for PSD matrix completion (n = 1000, r = 10,
//! p = 0.1, step 0.2), printing the four error metrics.

use implicit_reg::ensembles::{gen_matrix_completion_unit, RngSeed};
use implicit_reg::matrix_completion::{mc_run, McConfig, StopRule};

fn main() -> implicit_reg::Result<()> {
    let inst = gen_matrix_completion_unit(1000, 10, 0.1, 0.0, RngSeed::new(2024, 0))?;
    let cfg = McConfig {
        eta: 0.2,
        max_iters: 500,
        tol_rel: 1e-5,
        record_every: 25,
        stop_rule: StopRule::AllMatrixNorms,
        ..McConfig::default()
    };
    let traj = mc_run(&inst, &cfg)?;
    println!(
        "{:>5} {:>11} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "iter", "fro", "op", "2inf", "entry", "XX fro", "XX op"
    );
    for rec in &traj.records {
        let e = rec.errors;
        println!(
            "{:>5} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
            rec.iter, e.err_fro, e.err_op, e.err_2inf, e.err_entrywise, e.mat_fro, e.mat_op
        );
    }
    println!(
        "converged: {} after {} iterations",
        traj.converged, traj.iterations
    );
    Ok(())
}
