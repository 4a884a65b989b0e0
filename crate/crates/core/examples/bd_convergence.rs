//! Scaled Wirtinger gradient descent for blind deconvolution (K = 100,
//! m = 1000, step 0.5).

use implicit_reg::blind_deconvolution::{bd_run, BdConfig};
use implicit_reg::ensembles::{gen_blind_deconv, RngSeed};

fn main() -> implicit_reg::Result<()> {
    let inst = gen_blind_deconv(100, 1000, RngSeed::new(2024, 0))?;
    let cfg = BdConfig {
        eta: 0.5,
        max_iters: 300,
        tol_rel: 1e-10,
        record_every: 10,
    };
    let traj = bd_run(&inst, &cfg)?;
    println!(
        "{:>5} {:>12} {:>12} {:>10} {:>10}",
        "iter", "rel_fro", "dist", "inc_a", "inc_b"
    );
    for rec in &traj.records {
        println!(
            "{:>5} {:>12.3e} {:>12.3e} {:>10.4} {:>10.4}",
            rec.iter, rec.rel_fro, rec.dist, rec.inc_a, rec.inc_b
        );
    }
    println!(
        "converged: {} after {} iterations",
        traj.converged, traj.iterations
    );
    Ok(())
}
