//! Wirtinger flow with spectral initialization on a Gaussian phase retrieval
//! instance (n = 100, m = 1000, step 0.1).

use implicit_reg::ensembles::{gen_phase_retrieval, RngSeed};
use implicit_reg::phase_retrieval::{pr_run, PrConfig};

fn main() -> implicit_reg::Result<()> {
    let inst = gen_phase_retrieval(100, 1000, RngSeed::new(2024, 0))?;
    let cfg = PrConfig {
        eta: 0.1,
        max_iters: 500,
        tol_rel: 1e-10,
        record_every: 10,
        ..PrConfig::default()
    };
    let traj = pr_run(&inst, &cfg)?;
    println!(
        "{:>5} {:>12} {:>12} {:>10}",
        "iter", "rel_dist", "loss", "incoh"
    );
    for rec in &traj.records {
        println!(
            "{:>5} {:>12.3e} {:>12.3e} {:>10.4}",
            rec.iter, rec.rel_dist, rec.loss, rec.incoherence_diff
        );
    }
    println!(
        "converged: {} after {} iterations",
        traj.converged, traj.iterations
    );
    Ok(())
}
