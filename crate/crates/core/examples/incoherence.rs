//! Tracks how incoherent the Wirtinger flow iterates stay with respect to
//! the sampling vectors, for a few problem sizes with m = 10n.

use implicit_reg::ensembles::{gen_phase_retrieval, RngSeed};
use implicit_reg::phase_retrieval::{pr_run, PrConfig};

fn main() -> implicit_reg::Result<()> {
    let cfg = PrConfig {
        eta: 0.1,
        max_iters: 200,
        tol_rel: 0.0,
        ..PrConfig::default()
    };
    for n in [20, 100, 200] {
        let inst = gen_phase_retrieval(n, 10 * n, RngSeed::new(7, 0))?;
        let traj = pr_run(&inst, &cfg)?;
        let worst = traj
            .records
            .iter()
            .skip(2)
            .map(|r| r.incoherence_diff)
            .fold(0.0, f64::max);
        println!("n = {n}");
        for rec in traj.records.iter().step_by(25) {
            println!(
                "  t {:>4}  raw {:>7.3}  diff {:>7.3}  rel dist {:.2e}",
                rec.iter, rec.incoherence_raw, rec.incoherence_diff, rec.rel_dist
            );
        }
        println!("  max diff over t > 1: {worst:.3}");
    }
    Ok(())
}
