//! Distance between the full gradient descent run and its leave-one-out
//! copies, for each of the three problems at small sizes.

use implicit_reg::blind_deconvolution::BdConfig;
use implicit_reg::ensembles::{
    gen_blind_deconv, gen_matrix_completion_unit, gen_phase_retrieval, RngSeed,
};
use implicit_reg::leave_one_out::{bd_loo_analysis, mc_loo_analysis, pr_loo_analysis, LooReport};
use implicit_reg::matrix_completion::McConfig;
use implicit_reg::phase_retrieval::PrConfig;

fn show(rep: &LooReport) {
    println!(
        "{}: initial gap {:.3e}, worst gap {:.3e}",
        rep.problem.tag(),
        rep.initial_gap(),
        rep.worst_gap()
    );
    for i in (0..rep.iters.len()).step_by(30) {
        println!(
            "  t {:>4}  max gap {:.3e} (l = {})",
            rep.iters[i], rep.max_gap[i], rep.argmax_gap[i]
        );
    }
}

fn main() -> implicit_reg::Result<()> {
    let seed = RngSeed::new(5, 0);
    let ls: Vec<usize> = (0..10).collect();

    let pr = gen_phase_retrieval(100, 1000, seed)?;
    let cfg = PrConfig {
        eta: 0.1,
        max_iters: 150,
        tol_rel: 0.0,
        ..PrConfig::default()
    };
    show(&pr_loo_analysis(&pr, &cfg, &ls)?);

    let mc = gen_matrix_completion_unit(300, 3, 0.3, 0.0, seed)?;
    let cfg = McConfig {
        eta: 0.2,
        max_iters: 150,
        tol_rel: 0.0,
        ..McConfig::default()
    };
    show(&mc_loo_analysis(&mc, &cfg, &ls[..5])?);

    let bd = gen_blind_deconv(50, 500, seed)?;
    let cfg = BdConfig {
        eta: 0.5,
        max_iters: 150,
        tol_rel: 0.0,
        record_every: 1,
    };
    show(&bd_loo_analysis(&bd, &cfg, &ls)?);
    Ok(())
}
