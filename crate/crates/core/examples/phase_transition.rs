//! A coarse phase transition sweep over the sampling rate for vanilla,
//! projected and regularized gradient descent (n = 200, 5 trials per point).

use implicit_reg::harness::{run_experiment, Experiment, ExperimentConfig};

fn main() -> implicit_reg::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.phase_transition.n = 200;
    cfg.phase_transition.r = 5;
    cfg.phase_transition.p_min = 0.02;
    cfg.phase_transition.p_max = 0.2;
    cfg.phase_transition.p_points = 7;
    cfg.phase_transition.trials = 5;
    let out = run_experiment(Experiment::PhaseTransition, &cfg)?;
    print!("{}", out.tables[0].to_csv()?);
    for c in &out.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(())
}
