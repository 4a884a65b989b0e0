//! Squared estimation error against SNR for noisy matrix completion at a
//! reduced size.

use implicit_reg::harness::{run_experiment, Experiment, ExperimentConfig};

fn main() -> implicit_reg::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.noise_scaling.n = 200;
    cfg.noise_scaling.r = 5;
    cfg.noise_scaling.p = 0.2;
    cfg.noise_scaling.trials = 4;
    cfg.noise_scaling.sigma_points = 5;
    let out = run_experiment(Experiment::NoiseScaling, &cfg)?;
    let t = &out.tables[0];
    let (snr, metric, err) = (
        t.column("snr_db").unwrap(),
        t.column("metric").unwrap(),
        t.column("sq_rel_error_db").unwrap(),
    );
    for row in &t.rows {
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        println!(
            "snr {:>7.2} dB  {:<14} {:>8.2} dB",
            v(snr),
            row[metric],
            v(err)
        );
    }
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
