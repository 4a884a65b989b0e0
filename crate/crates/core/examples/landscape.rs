//! Restricted strong convexity and smoothness checks for the three losses
//! and for the alignment objective, at the default desk sizes.

use implicit_reg::landscape::{
    alignment_convexity, bd_landscape, mc_landscape, pr_landscape, AlignConvexityConfig,
    BdLandscapeConfig, LandscapeReport, McLandscapeConfig, PrLandscapeConfig,
};

fn show(rep: &LandscapeReport) {
    println!(
        "{:<6} seed {:>3}  min {:>9.4} (>= {:.4})  max {:>9.4} (<= {:.4})  probes {:>6}  {}",
        rep.suite,
        rep.master_seed,
        rep.min_curvature(),
        rep.lower_bound,
        rep.max_curvature(),
        rep.upper_bound,
        rep.probes,
        if rep.passed() { "pass" } else { "FAIL" }
    );
}

fn main() -> implicit_reg::Result<()> {
    for seed in [1, 2, 3] {
        show(&pr_landscape(&PrLandscapeConfig::default(), seed)?);
        show(&mc_landscape(&McLandscapeConfig::default(), seed)?);
        show(&bd_landscape(&BdLandscapeConfig::default(), seed)?);
        show(&alignment_convexity(
            &AlignConvexityConfig::default(),
            seed,
        )?);
    }
    // The alignment Hessian loses definiteness once |alpha| can drop near 1/2.
    let wide = AlignConvexityConfig {
        delta: 0.05,
        ..AlignConvexityConfig::default()
    };
    show(&alignment_convexity(&wide, 1)?);
    Ok(())
}
