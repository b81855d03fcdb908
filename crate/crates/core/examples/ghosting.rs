//! Measure how fast stale distances fade behind a moving object for a few
//! decay factors.

use hybrid_sdf::bench::{ghosting_experiment, GhostingConfig};

fn main() -> hybrid_sdf::Result<()> {
    for alpha in [0.8, 0.95] {
        let curve = ghosting_experiment(&GhostingConfig {
            alpha,
            window: 24,
            ..GhostingConfig::default()
        })?;
        println!(
            "alpha {alpha}: {} tracked texels, envelope holds: {}, half-life {:?} frames",
            curve.tracked, curve.bound_holds, curve.half_life
        );
        for f in curve.frames.iter().step_by(6) {
            println!("  k {:>2}: mean gap {:.5}, mean error {:.5}", f.k, f.mean_gap, f.mean_error);
        }
        println!(
            "  {}/{} texels pushed past d took the coarse value at once",
            curve.vacated_unmasked_exact, curve.vacated_unmasked
        );
    }
    Ok(())
}
