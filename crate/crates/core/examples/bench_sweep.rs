//! Sweep the mask distance on a small grid and check the cost orderings.

use hybrid_sdf::bench::{run_scenario, sweep, trend_report, Knob, Pass, Scenario};

fn main() -> hybrid_sdf::Result<()> {
    let base = Scenario {
        id: "demo".into(),
        scene: "sphere".into(),
        size: None,
        coarse_dims: Some([32; 3]),
        fine_dims: Some([64; 3]),
        frames: 3,
        repeats: 3,
        render: false,
        ..Scenario::default()
    };
    let mut runs = Vec::new();
    for s in sweep(&base, Knob::MaskDistance, &[0.05, 0.1, 0.3, f64::INFINITY])? {
        let run = run_scenario(&s)?;
        println!(
            "{:<12} RT median {:>10.2?}, {} rays over {} frames",
            s.id,
            run.median(Pass::RT),
            run.total_rays(),
            s.frames
        );
        runs.push(run);
    }
    print!("{}", trend_report(&runs)?);
    Ok(())
}
