//! Run the coarse-to-fine pipeline on a static scene and save both fields.
//!
//! cargo run --release --example generate_field -- [frames] [out-dir]

use hybrid_sdf::field::Axis;
use hybrid_sdf::pipeline::{Pipeline, PipelineConfig, Size};
use hybrid_sdf::render::scenes;

fn main() -> hybrid_sdf::Result<()> {
    let mut args = std::env::args().skip(1);
    let frames: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "field-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| hybrid_sdf::Error::io(&out, e))?;

    let mut p = Pipeline::new(scenes::sphere(), PipelineConfig::sized(Size::S))?;
    for report in p.run(frames)? {
        if report.frame % 5 == 0 {
            println!(
                "frame {:>3}: V {:>9.2?} JF {:>9.2?} RT {:>9.2?}  {} masked texels, {} rays",
                report.frame,
                report.voxelize,
                report.jump_flood,
                report.ray_sample,
                report.stats.masked_texels,
                report.stats.rays_traced
            );
        }
    }

    // compare the two fields against the exact distance at masked texels
    let acc = p.accumulator();
    let grid = *acc.grid();
    let coarse = p.coarse_field().resample(grid);
    let bvh = p.bvh().clone();
    let (mut err_f, mut err_c, mut n) = (0.0, 0.0, 0usize);
    for (i, t) in acc.texels().iter().enumerate().step_by(7) {
        if t.masked() {
            let exact = bvh.nearest_distance(grid.cell_center_of(i));
            err_f += (acc.values()[i].abs() as f64 - exact).abs();
            err_c += (coarse.values()[i].abs() as f64 - exact).abs();
            n += 1;
        }
    }
    println!("mean |error| on {n} masked texels: fine {:.4}, coarse {:.4}", err_f / n as f64, err_c / n as f64);

    let fine = p.fine_field();
    p.coarse_field().save(&out.join("coarse.rsdf"))?;
    fine.save(&out.join("fine.rsdf"))?;
    let mid = fine.grid().dims()[2] / 2;
    fine.slice(Axis::Z, mid)?.to_image(0.5).write_ppm(&out.join("fine-slice.ppm"), 1.0)?;
    println!("wrote coarse.rsdf, fine.rsdf and fine-slice.ppm to {}", out.display());
    Ok(())
}
