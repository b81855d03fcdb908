//! Render soft shadows from a generated field and from distributed ray
//! tracing, then report the difference.
//!
//! cargo run --release --example soft_shadows -- [scene] [out-dir]

use hybrid_sdf::geometry::Bvh;
use hybrid_sdf::pipeline::{Pipeline, PipelineConfig, Size};
use hybrid_sdf::raymarch::MarchParams;
use hybrid_sdf::render::{compare, rasterize_gbuffer, reference_render, scenes, shade, ShadeParams};

fn main() -> hybrid_sdf::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "sphere-over-plane".into());
    let out = std::path::PathBuf::from(args.next().unwrap_or_else(|| "shadows-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| hybrid_sdf::Error::io(&out, e))?;

    let scene = scenes::by_name(&name)?;
    let mut p = Pipeline::new(scene.clone(), PipelineConfig::sized(Size::S))?;
    p.run(20)?;
    let field = p.fine_field();

    let bvh = Bvh::build(scene.mesh_at(0)?);
    let camera = scene.camera.with_size(240, 180);
    let gbuf = rasterize_gbuffer(&bvh, &camera);

    let march = MarchParams::for_field(&field, scene.bounds.diagonal())?;
    let mut params = ShadeParams::new(march);
    let sdf = shade(&gbuf, &field, &scene.light, &params, None);

    // jittered start offsets, averaged, smooth the fixed-step pattern
    params.march.jitter = 0.9;
    params.jitter_draws = 16;
    let jittered = shade(&gbuf, &field, &scene.light, &params, None);

    let reference = reference_render(&gbuf, &bvh, &scene.light, 64, 1, [0.0; 3]);
    for (label, img) in [("sdf", &sdf), ("jittered", &jittered)] {
        let m = compare(img, &reference, None)?;
        println!("{label:>8}: RMSE {:.4}, MAE {:.4}, max {:.3} over {} pixels", m.rmse, m.mae, m.max, m.pixels);
        img.write_ppm(&out.join(format!("{label}.ppm")), 2.2)?;
    }
    reference.write_ppm(&out.join("reference.ppm"), 2.2)?;
    println!("wrote images to {}", out.display());
    Ok(())
}
