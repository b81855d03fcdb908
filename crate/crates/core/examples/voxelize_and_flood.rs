//! Voxelize a mesh, jump flood the occupied cells and write a distance slice.
//!
//! cargo run --release --example voxelize_and_flood -- [out.ppm]

use std::time::Instant;

use hybrid_sdf::field::{Axis, GridSpec};
use hybrid_sdf::jfa::{default_beta, jfa_run, schedule, seeds_to_sdf};
use hybrid_sdf::render::scenes;
use hybrid_sdf::voxelize::voxelize;

fn main() -> hybrid_sdf::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "flood-slice.ppm".into());
    let scene = scenes::thin_plate();
    let mesh = scene.mesh_at(0)?;
    let grid = GridSpec::cubic(64, scene.bounds)?;

    let t = Instant::now();
    let vox = voxelize(&mesh, &grid)?;
    println!("{} triangles -> {} occupied cells of {} ({:?})", mesh.len(), vox.count(), grid.len(), t.elapsed());

    let t = Instant::now();
    let seeds = jfa_run(&vox)?;
    println!("flooded with offsets {:?} ({:?})", schedule(grid.dims()), t.elapsed());

    let beta = default_beta(&grid);
    let sdf = seeds_to_sdf(&seeds, beta)?;
    let inside = sdf.values().iter().filter(|&&v| v < 0.0).count();
    println!("beta {beta:.4}: {inside} cells read negative (the thickened shell)");

    // vertical slice through the stem
    let k = grid.cell_of(hybrid_sdf::math::Vec3::ZERO).map_or(32, |c| c[2]);
    sdf.slice(Axis::Z, k)?.to_image(0.5).write_ppm(out.as_ref(), 1.0)?;
    println!("wrote {out}");
    Ok(())
}
