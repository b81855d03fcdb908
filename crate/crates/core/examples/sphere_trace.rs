//! Sphere trace an analytic distance field and compare hits with the exact
//! ray/sphere intersection.

use hybrid_sdf::field::{DistanceField, GridSpec};
use hybrid_sdf::math::{Aabb, Vec3};
use hybrid_sdf::raymarch::{sphere_trace, MarchParams, MarchStatus};

fn main() -> hybrid_sdf::Result<()> {
    let r = 0.6;
    let grid = GridSpec::cubic(64, Aabb::cube(1.0))?;
    let field = DistanceField::from_fn(grid, |p| p.length() - r);
    let params = MarchParams::new(grid.max_cell_size(), 10.0)?;

    for (i, origin) in [Vec3::new(0.0, 0.0, -0.95), Vec3::new(0.3, 0.2, -0.9), Vec3::new(0.9, 0.9, 0.9)]
        .into_iter()
        .enumerate()
    {
        let dir = (Vec3::new(0.05 * i as f64, 0.0, 0.0) - origin).normalize();
        let hit = sphere_trace(&field, origin, dir, &params);
        let b = origin.dot(dir);
        let exact = -b - (b * b - origin.length_squared() + r * r).sqrt();
        println!(
            "ray {i}: {:?} at t = {:.4} after {} steps (exact surface at {exact:.4}, epsilon {:.4})",
            hit.status, hit.t, hit.iterations, params.epsilon
        );
        assert_eq!(hit.status, MarchStatus::Hit);
    }

    // a grazing miss still reports how close it came
    let graze = sphere_trace(&field, Vec3::new(r + 0.1, 0.0, -0.95), Vec3::new(0.0, 0.0, 1.0), &params);
    println!("grazing ray: {:?}, closest field value {:.4}, occlusion {:.3}", graze.status, graze.min_value, graze.occlusion);
    Ok(())
}
