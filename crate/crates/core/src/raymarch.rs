//! Sphere tracing and soft shadows through a distance field.
//!
//! The shadow march keeps a running penumbra term `min(k * D / t)` with
//! `k = 1 / tan(light_angle)`. Between two samples the closest approach is
//! estimated by triangulation:
//!
//! ```text
//! y = D^2 / (2 D_prev),  D_est = sqrt(D^2 - y^2),  t_est = t - y
//! ```
//!
//! falling back to `D / t` when `D_prev <= 0` or the distance is not shrinking.
//! Occlusion is `1 - min_term`, and `1` on a hit.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::math::{Frame, Vec3};

pub const DEFAULT_MAX_STEP: f64 = 0.05;
pub const DEFAULT_MAX_ITERATIONS: u32 = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchParams {
    /// Hit threshold; at least one fine cell.
    pub epsilon: f64,
    pub max_iterations: u32,
    /// Step cap, `f64::INFINITY` for plain sphere tracing.
    pub max_step: f64,
    pub t_max: f64,
    /// Start-offset jitter, as a fraction of `max_step`.
    pub jitter: f64,
    /// Penumbra cone half-angle in radians.
    pub light_angle: f64,
    /// Distance along the ray before the first sample.
    pub start_offset: f64,
    /// Estimate the closest approach between consecutive samples instead of
    /// using each sample's own `d / t`.
    pub triangulate: bool,
}

impl MarchParams {
    /// Defaults for a field with the given cell size: `epsilon` and the
    /// start offset are one cell, `max_step` is 0.05.
    pub fn new(cell_size: f64, t_max: f64) -> Result<MarchParams> {
        let p = MarchParams {
            epsilon: cell_size,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_step: DEFAULT_MAX_STEP,
            t_max,
            jitter: 0.0,
            light_angle: 0.05,
            start_offset: cell_size,
            triangulate: true,
        };
        p.validate(cell_size)?;
        Ok(p)
    }

    /// Defaults for shading through `field`: epsilon is one of its cells and
    /// shadow rays start past the shell its recorded beta and bias thicken,
    /// so lit surfaces do not shadow themselves. Jump-flooded distances are
    /// measured to seed-cell centres, which can undercut the true distance by
    /// another beta, hence the factor two.
    pub fn for_field(field: &DistanceField, t_max: f64) -> Result<MarchParams> {
        let cell = field.grid().max_cell_size();
        let mut p = MarchParams::new(cell, t_max)?;
        p.start_offset = cell + 2.0 * field.beta.max(0.0) as f64 + field.bias.max(0.0) as f64;
        Ok(p)
    }

    pub fn validate(&self, cell_size: f64) -> Result<()> {
        if !(self.epsilon >= cell_size * (1.0 - 1e-9)) {
            return Err(Error::Config(format!(
                "epsilon {} is below one fine cell ({cell_size})",
                self.epsilon
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        if !(self.light_angle > 0.0 && self.light_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config(format!("light angle {} out of (0, pi/2)", self.light_angle)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn hardness(&self) -> f64 {
        1.0 / self.light_angle.tan()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarchStatus {
    Hit,
    MissExited,
    MissMaxIter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchResult {
    pub status: MarchStatus,
    pub t: f64,
    pub iterations: u32,
    pub occlusion: f64,
    /// Smallest field value seen along the march.
    pub min_value: f64,
}

#[inline]
fn penumbra_term(d: f64, t: f64, prev: Option<f64>) -> f64 {
    match prev {
        Some(dp) if dp > 0.0 && d < dp => {
            let y = d * d / (2.0 * dp);
            let d_est = (d * d - y * y).max(0.0).sqrt();
            let t_est = t - y;
            if t_est > 0.0 {
                d_est / t_est
            } else {
                d / t
            }
        }
        _ => d / t,
    }
}

/// Shared march from `origin + t_start * dir`.
pub fn march(field: &DistanceField, origin: Vec3, dir: Vec3, t_start: f64, params: &MarchParams) -> MarchResult {
    let bounds = field.grid().bounds();
    let exit = match bounds.ray_interval(origin, dir) {
        Some((_, far)) if bounds.contains_point(origin) => far.min(params.t_max),
        _ => {
            return MarchResult {
                status: MarchStatus::MissExited,
                t: 0.0,
                iterations: 0,
                occlusion: 0.0,
                min_value: f64::INFINITY,
            }
        }
    };
    let k = params.hardness();
    let mut t = t_start;
    let mut prev: Option<f64> = None;
    let mut min_term = 1.0f64;
    let mut min_value = f64::INFINITY;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        if t > exit {
            return MarchResult {
                status: MarchStatus::MissExited,
                t,
                iterations,
                occlusion: 1.0 - min_term,
                min_value,
            };
        }
        iterations += 1;
        let d = field.sample(origin + dir * t);
        min_value = min_value.min(d);
        if d <= params.epsilon {
            return MarchResult {
                status: MarchStatus::Hit,
                t,
                iterations,
                occlusion: 1.0,
                min_value,
            };
        }
        if t > 0.0 {
            let term = if params.triangulate { penumbra_term(d, t, prev) } else { d / t };
            min_term = min_term.min((k * term).clamp(0.0, 1.0));
        }
        prev = Some(d);
        t += d.min(params.max_step);
    }
    let status = if t > exit { MarchStatus::MissExited } else { MarchStatus::MissMaxIter };
    MarchResult {
        status,
        t,
        iterations,
        occlusion: 1.0 - min_term,
        min_value,
    }
}

/// Plain sphere trace from `origin` (no start offset, no jitter).
pub fn sphere_trace(field: &DistanceField, origin: Vec3, dir: Vec3, params: &MarchParams) -> MarchResult {
    march(field, origin, dir, 0.0, params)
}

/// Occlusion toward a light direction from a surface point with normal `normal`.
pub fn soft_shadow<R: Rng + ?Sized>(
    field: &DistanceField,
    point: Vec3,
    normal: Vec3,
    light_dir: Vec3,
    params: &MarchParams,
    rng: &mut R,
) -> f64 {
    let origin = point + normal * params.epsilon;
    let jitter = if params.jitter > 0.0 {
        params.jitter * params.max_step.min(params.t_max) * rng.random::<f64>()
    } else {
        0.0
    };
    march(field, origin, light_dir, params.start_offset + jitter, params).occlusion
}

/// Light shapes that cast soft shadows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Light {
    /// Infinitely distant disc; `direction` points toward the light.
    Directional {
        direction: Vec3,
        angular_radius: f64,
        #[serde(default = "unit_intensity")]
        intensity: f64,
    },
    /// Finite disc facing `normal`.
    Disc {
        center: Vec3,
        radius: f64,
        normal: Vec3,
        #[serde(default = "unit_intensity")]
        intensity: f64,
    },
}

fn unit_intensity() -> f64 {
    1.0
}

impl Light {
    pub fn intensity(&self) -> f64 {
        match *self {
            Light::Directional { intensity, .. } | Light::Disc { intensity, .. } => intensity,
        }
    }

    /// Unit direction and distance from `p` to the light centre.
    pub fn toward_center(&self, p: Vec3) -> (Vec3, f64) {
        match *self {
            Light::Directional { direction, .. } => (direction.normalize(), f64::INFINITY),
            Light::Disc { center, .. } => {
                let v = center - p;
                let len = v.length();
                (v / len, len)
            }
        }
    }

    /// Half-angle subtended at `p`.
    pub fn angle_at(&self, p: Vec3) -> f64 {
        match *self {
            Light::Directional { angular_radius, .. } => angular_radius,
            Light::Disc { center, radius, .. } => (radius / (center - p).length()).atan(),
        }
    }

    /// Direction and distance to the point at polar position `(r01, phi)` on
    /// the light, `r01` in `[0, 1]` of the radius (area-uniform when
    /// `r01 = sqrt(u)`).
    pub fn toward_point(&self, p: Vec3, r01: f64, phi: f64) -> (Vec3, f64) {
        match *self {
            Light::Directional {
                direction,
                angular_radius,
                ..
            } => {
                // disc of radius tan(angle) one unit away, projected back to a direction
                let w = direction.normalize();
                let frame = Frame::from_w(w);
                let rad = angular_radius.tan() * r01;
                let local = Vec3::new(rad * phi.cos(), rad * phi.sin(), 1.0);
                (frame.to_world(local).normalize(), f64::INFINITY)
            }
            Light::Disc {
                center, radius, normal, ..
            } => {
                let frame = Frame::from_w(normal.normalize());
                let q = center + frame.to_world(Vec3::new(radius * r01 * phi.cos(), radius * r01 * phi.sin(), 0.0));
                let v = q - p;
                let len = v.length();
                (v / len, len)
            }
        }
    }

    /// Uniform point on the light.
    pub fn sample<R: Rng + ?Sized>(&self, p: Vec3, rng: &mut R) -> (Vec3, f64) {
        let r01 = rng.random::<f64>().sqrt();
        let phi = TAU * rng.random::<f64>();
        self.toward_point(p, r01, phi)
    }
}

/// Averages [`soft_shadow`] over `samples` points of the light disc laid out
/// on a randomly rotated Vogel spiral; the first point is the centre.
pub fn simulate_umbra<R: Rng + ?Sized>(
    field: &DistanceField,
    point: Vec3,
    normal: Vec3,
    light: &Light,
    samples: u32,
    params: &MarchParams,
    rng: &mut R,
) -> f64 {
    assert!(samples >= 1, "at least one light sample");
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rot = if samples > 1 { TAU * rng.random::<f64>() } else { 0.0 };
    let mut sum = 0.0;
    for i in 0..samples {
        let r01 = (i as f64 / samples as f64).sqrt();
        let (dir, _) = light.toward_point(point, r01, rot + golden * i as f64);
        sum += soft_shadow(field, point, normal, dir, params, rng);
    }
    sum / samples as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::math::Aabb;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_field(n: usize) -> DistanceField {
        DistanceField::from_fn(GridSpec::cubic(n, Aabb::cube(4.0)).unwrap(), |p| p.length() - 1.0)
    }

    fn params(field: &DistanceField) -> MarchParams {
        MarchParams::new(field.grid().max_cell_size(), 20.0).unwrap()
    }

    #[test]
    fn hits_unit_sphere() {
        // odd resolution puts a column of cell centres on the ray
        let f = sphere_field(65);
        let h = f.grid().max_cell_size();
        let mut p = params(&f);
        p.epsilon = 1e-3;
        p.max_step = f64::INFINITY;
        let r = sphere_trace(&f, Vec3::new(0.0, 0.0, -3.0), Vec3::Z, &p);
        assert_eq!(r.status, MarchStatus::Hit);
        assert!(r.t <= 2.0 && r.t >= 2.0 - p.epsilon - h, "t = {}", r.t);
        assert_eq!(r.occlusion, 1.0);
    }

    #[test]
    fn uniform_far_field_exits_in_one_step() {
        let f = DistanceField::constant(GridSpec::cubic(4, Aabb::cube(10.0)).unwrap(), 10.0);
        let mut p = params(&f);
        p.max_step = f64::INFINITY;
        p.t_max = 5.0;
        let r = sphere_trace(&f, Vec3::ZERO, Vec3::X, &p);
        assert_eq!(r.status, MarchStatus::MissExited);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn origin_outside_bounds_misses_at_once() {
        let f = sphere_field(16);
        let r = sphere_trace(&f, Vec3::splat(9.0), -Vec3::X, &params(&f));
        assert_eq!((r.status, r.iterations), (MarchStatus::MissExited, 0));
    }

    #[test]
    fn grazing_ray_runs_out_of_iterations() {
        // closest approach to the sphere is 1e-3 at x = 0, above epsilon
        let f = sphere_field(64);
        let mut p = params(&f);
        p.epsilon = 1e-4;
        p.max_iterations = 32;
        p.max_step = f64::INFINITY;
        let r = sphere_trace(&f, Vec3::new(-3.0, 1.001, 0.0), Vec3::X, &p);
        assert_eq!(r.status, MarchStatus::MissMaxIter);
        assert!(r.min_value > 1e-4);
    }

    #[test]
    fn step_cap_gives_about_128_samples() {
        let f = DistanceField::constant(GridSpec::cubic(4, Aabb::cube(4.0)).unwrap(), 10.0);
        let mut p = params(&f);
        p.t_max = 6.4;
        p.max_iterations = 1000;
        let r = sphere_trace(&f, Vec3::new(-3.2, 0.0, 0.0), Vec3::X, &p);
        assert_eq!(r.status, MarchStatus::MissExited);
        assert!((127..=130).contains(&r.iterations), "{}", r.iterations);
    }

    #[test]
    fn open_sky_and_blocked_light() {
        // plate field: distance to slab |y - 1| - 0.05 over a wide region
        let g = GridSpec::cubic(64, Aabb::cube(3.0)).unwrap();
        let plate = DistanceField::from_fn(g, |p| {
            let dy = (p.y - 1.0).abs() - 0.05;
            let dx = p.x.abs() - 2.0;
            let dz = p.z.abs() - 2.0;
            let o = Vec3::new(dx.max(0.0), dy.max(0.0), dz.max(0.0)).length();
            o + dx.max(dy).max(dz).min(0.0)
        });
        let mut p = MarchParams::new(g.max_cell_size(), 10.0).unwrap();
        p.light_angle = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(soft_shadow(&plate, Vec3::ZERO, Vec3::Y, Vec3::Y, &p, &mut rng), 1.0);
        let sky = DistanceField::constant(g, 100.0);
        assert_eq!(soft_shadow(&sky, Vec3::ZERO, Vec3::Y, Vec3::Y, &p, &mut rng), 0.0);
    }

    #[test]
    fn umbra_with_one_sample_is_center_shadow() {
        let f = sphere_field(32);
        let p = params(&f);
        let light = Light::Directional {
            direction: Vec3::new(0.3, 1.0, 0.2),
            angular_radius: 0.1,
            intensity: 1.0,
        };
        let pt = Vec3::new(0.4, -1.6, 0.1);
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let one = simulate_umbra(&f, pt, Vec3::Y, &light, 1, &p, &mut a);
        let direct = soft_shadow(&f, pt, Vec3::Y, light.toward_center(pt).0, &p, &mut b);
        assert_eq!(one, direct);
    }

    #[test]
    fn light_sampling_stays_in_cone() {
        let light = Light::Directional {
            direction: Vec3::new(0.0, 1.0, 1.0),
            angular_radius: 0.2,
            intensity: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = light.toward_center(Vec3::ZERO).0;
        for _ in 0..1000 {
            let (d, _) = light.sample(Vec3::ZERO, &mut rng);
            assert!(d.dot(c).acos() <= 0.2 + 1e-12);
        }
    }

    #[test]
    fn rejects_subvoxel_epsilon() {
        let mut p = MarchParams::new(0.1, 5.0).unwrap();
        p.epsilon = 0.05;
        assert!(p.validate(0.1).is_err());
    }
}
