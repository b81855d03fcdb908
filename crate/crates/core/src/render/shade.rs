use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::geometry::Bvh;
use crate::image::Image;
use crate::raymarch::{simulate_umbra, soft_shadow, Light, MarchParams};
use crate::raysample::texel_rng;
use crate::render::GBuffer;

const PIXEL_SALT: u64 = 0x5bd1_e995_0000_0001;
/// Offset for exact shadow rays off the true surface.
const RAY_OFFSET: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShadeParams {
    pub march: MarchParams,
    /// Independent jittered shadow marches averaged per pixel.
    pub jitter_draws: u32,
    /// Light-disc samples for the umbra experiment; 0 disables it.
    pub umbra_samples: u32,
    /// Composite an exact BVH shadow ray with `max`.
    pub hard_shadow_fallback: bool,
    pub seed: u64,
    pub frame: u64,
    pub background: [f32; 3],
}

impl ShadeParams {
    pub fn new(march: MarchParams) -> ShadeParams {
        ShadeParams {
            march,
            jitter_draws: 1,
            umbra_samples: 0,
            hard_shadow_fallback: false,
            seed: 0,
            frame: 0,
            background: [0.0, 0.0, 0.0],
        }
    }
}

/// Per-pixel occlusion in `[0, 1]`; `None` for sky. Pixels facing away from
/// the light are fully occluded.
pub fn shadow_occlusion(
    gbuffer: &GBuffer,
    field: &DistanceField,
    light: &Light,
    params: &ShadeParams,
    hard: Option<&Bvh>,
) -> Vec<Option<f64>> {
    gbuffer
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let s = s.as_ref()?;
            let (l, dist) = light.toward_center(s.position);
            if s.normal.dot(l) <= 0.0 {
                return Some(1.0);
            }
            let mut mp = params.march;
            mp.light_angle = light.angle_at(s.position);
            if dist.is_finite() {
                mp.t_max = mp.t_max.min(dist);
            }
            let mut rng = texel_rng(params.seed ^ PIXEL_SALT, i, params.frame);
            let mut occ = if params.umbra_samples > 0 {
                simulate_umbra(field, s.position, s.normal, light, params.umbra_samples, &mp, &mut rng)
            } else {
                let n = params.jitter_draws.max(1);
                (0..n)
                    .map(|_| soft_shadow(field, s.position, s.normal, l, &mp, &mut rng))
                    .sum::<f64>()
                    / n as f64
            };
            if params.hard_shadow_fallback {
                if let Some(bvh) = hard {
                    let o = s.position + s.normal * RAY_OFFSET;
                    if bvh.occluded(o, l, 0.0, dist) {
                        occ = 1.0;
                    }
                }
            }
            Some(occ.clamp(0.0, 1.0))
        })
        .collect()
}

fn lambert(gbuffer: &GBuffer, light: &Light, occlusion: &[Option<f64>], background: [f32; 3]) -> Image {
    let px: Vec<[f32; 3]> = gbuffer
        .samples
        .iter()
        .zip(occlusion)
        .map(|(s, occ)| match (s, occ) {
            (Some(s), Some(occ)) => {
                let (l, _) = light.toward_center(s.position);
                let e = (light.intensity() * s.normal.dot(l).max(0.0) * (1.0 - occ)) as f32;
                s.albedo.map(|a| a * e)
            }
            _ => background,
        })
        .collect();
    Image::from_pixels(gbuffer.width, gbuffer.height, px).expect("one value per pixel")
}

/// Lambertian direct light attenuated by sphere-traced soft shadows.
pub fn shade(gbuffer: &GBuffer, field: &DistanceField, light: &Light, params: &ShadeParams, hard: Option<&Bvh>) -> Image {
    let occ = shadow_occlusion(gbuffer, field, light, params, hard);
    lambert(gbuffer, light, &occ, params.background)
}

/// Fraction of `spp` exact shadow rays toward uniform light points that are
/// blocked; `None` for sky.
pub fn reference_visibility(gbuffer: &GBuffer, bvh: &Bvh, light: &Light, spp: u32, seed: u64) -> Vec<Option<f64>> {
    assert!(spp >= 1, "at least one sample per pixel");
    gbuffer
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let s = s.as_ref()?;
            let (l, _) = light.toward_center(s.position);
            if s.normal.dot(l) <= 0.0 {
                return Some(1.0);
            }
            let mut rng = texel_rng(seed ^ PIXEL_SALT, i, 0);
            let o = s.position + s.normal * RAY_OFFSET;
            let blocked = (0..spp)
                .filter(|_| {
                    let (d, dist) = light.sample(s.position, &mut rng);
                    bvh.occluded(o, d, 0.0, dist)
                })
                .count();
            Some(blocked as f64 / spp as f64)
        })
        .collect()
}

/// Ground truth by distributed ray tracing with the same Lambert shading.
pub fn reference_render(
    gbuffer: &GBuffer,
    bvh: &Bvh,
    light: &Light,
    spp: u32,
    seed: u64,
    background: [f32; 3],
) -> Image {
    let occ = reference_visibility(gbuffer, bvh, light, spp, seed);
    lambert(gbuffer, light, &occ, background)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub max: f64,
    pub pixels: usize,
}

/// Per-channel error statistics in linear radiance over `mask` (or all pixels).
pub fn compare(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<Metrics> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if let Some(m) = mask {
        if m.len() != a.pixels().len() {
            return Err(Error::DimensionMismatch("mask size differs from image".into()));
        }
    }
    let (mut se, mut ae, mut mx, mut n) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for (i, (p, q)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for c in 0..3 {
            let d = (p[c] as f64 - q[c] as f64).abs();
            se += d * d;
            ae += d;
            mx = mx.max(d);
        }
        n += 1;
    }
    let count = (3 * n).max(1) as f64;
    Ok(Metrics {
        rmse: (se / count).sqrt(),
        mae: ae / count,
        max: mx,
        pixels: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::geometry::shapes::plane;
    use crate::math::{Aabb, Vec3};
    use crate::render::{rasterize_gbuffer, Camera};
    use std::sync::Arc;

    fn setup() -> (GBuffer, Bvh, DistanceField) {
        let bvh = Bvh::build(Arc::new(plane(Vec3::ZERO, 1.5, 2)));
        let cam = Camera {
            position: Vec3::new(0.0, 3.0, 0.01),
            target: Vec3::ZERO,
            up: Vec3::Z,
            vfov: 30.0,
            width: 16,
            height: 16,
        };
        let g = rasterize_gbuffer(&bvh, &cam);
        let grid = GridSpec::cubic(32, Aabb::cube(2.0)).unwrap();
        let field = DistanceField::from_fn(grid, |p| p.y.abs());
        (g, bvh, field)
    }

    #[test]
    fn compare_examples() {
        let a = Image::from_fn(4, 3, |x, y| [x as f32 * 0.1, y as f32 * 0.2, 0.5]);
        let m = compare(&a, &a, None).unwrap();
        assert_eq!((m.rmse, m.mae, m.max), (0.0, 0.0, 0.0));
        let b = Image::from_fn(4, 3, |x, y| {
            let p = a.get(x, y);
            [p[0] + 0.1, p[1] + 0.1, p[2] + 0.1]
        });
        let m = compare(&a, &b, None).unwrap();
        assert!((m.mae - 0.1).abs() < 1e-6);
        assert!(compare(&a, &Image::new(3, 3), None).is_err());
    }

    #[test]
    fn unoccluded_plane_is_uniform_and_back_faces_are_black() {
        let (g, bvh, field) = setup();
        let light = Light::Directional {
            direction: Vec3::new(0.2, 1.0, 0.1),
            angular_radius: 0.05,
            intensity: 1.0,
        };
        let p = ShadeParams::new(MarchParams::new(field.grid().max_cell_size(), 10.0).unwrap());
        let img = shade(&g, &field, &light, &p, None);
        let covered: Vec<f32> = g
            .samples
            .iter()
            .zip(img.pixels())
            .filter(|(s, _)| s.is_some())
            .map(|(_, px)| px[0])
            .collect();
        assert!(covered.len() > 100);
        let first = covered[0];
        assert!(first > 0.5);
        assert!(covered.iter().all(|&v| (v - first).abs() < 1e-6));
        let refimg = reference_render(&g, &bvh, &light, 4, 1, [0.0; 3]);
        assert!(compare(&img, &refimg, None).unwrap().max < 1e-6);

        let below = Light::Directional {
            direction: -Vec3::Y,
            angular_radius: 0.05,
            intensity: 1.0,
        };
        let dark = shade(&g, &field, &below, &p, None);
        assert!(dark.pixels().iter().all(|px| px[0] == 0.0));
    }
}
