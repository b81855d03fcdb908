use rayon::prelude::*;

use crate::geometry::Bvh;
use crate::math::Vec3;
use crate::render::Camera;

/// Surface seen through one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GSample {
    pub position: Vec3,
    /// Geometric normal, flipped toward the camera.
    pub normal: Vec3,
    pub albedo: [f32; 3],
    pub triangle: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// `None` where the pixel sees the sky.
    pub samples: Vec<Option<GSample>>,
}

impl GBuffer {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<&GSample> {
        self.samples[y * self.width + x].as_ref()
    }

    pub fn coverage(&self) -> usize {
        self.samples.iter().filter(|s| s.is_some()).count()
    }
}

pub const ALBEDO: [f32; 3] = [0.8, 0.8, 0.8];

/// Primary visibility by closest-hit ray casting from the camera.
pub fn rasterize_gbuffer(bvh: &Bvh, camera: &Camera) -> GBuffer {
    let (w, h) = (camera.width, camera.height);
    let samples = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let dir = camera.ray(i % w, i / w);
            bvh.ray_query(camera.position, dir, f64::INFINITY).map(|hit| {
                let n = bvh.mesh().normal(hit.triangle);
                GSample {
                    position: camera.position + dir * hit.t,
                    normal: if n.dot(dir) > 0.0 { -n } else { n },
                    albedo: ALBEDO,
                    triangle: hit.triangle,
                }
            })
        })
        .collect();
    GBuffer {
        width: w,
        height: h,
        samples,
    }
}
