//! Scenes, primary visibility, shading and the distributed-ray reference.

pub mod gbuffer;
pub mod scenes;
pub mod shade;

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::math::{Aabb, Affine3, Vec3};
use crate::raymarch::Light;

pub use gbuffer::{rasterize_gbuffer, GBuffer, GSample};
pub use shade::{compare, reference_render, reference_visibility, shade, shadow_occlusion, Metrics, ShadeParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Primary ray direction through the centre of pixel `(x, y)`, row 0 at the top.
    pub fn ray(&self, x: usize, y: usize) -> Vec3 {
        let forward = (self.target - self.position).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let tan = (self.vfov.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * tan * aspect;
        let sy = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * tan;
        (forward + right * sx + up * sy).normalize()
    }

    pub fn with_size(mut self, width: usize, height: usize) -> Camera {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.target - self.position;
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera image size must be positive".into()));
        }
        if !(self.vfov > 0.0 && self.vfov < 180.0) || f.length() == 0.0 || f.cross(self.up).length() < 1e-9 {
            return Err(Error::Config("degenerate camera".into()));
        }
        Ok(())
    }
}

/// Rigid motion of a dynamic instance over frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Track {
    Fixed,
    /// Circles `center` in the xz-plane after holding still for `dwell` frames.
    Orbit {
        center: Vec3,
        radius: f64,
        /// Frames per revolution.
        period: f64,
        dwell: u64,
    },
}

impl Track {
    pub fn transform(&self, frame: u64) -> Affine3 {
        match *self {
            Track::Fixed => Affine3::IDENTITY,
            Track::Orbit {
                center,
                radius,
                period,
                dwell,
            } => {
                let a = TAU * frame.saturating_sub(dwell) as f64 / period;
                let pos = center + Vec3::new(radius * a.cos(), 0.0, radius * a.sin());
                Affine3::translation(pos).then(&Affine3::rotation_y(-a))
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Track::Fixed)
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    /// Mesh in object space.
    pub mesh: Arc<TriangleMesh>,
    pub track: Track,
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub static_mesh: Option<Arc<TriangleMesh>>,
    pub instances: Vec<Instance>,
    pub light: Light,
    pub bounds: Aabb,
    pub camera: Camera,
}

impl Scene {
    /// Checks the camera and that every instance stays inside the bounds
    /// over one revolution of its track.
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let slack = 1e-9 * self.bounds.diagonal();
        if let Some(m) = &self.static_mesh {
            if !self.bounds.contains_box(&m.bounds(), slack) {
                return Err(Error::Config(format!("scene {:?}: static mesh exceeds bounds", self.name)));
            }
        }
        for (n, inst) in self.instances.iter().enumerate() {
            let frames: Vec<u64> = match inst.track {
                Track::Fixed => vec![0],
                Track::Orbit { period, dwell, .. } => {
                    (0..=64)
                        .map(|i| dwell.saturating_add((i as f64 * period / 64.0).round() as u64))
                        .collect()
                }
            };
            for f in frames {
                let m = inst.mesh.transformed(&inst.track.transform(f))?;
                if !self.bounds.contains_box(&m.bounds(), slack) {
                    return Err(Error::Config(format!(
                        "scene {:?}: instance {n} leaves the bounds at frame {f}",
                        self.name
                    )));
                }
            }
        }
        if self.static_mesh.is_none() && self.instances.is_empty() {
            return Err(Error::Config(format!("scene {:?} is empty", self.name)));
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.instances.iter().all(|i| i.track.is_static())
    }

    /// World-space geometry at `frame`.
    pub fn mesh_at(&self, frame: u64) -> Result<Arc<TriangleMesh>> {
        let moved: Vec<TriangleMesh> = self
            .instances
            .iter()
            .map(|i| i.mesh.transformed(&i.track.transform(frame)))
            .collect::<Result<_>>()?;
        if moved.is_empty() {
            if let Some(m) = &self.static_mesh {
                return Ok(m.clone());
            }
        }
        let parts: Vec<&TriangleMesh> = self.static_mesh.as_deref().into_iter().chain(moved.iter()).collect();
        Ok(Arc::new(TriangleMesh::merge(parts)?))
    }
}
