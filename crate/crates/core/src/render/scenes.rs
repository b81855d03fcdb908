//! Procedural stand-in scenes.
//!
//! | name                | content                                                  |
//! |---------------------|----------------------------------------------------------|
//! | `sphere`            | tessellated sphere, radius 0.75 (6016 triangles)         |
//! | `sphere-over-plane` | sphere hovering over a ground plane, soft sun            |
//! | `thin-plate`        | zero-thickness leaves on a thin stem over a ground plane |
//! | `orbit`             | teapot proxy circling a pillar on a ground plane         |
//! | `cube`              | cube resting on a ground plane                           |
//!
//! All share the world box `[-2, 2]^3`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::shapes::{cube, ellipse, lathe, plane, torus, tube, uv_sphere};
use crate::geometry::{load_mesh, TriangleMesh};
use crate::math::{Aabb, Affine3, Vec3};
use crate::raymarch::Light;
use crate::render::{Camera, Instance, Scene, Track};

pub const NAMES: [&str; 5] = ["sphere", "sphere-over-plane", "thin-plate", "orbit", "cube"];

pub const GROUND_Y: f64 = -1.0;

const TEAPOT_OBJ: &[u8] = include_bytes!("../../assets/teapot_proxy.obj");

pub fn by_name(name: &str) -> Result<Scene> {
    let scene = match name {
        "sphere" => sphere(),
        "sphere-over-plane" => sphere_over_plane(),
        "thin-plate" => thin_plate(),
        "orbit" => orbit(0),
        "cube" => cube_on_plane(),
        _ => {
            return Err(Error::Config(format!(
                "unknown scene {name:?}; expected one of {}",
                NAMES.join(", ")
            )))
        }
    };
    scene.validate()?;
    Ok(scene)
}

fn world() -> Aabb {
    Aabb::cube(2.0)
}

fn ground() -> TriangleMesh {
    plane(Vec3::new(0.0, GROUND_Y, 0.0), 1.9, 16)
}

fn sun(direction: Vec3, angular_radius: f64) -> Light {
    Light::Directional {
        direction: direction.normalize(),
        angular_radius,
        intensity: 1.0,
    }
}

fn view(position: Vec3, target: Vec3) -> Camera {
    Camera {
        position,
        target,
        up: Vec3::Y,
        vfov: 45.0,
        width: 320,
        height: 240,
    }
}

fn still(name: &str, meshes: &[&TriangleMesh], light: Light, camera: Camera) -> Scene {
    Scene {
        name: name.into(),
        static_mesh: Some(Arc::new(TriangleMesh::merge(meshes.iter().copied()).expect("non-empty"))),
        instances: Vec::new(),
        light,
        bounds: world(),
        camera,
    }
}

pub fn sphere() -> Scene {
    still(
        "sphere",
        &[&uv_sphere(Vec3::ZERO, 0.75, 48, 64)],
        sun(Vec3::new(0.4, 1.0, 0.3), 0.05),
        view(Vec3::new(0.0, 1.5, 4.0), Vec3::ZERO),
    )
}

pub const SPHERE_OVER_PLANE_CENTER: Vec3 = Vec3::new(0.0, -0.3, 0.0);
pub const SPHERE_OVER_PLANE_RADIUS: f64 = 0.4;

pub fn sphere_over_plane() -> Scene {
    still(
        "sphere-over-plane",
        &[
            &ground(),
            &uv_sphere(SPHERE_OVER_PLANE_CENTER, SPHERE_OVER_PLANE_RADIUS, 32, 48),
        ],
        sun(Vec3::new(0.0, 1.0, 0.0), 0.08),
        view(Vec3::new(0.0, 2.2, 2.8), Vec3::new(0.0, -1.0, 0.0)),
    )
}

/// Leaves of zero thickness joined by a stem thinner than one coarse cell.
pub fn thin_plate() -> Scene {
    let base = Vec3::new(0.0, GROUND_Y, 0.0);
    let top = Vec3::new(0.0, 0.2, 0.0);
    let stem = tube(base, top, 0.01, 8);
    let leaf = |at: Vec3, toward: Vec3, len: f64, width: f64| {
        let a = toward.normalize() * len;
        let b = a.cross(Vec3::Y).normalize() * width;
        let tilt = Vec3::Y * 0.15 * len;
        ellipse(at + a + tilt, a + tilt, b, 24)
    };
    let l1 = leaf(top, Vec3::new(1.0, 0.0, 0.2), 0.35, 0.14);
    let l2 = leaf(Vec3::new(0.0, -0.15, 0.0), Vec3::new(-0.6, 0.0, 0.8), 0.3, 0.12);
    let l3 = leaf(Vec3::new(0.0, -0.45, 0.0), Vec3::new(-0.5, 0.0, -0.9), 0.28, 0.1);
    still(
        "thin-plate",
        &[&ground(), &stem, &l1, &l2, &l3],
        sun(Vec3::new(0.15, 1.0, 0.1), 0.03),
        view(Vec3::new(0.0, 2.6, 1.6), Vec3::new(0.0, -0.9, 0.0)),
    )
}

/// Teapot proxy circling a central pillar; it holds still for `dwell` frames first.
pub fn orbit(dwell: u64) -> Scene {
    let (teapot, _) = load_mesh(TEAPOT_OBJ, &Affine3::uniform_scale(1.2)).expect("bundled asset parses");
    Scene {
        name: "orbit".into(),
        static_mesh: Some(Arc::new(
            TriangleMesh::merge([&ground(), &cube(Vec3::new(0.0, -0.7, 0.0), 0.3)]).expect("non-empty"),
        )),
        instances: vec![Instance {
            mesh: Arc::new(teapot),
            track: Track::Orbit {
                center: Vec3::new(0.0, GROUND_Y, 0.0),
                radius: 1.0,
                period: 120.0,
                dwell,
            },
        }],
        light: sun(Vec3::new(0.3, 1.0, 0.2), 0.05),
        bounds: world(),
        camera: view(Vec3::new(0.0, 2.4, 3.0), Vec3::new(0.0, -0.9, 0.0)),
    }
}

pub fn cube_on_plane() -> Scene {
    still(
        "cube",
        &[&ground(), &cube(Vec3::new(0.0, -0.5, 0.0), 0.5)],
        sun(Vec3::new(0.5, 1.0, 0.3), 0.06),
        view(Vec3::new(1.5, 1.8, 3.2), Vec3::new(0.0, -0.6, 0.0)),
    )
}

/// Lathed body, torus handle, tube spout and knob; about a thousand
/// triangles, base at the origin. The bundled OBJ is this mesh.
pub fn teapot_proxy() -> TriangleMesh {
    let body = lathe(
        Vec3::ZERO,
        &[
            (0.18, 0.0),
            (0.26, 0.04),
            (0.30, 0.12),
            (0.30, 0.20),
            (0.27, 0.28),
            (0.20, 0.34),
            (0.12, 0.37),
            (0.06, 0.40),
            (0.05, 0.43),
        ],
        32,
    );
    let knob = uv_sphere(Vec3::new(0.0, 0.45, 0.0), 0.04, 6, 10);
    let handle = torus(Vec3::new(-0.3, 0.2, 0.0), Vec3::Z, 0.1, 0.025, 16, 8);
    let spout = tube(Vec3::new(0.26, 0.12, 0.0), Vec3::new(0.45, 0.3, 0.0), 0.035, 12);
    TriangleMesh::merge([&body, &knob, &handle, &spout]).expect("non-empty")
}
