//! Procedural meshes used by the bundled scenes and tests.

use std::f64::consts::{PI, TAU};

use crate::geometry::TriangleMesh;
use crate::math::Vec3;

fn build(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles)
        .expect("procedural mesh has triangles")
        .0
}

/// Latitude/longitude sphere with outward normals; `2 * slices * (stacks - 1)` triangles.
pub fn uv_sphere(center: Vec3, radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    assert!(stacks >= 2 && slices >= 3);
    let mut v = vec![center + Vec3::Y * radius];
    for i in 1..stacks {
        let phi = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let theta = TAU * j as f64 / slices as f64;
            let dir = Vec3::new(phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin());
            v.push(center + dir * radius);
        }
    }
    v.push(center - Vec3::Y * radius);
    let south = (v.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut t = Vec::new();
    for j in 0..slices {
        t.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            t.push([a, b, d]);
            t.push([a, d, c]);
        }
    }
    for j in 0..slices {
        t.push([south, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    orient_outward(&v, &mut t, center);
    build(v, t)
}

/// Flips any triangle whose normal points toward `center`.
fn orient_outward(v: &[Vec3], tris: &mut [[u32; 3]], center: Vec3) {
    for tri in tris.iter_mut() {
        let [a, b, c] = tri.map(|i| v[i as usize]);
        let n = (b - a).cross(c - a);
        if n.dot((a + b + c) / 3.0 - center) < 0.0 {
            tri.swap(1, 2);
        }
    }
}

/// Axis-aligned box with outward normals, 12 triangles.
pub fn cuboid(center: Vec3, half: Vec3) -> TriangleMesh {
    let corner = |sx: f64, sy: f64, sz: f64| center + Vec3::new(sx * half.x, sy * half.y, sz * half.z);
    let v = vec![
        corner(-1.0, -1.0, -1.0),
        corner(1.0, -1.0, -1.0),
        corner(1.0, 1.0, -1.0),
        corner(-1.0, 1.0, -1.0),
        corner(-1.0, -1.0, 1.0),
        corner(1.0, -1.0, 1.0),
        corner(1.0, 1.0, 1.0),
        corner(-1.0, 1.0, 1.0),
    ];
    let quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [3, 7, 6, 2], [0, 4, 7, 3], [1, 2, 6, 5]];
    let mut t = Vec::new();
    for q in quads {
        t.push([q[0], q[1], q[2]]);
        t.push([q[0], q[2], q[3]]);
    }
    build(v, t)
}

pub fn cube(center: Vec3, half: f64) -> TriangleMesh {
    cuboid(center, Vec3::splat(half))
}

/// Square in the xz-plane through `center`, normal +y, `2 * n * n` triangles.
pub fn plane(center: Vec3, half_size: f64, subdivisions: usize) -> TriangleMesh {
    quad_grid(center, Vec3::Z * half_size, Vec3::X * half_size, subdivisions, subdivisions)
}

/// Parallelogram `center ± a ± b` split into an `na x nb` grid, normal along `a x b`.
pub fn quad_grid(center: Vec3, a: Vec3, b: Vec3, na: usize, nb: usize) -> TriangleMesh {
    let na = na.max(1);
    let nb = nb.max(1);
    let mut v = Vec::new();
    for i in 0..=na {
        for j in 0..=nb {
            let s = 2.0 * i as f64 / na as f64 - 1.0;
            let r = 2.0 * j as f64 / nb as f64 - 1.0;
            v.push(center + a * s + b * r);
        }
    }
    let idx = |i: usize, j: usize| (i * (nb + 1) + j) as u32;
    let mut t = Vec::new();
    for i in 0..na {
        for j in 0..nb {
            t.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            t.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    build(v, t)
}

/// Open tube from `a` to `b` (no caps).
pub fn tube(a: Vec3, b: Vec3, radius: f64, segments: usize) -> TriangleMesh {
    let axis = (b - a).normalize();
    let u = axis.any_orthonormal();
    let w = axis.cross(u);
    let mut v = Vec::new();
    for end in [a, b] {
        for k in 0..segments {
            let th = TAU * k as f64 / segments as f64;
            v.push(end + (u * th.cos() + w * th.sin()) * radius);
        }
    }
    let s = segments as u32;
    let mut t = Vec::new();
    for k in 0..s {
        let k1 = (k + 1) % s;
        t.push([k, k1, s + k1]);
        t.push([k, s + k1, s + k]);
    }
    // outward relative to the axis
    for tri in t.iter_mut() {
        let [p, q, r] = tri.map(|i| v[i as usize]);
        let n = (q - p).cross(r - p);
        let c = (p + q + r) / 3.0;
        let radial = (c - a) - axis * (c - a).dot(axis);
        if n.dot(radial) < 0.0 {
            tri.swap(1, 2);
        }
    }
    build(v, t)
}

/// Elliptical single-sided leaf centred at `center`, spanned by half-axes `a` and `b`.
pub fn ellipse(center: Vec3, a: Vec3, b: Vec3, segments: usize) -> TriangleMesh {
    let mut v = vec![center];
    for k in 0..segments {
        let th = TAU * k as f64 / segments as f64;
        v.push(center + a * th.cos() + b * th.sin());
    }
    let s = segments as u32;
    let t = (0..s).map(|k| [0, 1 + k, 1 + (k + 1) % s]).collect();
    build(v, t)
}

/// Surface of revolution around +y through `base`. `profile` holds `(radius, height)`
/// pairs from bottom to top; closed with caps when the end radii are positive.
pub fn lathe(base: Vec3, profile: &[(f64, f64)], slices: usize) -> TriangleMesh {
    let mut v = Vec::new();
    for &(r, h) in profile {
        for j in 0..slices {
            let th = TAU * j as f64 / slices as f64;
            v.push(base + Vec3::new(r * th.cos(), h, r * th.sin()));
        }
    }
    let ring = |i: usize, j: usize| (i * slices + j % slices) as u32;
    let mut t = Vec::new();
    for i in 0..profile.len() - 1 {
        for j in 0..slices {
            t.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            t.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    let bottom = v.len() as u32;
    v.push(base + Vec3::Y * profile[0].1);
    let top = v.len() as u32;
    v.push(base + Vec3::Y * profile[profile.len() - 1].1);
    for j in 0..slices {
        t.push([bottom, ring(0, j + 1), ring(0, j)]);
        t.push([top, ring(profile.len() - 1, j), ring(profile.len() - 1, j + 1)]);
    }
    // orient radially outward, caps along the axis
    let mid_h = 0.5 * (profile[0].1 + profile[profile.len() - 1].1);
    let axis_mid = base + Vec3::Y * mid_h;
    for tri in t.iter_mut() {
        let [p, q, r] = tri.map(|i| v[i as usize]);
        let n = (q - p).cross(r - p);
        let c = (p + q + r) / 3.0;
        let out = if tri.contains(&bottom) || tri.contains(&top) {
            c - axis_mid
        } else {
            Vec3::new(c.x - base.x, 0.0, c.z - base.z)
        };
        if n.dot(out) < 0.0 {
            tri.swap(1, 2);
        }
    }
    build(v, t)
}

/// Torus around `axis` through `center`.
pub fn torus(center: Vec3, axis: Vec3, major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    let w = axis.normalize();
    let u = w.any_orthonormal();
    let vv = w.cross(u);
    let mut v = Vec::new();
    for i in 0..rings {
        let a = TAU * i as f64 / rings as f64;
        let radial = u * a.cos() + vv * a.sin();
        let ring_center = center + radial * major;
        for j in 0..sides {
            let b = TAU * j as f64 / sides as f64;
            v.push(ring_center + (radial * b.cos() + w * b.sin()) * minor);
        }
    }
    let idx = |i: usize, j: usize| ((i % rings) * sides + j % sides) as u32;
    let mut t = Vec::new();
    for i in 0..rings {
        for j in 0..sides {
            t.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            t.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    for tri in t.iter_mut() {
        let [p, q, r] = tri.map(|i| v[i as usize]);
        let n = (q - p).cross(r - p);
        let c = (p + q + r) / 3.0;
        let rel = c - center;
        let radial = (rel - w * rel.dot(w)).normalize();
        let tube_center = center + radial * major;
        if n.dot(c - tube_center) < 0.0 {
            tri.swap(1, 2);
        }
    }
    build(v, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_triangle_count_and_outward() {
        let m = uv_sphere(Vec3::ZERO, 1.0, 48, 64);
        assert_eq!(m.len(), 2 * 64 * 47);
        for i in 0..m.len() {
            let [a, b, c] = m.triangle(i);
            assert!(m.normal(i).dot((a + b + c) / 3.0) > 0.0);
        }
    }

    #[test]
    fn plane_faces_up() {
        let m = plane(Vec3::ZERO, 1.0, 3);
        assert_eq!(m.len(), 18);
        assert!(m.normals().iter().all(|n| (*n - Vec3::Y).length() < 1e-12));
        assert!((m.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cube_outward() {
        let m = cube(Vec3::new(1.0, 2.0, 3.0), 0.5);
        for i in 0..m.len() {
            let [a, b, c] = m.triangle(i);
            let rel = (a + b + c) / 3.0 - Vec3::new(1.0, 2.0, 3.0);
            assert!(m.normal(i).dot(rel) > 0.0);
        }
    }
}
