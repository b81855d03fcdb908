//! Exact point-to-triangle and point-to-mesh distance.

use crate::geometry::TriangleMesh;
use crate::math::Vec3;

/// Closest point to `p` on triangle `abc`, by Voronoi region of the triangle.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }

    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    // face interior
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
pub fn point_triangle_distance_squared(p: Vec3, tri: [Vec3; 3]) -> f64 {
    (closest_point_on_triangle(p, tri[0], tri[1], tri[2]) - p).length_squared()
}

/// Unsigned distance from `point` to the nearest triangle, by exhaustive search.
///
/// This is the oracle every generated field is validated against; it never
/// uses the BVH.
pub fn exact_distance(mesh: &TriangleMesh, point: Vec3) -> f64 {
    (0..mesh.len())
        .map(|i| point_triangle_distance_squared(point, mesh.triangle(i)))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Affine3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_triangle() -> TriangleMesh {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap().0
    }

    #[test]
    fn vertex_point_is_zero() {
        let m = unit_triangle();
        assert_eq!(exact_distance(&m, Vec3::X), 0.0);
    }

    #[test]
    fn perpendicular_foot_inside_face() {
        let m = unit_triangle();
        assert!((exact_distance(&m, Vec3::new(0.0, 0.0, 2.0)) - 2.0).abs() < 1e-12);
        assert!((exact_distance(&m, Vec3::new(0.2, 0.2, -0.5)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_and_vertex_regions() {
        let m = unit_triangle();
        // beyond hypotenuse midpoint, in-plane
        let p = Vec3::new(1.0, 1.0, 0.0);
        assert!((exact_distance(&m, p) - (0.5f64).sqrt()).abs() < 1e-12);
        // beyond vertex a
        let q = Vec3::new(-3.0, -4.0, 0.0);
        assert!((exact_distance(&m, q) - 5.0).abs() < 1e-12);
    }

    /// Dense barycentric sampling of each triangle; the sampled distance can only
    /// overestimate, by at most the sample spacing.
    fn sampled_distance(mesh: &TriangleMesh, p: Vec3, steps: usize) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..mesh.len() {
            let [a, b, c] = mesh.triangle(t);
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let u = i as f64 / steps as f64;
                    let v = j as f64 / steps as f64;
                    let s = a + (b - a) * u + (c - a) * v;
                    best = best.min(s.distance(p));
                }
            }
        }
        best
    }

    #[test]
    fn agrees_with_surface_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mesh = crate::geometry::shapes::uv_sphere(Vec3::ZERO, 1.0, 6, 8)
            .transformed(&Affine3::scale(Vec3::new(1.0, 0.6, 1.3)))
            .unwrap();
        let steps = 40;
        // the longest edge bounds the sample spacing
        let max_edge = (0..mesh.len())
            .flat_map(|i| {
                let [a, b, c] = mesh.triangle(i);
                [a.distance(b), b.distance(c), c.distance(a)]
            })
            .fold(0.0, f64::max);
        let spacing = max_edge / steps as f64;
        for _ in 0..100 {
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let exact = exact_distance(&mesh, p);
            let sampled = sampled_distance(&mesh, p, steps);
            assert!(exact <= sampled + 1e-12, "exact {exact} > sampled {sampled}");
            assert!(sampled - exact <= spacing, "gap {} > {spacing}", sampled - exact);
        }
    }
}
