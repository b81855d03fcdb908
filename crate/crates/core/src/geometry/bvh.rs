//! Bounding volume hierarchy over a [`TriangleMesh`].
//!
//! Built with a binned surface-area heuristic, falling back to a median split
//! deep in the tree. Queries resolve ties by the smaller triangle id so
//! results match exhaustive search exactly.

use std::sync::Arc;

use crate::geometry::distance::point_triangle_distance_squared;
use crate::geometry::TriangleMesh;
use crate::math::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;
const STACK_DEPTH: usize = 64;
const SAH_BINS: usize = 12;
/// Below this depth splits are median splits, which bounds the tree height.
const SAH_MAX_DEPTH: usize = 40;

/// Which side of a triangle a ray struck.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Facing {
    /// Ray direction opposes the geometric normal.
    Front,
    Back,
}

impl Facing {
    pub fn flip(self) -> Facing {
        match self {
            Facing::Front => Facing::Back,
            Facing::Back => Facing::Front,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
    pub facing: Facing,
}

#[derive(Clone, Copy, Debug)]
enum NodeKind {
    Interior { left: u32, right: u32 },
    Leaf { start: u32, count: u32 },
}

#[derive(Clone, Copy, Debug)]
pub struct BvhNode {
    pub bounds: Aabb,
    kind: NodeKind,
}

impl BvhNode {
    pub fn children(&self) -> Option<(usize, usize)> {
        match self.kind {
            NodeKind::Interior { left, right } => Some((left as usize, right as usize)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn leaf_range(&self) -> Option<std::ops::Range<usize>> {
        match self.kind {
            NodeKind::Leaf { start, count } => Some(start as usize..(start + count) as usize),
            NodeKind::Interior { .. } => None,
        }
    }
}

/// Immutable BVH that owns a shared handle to its mesh.
#[derive(Clone, Debug)]
pub struct Bvh {
    mesh: Arc<TriangleMesh>,
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
    /// Triangle corners in leaf order.
    tris: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn build(mesh: Arc<TriangleMesh>) -> Bvh {
        let n = mesh.len();
        let centroids: Vec<Vec3> = (0..n)
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                (a + b + c) / 3.0
            })
            .collect();
        let tri_bounds: Vec<Aabb> = (0..n).map(|i| mesh.triangle_bounds(i)).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        let mut b = Builder {
            nodes: &mut nodes,
            centroids: &centroids,
            tri_bounds: &tri_bounds,
        };
        b.build(&mut order, 0, n, 0);
        let tris = order.iter().map(|&t| mesh.triangle(t as usize)).collect();
        Bvh {
            mesh,
            nodes,
            order,
            tris,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle ids in leaf order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest intersection with `t` in `[0, t_max]`.
    pub fn ray_query(&self, origin: Vec3, direction: Vec3, t_max: f64) -> Option<RayHit> {
        self.ray_query_range(origin, direction, 0.0, t_max)
    }

    /// Nearest intersection with `t` in `[t_min, t_max]`.
    pub fn ray_query_range(
        &self,
        origin: Vec3,
        direction: Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<RayHit> {
        let inv = Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack = [0u32; STACK_DEPTH];
        let mut sp = 0;
        if self.nodes[0].bounds.ray_entry(origin, inv, limit).is_none() {
            return None;
        }
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for slot in start as usize..(start + count) as usize {
                        if let Some(t) = intersect_triangle(origin, direction, self.tris[slot]) {
                            let tri = self.order[slot] as usize;
                            if t >= t_min && t <= limit && better(t, tri, best) {
                                best = Some((t, tri));
                                limit = t;
                            }
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    let l = self.nodes[left as usize].bounds.ray_entry(origin, inv, limit);
                    let r = self.nodes[right as usize].bounds.ray_entry(origin, inv, limit);
                    match (l, r) {
                        (Some(tl), Some(tr)) => {
                            // push far first so near is popped next
                            let (near, far) = if tl <= tr { (left, right) } else { (right, left) };
                            stack[sp] = far;
                            stack[sp + 1] = near;
                            sp += 2;
                        }
                        (Some(_), None) => {
                            stack[sp] = left;
                            sp += 1;
                        }
                        (None, Some(_)) => {
                            stack[sp] = right;
                            sp += 1;
                        }
                        (None, None) => {}
                    }
                }
            }
        }
        best.map(|(t, tri)| self.make_hit(direction, t, tri))
    }

    /// True if any triangle is hit with `t` in `[t_min, t_max]`.
    pub fn occluded(&self, origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> bool {
        let inv = Vec3::new(1.0 / direction.x, 1.0 / direction.y, 1.0 / direction.z);
        let mut stack = [0u32; STACK_DEPTH];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.ray_entry(origin, inv, t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for slot in start as usize..(start + count) as usize {
                        if let Some(t) = intersect_triangle(origin, direction, self.tris[slot]) {
                            if t >= t_min && t <= t_max {
                                return true;
                            }
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    stack[sp] = left;
                    stack[sp + 1] = right;
                    sp += 2;
                }
            }
        }
        false
    }

    /// Unsigned distance to the nearest triangle, by branch and bound.
    pub fn nearest_distance(&self, point: Vec3) -> f64 {
        self.nearest_triangle(point).map_or(f64::INFINITY, |(d, _)| d)
    }

    /// Distance and id of the nearest triangle.
    pub fn nearest_triangle(&self, point: Vec3) -> Option<(f64, usize)> {
        let mut best_d2 = f64::INFINITY;
        let mut best_tri = None;
        let mut stack = [0u32; STACK_DEPTH];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.distance_squared(point) > best_d2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for slot in start as usize..(start + count) as usize {
                        let tri = self.order[slot] as usize;
                        let d2 = point_triangle_distance_squared(point, self.tris[slot]);
                        if d2 < best_d2 || (d2 == best_d2 && best_tri.is_some_and(|b| tri < b)) {
                            best_d2 = d2;
                            best_tri = Some(tri);
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    let dl = self.nodes[left as usize].bounds.distance_squared(point);
                    let dr = self.nodes[right as usize].bounds.distance_squared(point);
                    let (near, far) = if dl <= dr { (left, right) } else { (right, left) };
                    stack[sp] = far;
                    stack[sp + 1] = near;
                    sp += 2;
                }
            }
        }
        best_tri.map(|t| (best_d2.sqrt(), t))
    }

    fn make_hit(&self, direction: Vec3, t: f64, tri: usize) -> RayHit {
        RayHit {
            t,
            triangle: tri,
            facing: facing_of(direction, self.mesh.normal(tri)),
        }
    }
}

#[inline]
fn better(t: f64, tri: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((bt, btri)) => t < bt || (t == bt && tri < btri),
    }
}

#[inline]
pub fn facing_of(direction: Vec3, normal: Vec3) -> Facing {
    if direction.dot(normal) < 0.0 {
        Facing::Front
    } else {
        Facing::Back
    }
}

/// Möller–Trumbore intersection, two-sided. Returns the ray parameter.
#[inline]
pub fn intersect_triangle(origin: Vec3, direction: Vec3, tri: [Vec3; 3]) -> Option<f64> {
    let [a, b, c] = tri;
    let e1 = b - a;
    let e2 = c - a;
    let pvec = direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = direction.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    (t >= 0.0).then_some(t)
}

/// Exhaustive nearest hit over every triangle; the reference for [`Bvh::ray_query`].
pub fn brute_force_ray_query(
    mesh: &TriangleMesh,
    origin: Vec3,
    direction: Vec3,
    t_max: f64,
) -> Option<RayHit> {
    let mut best: Option<(f64, usize)> = None;
    for tri in 0..mesh.len() {
        if let Some(t) = intersect_triangle(origin, direction, mesh.triangle(tri)) {
            if t <= t_max && better(t, tri, best) {
                best = Some((t, tri));
            }
        }
    }
    best.map(|(t, tri)| RayHit {
        t,
        triangle: tri,
        facing: facing_of(direction, mesh.normal(tri)),
    })
}

struct Builder<'a> {
    nodes: &'a mut Vec<BvhNode>,
    centroids: &'a [Vec3],
    tri_bounds: &'a [Aabb],
}

fn half_area(b: &Aabb) -> f64 {
    if b.min.x > b.max.x {
        return 0.0;
    }
    let e = b.extent();
    e.x * e.y + e.y * e.z + e.z * e.x
}

impl Builder<'_> {
    fn build(&mut self, order: &mut [u32], start: usize, end: usize, depth: usize) -> u32 {
        let bounds = order[start..end]
            .iter()
            .fold(Aabb::EMPTY, |b, &t| b.union(self.tri_bounds[t as usize]));
        let index = self.nodes.len() as u32;
        let count = end - start;
        let leaf = BvhNode {
            bounds,
            kind: NodeKind::Leaf {
                start: start as u32,
                count: count as u32,
            },
        };
        if count <= LEAF_SIZE {
            self.nodes.push(leaf);
            return index;
        }
        let cb = Aabb::from_points(order[start..end].iter().map(|&t| self.centroids[t as usize]));
        let axis = cb.extent().max_axis();
        let mid = match self.sah_split(&mut order[start..end], &cb, axis, &bounds, depth) {
            Some(m) => start + m,
            None if count <= 2 * LEAF_SIZE && depth < SAH_MAX_DEPTH => {
                self.nodes.push(leaf);
                return index;
            }
            None => {
                let centroids = self.centroids;
                order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
                    centroids[a as usize][axis]
                        .total_cmp(&centroids[b as usize][axis])
                        .then(a.cmp(&b))
                });
                start + count / 2
            }
        };
        self.nodes.push(BvhNode {
            bounds,
            kind: NodeKind::Leaf { start: 0, count: 0 },
        });
        let left = self.build(order, start, mid, depth + 1);
        let right = self.build(order, mid, end, depth + 1);
        self.nodes[index as usize].kind = NodeKind::Interior { left, right };
        index
    }

    /// Partitions `order` at the cheapest bin boundary; `None` if no split
    /// beats a leaf or the centroids coincide.
    fn sah_split(&self, order: &mut [u32], cb: &Aabb, axis: usize, bounds: &Aabb, depth: usize) -> Option<usize> {
        let (lo, ext) = (cb.min[axis], cb.extent()[axis]);
        if depth >= SAH_MAX_DEPTH || !(ext > 0.0) {
            return None;
        }
        let bin_of = |t: u32| {
            let u = (self.centroids[t as usize][axis] - lo) / ext;
            ((u * SAH_BINS as f64) as usize).min(SAH_BINS - 1)
        };
        let mut counts = [0usize; SAH_BINS];
        let mut boxes = [Aabb::EMPTY; SAH_BINS];
        for &t in order.iter() {
            let b = bin_of(t);
            counts[b] += 1;
            boxes[b] = boxes[b].union(self.tri_bounds[t as usize]);
        }
        let mut right_area = [0.0; SAH_BINS];
        let (mut acc, mut n) = (Aabb::EMPTY, 0);
        let mut right_count = [0usize; SAH_BINS];
        for b in (1..SAH_BINS).rev() {
            acc = acc.union(boxes[b]);
            n += counts[b];
            right_area[b] = half_area(&acc);
            right_count[b] = n;
        }
        let (mut acc, mut n) = (Aabb::EMPTY, 0);
        let mut best: Option<(f64, usize)> = None;
        for b in 1..SAH_BINS {
            acc = acc.union(boxes[b - 1]);
            n += counts[b - 1];
            if n == 0 || right_count[b] == 0 {
                continue;
            }
            let cost = half_area(&acc) * n as f64 + right_area[b] * right_count[b] as f64;
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, b));
            }
        }
        let (cost, split) = best?;
        // traversal step costs about one triangle test
        if cost / half_area(bounds) + 1.0 >= order.len() as f64 && order.len() <= 2 * LEAF_SIZE {
            return None;
        }
        order.sort_unstable_by_key(|&t| (bin_of(t) >= split, t));
        Some(order.iter().filter(|&&t| bin_of(t) < split).count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, UnitSphere};

    fn random_soup(n: usize, seed: u64) -> TriangleMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut verts = Vec::new();
        let mut tris = Vec::new();
        for i in 0..n {
            let c = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            for _ in 0..3 {
                let o = Vec3::new(
                    rng.random_range(-0.15..0.15),
                    rng.random_range(-0.15..0.15),
                    rng.random_range(-0.15..0.15),
                );
                verts.push(c + o);
            }
            let b = 3 * i as u32;
            tris.push([b, b + 1, b + 2]);
        }
        TriangleMesh::new(verts, tris).unwrap().0
    }

    #[test]
    fn single_triangle_is_single_leaf() {
        let m = TriangleMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]])
            .unwrap()
            .0;
        let bvh = Bvh::build(Arc::new(m));
        assert_eq!(bvh.nodes().len(), 1);
        assert_eq!(bvh.nodes()[0].leaf_range(), Some(0..1));
    }

    #[test]
    fn every_triangle_in_exactly_one_leaf_and_boxes_nest() {
        let mesh = Arc::new(random_soup(1000, 3));
        let bvh = Bvh::build(mesh.clone());
        let mut seen = vec![0u32; mesh.len()];
        for node in bvh.nodes() {
            if let Some(range) = node.leaf_range() {
                for &t in &bvh.order()[range] {
                    seen[t as usize] += 1;
                    assert!(node.bounds.contains_box(&mesh.triangle_bounds(t as usize), 1e-9));
                }
            }
            if let Some((l, r)) = node.children() {
                assert!(node.bounds.contains_box(&bvh.nodes()[l].bounds, 1e-9));
                assert!(node.bounds.contains_box(&bvh.nodes()[r].bounds, 1e-9));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn matches_brute_force_on_random_soup() {
        let mesh = Arc::new(random_soup(1000, 5));
        let bvh = Bvh::build(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut hits = 0;
        for _ in 0..10_000 {
            let o = Vec3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let d = Vec3::from_array(UnitSphere.sample(&mut rng));
            let a = bvh.ray_query(o, d, 10.0);
            let b = brute_force_ray_query(&mesh, o, d, 10.0);
            assert_eq!(a, b);
            assert_eq!(a.is_some(), bvh.occluded(o, d, 0.0, 10.0));
            hits += a.is_some() as usize;
        }
        assert!(hits > 1000);
    }

    #[test]
    fn cube_center_ray_chooses_nearest_of_two() {
        let cube = Arc::new(shapes::cube(Vec3::ZERO, 1.0));
        let bvh = Bvh::build(cube.clone());
        let o = Vec3::new(0.0, 0.0, -3.0);
        let candidates: Vec<f64> = (0..cube.len())
            .filter_map(|t| intersect_triangle(o, Vec3::Z, cube.triangle(t)))
            .collect();
        // the axis ray crosses a diagonal edge on each face, so both triangles of a face report it
        let mut distinct = candidates.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(distinct.len(), 2);
        let hit = bvh.ray_query(o, Vec3::Z, 100.0).unwrap();
        assert!((hit.t - 2.0).abs() < 1e-12);
        assert_eq!(hit.facing, Facing::Front);
    }

    #[test]
    fn sphere_hit_from_outside() {
        let sphere = Arc::new(shapes::uv_sphere(Vec3::ZERO, 1.0, 48, 64));
        let bvh = Bvh::build(sphere);
        let hit = bvh.ray_query(Vec3::new(0.0, 0.0, -3.0), Vec3::Z, 100.0).unwrap();
        // tessellation sagitta for 48 stacks is below 3e-3
        assert!((hit.t - 2.0).abs() < 3e-3, "t = {}", hit.t);
        assert_eq!(hit.facing, Facing::Front);
    }

    #[test]
    fn ray_from_inside_cube_is_back_facing() {
        let bvh = Bvh::build(Arc::new(shapes::cube(Vec3::ZERO, 1.0)));
        let hit = bvh.ray_query(Vec3::new(0.1, 0.2, 0.0), Vec3::new(0.3, 0.4, 0.866).normalize(), 100.0);
        assert_eq!(hit.unwrap().facing, Facing::Back);
    }

    #[test]
    fn parallel_ray_outside_plane_misses() {
        let plane = Arc::new(shapes::plane(Vec3::ZERO, 2.0, 1));
        let bvh = Bvh::build(plane);
        assert!(bvh.ray_query(Vec3::new(-5.0, 0.5, 0.0), Vec3::X, 100.0).is_none());
    }

    #[test]
    fn facing_flips_when_ray_reversed_through_hit() {
        let mesh = Arc::new(random_soup(200, 8));
        let bvh = Bvh::build(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        while checked < 200 {
            let o = Vec3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let d = Vec3::from_array(UnitSphere.sample(&mut rng));
            let Some(hit) = bvh.ray_query(o, d, 10.0) else { continue };
            let p = o + d * hit.t;
            let reflected = p + (p - o);
            let back = bvh
                .ray_query_range(reflected, -d, hit.t - 1e-9, hit.t + 1e-9)
                .expect("reflected ray passes through the same hit point");
            if back.triangle != hit.triangle {
                continue;
            }
            assert_eq!(back.facing, hit.facing.flip());
            checked += 1;
        }
    }

    #[test]
    fn nearest_distance_matches_exhaustive() {
        let mesh = Arc::new(random_soup(500, 21));
        let bvh = Bvh::build(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let a = bvh.nearest_distance(p);
            let b = crate::geometry::exact_distance(&mesh, p);
            assert_eq!(a, b);
        }
    }
}
