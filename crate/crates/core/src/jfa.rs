//! 3D jump flooding over voxel seeds.
//!
//! Each step reads one buffer and writes the other. A cell looks at the 27
//! cells offset by `{-o, 0, o}` per axis and keeps the closest seed, measured
//! between cell centres in world units. Equal distances keep the
//! lexicographically smaller seed, so the result is the same for any
//! scheduling of the parallel loop.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{DistanceField, GridSpec};
use crate::voxelize::VoxelGrid;

/// Marker for a cell with no seed yet.
pub const EMPTY: [u16; 3] = [u16::MAX; 3];

#[derive(Clone, Debug, PartialEq)]
pub struct SeedGrid {
    grid: GridSpec,
    seeds: Vec<[u16; 3]>,
}

impl SeedGrid {
    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn seeds(&self) -> &[[u16; 3]] {
        &self.seeds
    }

    #[inline]
    pub fn seed(&self, i: usize, j: usize, k: usize) -> Option<[u16; 3]> {
        let s = self.seeds[self.grid.index(i, j, k)];
        (s != EMPTY).then_some(s)
    }

    pub fn empty_count(&self) -> usize {
        self.seeds.iter().filter(|&&s| s == EMPTY).count()
    }

    /// Grid with the given cells self-seeded.
    pub fn from_seed_cells(grid: GridSpec, cells: &[[usize; 3]]) -> Result<SeedGrid> {
        if cells.is_empty() {
            return Err(Error::NoSeeds);
        }
        let mut seeds = vec![EMPTY; grid.len()];
        for &[i, j, k] in cells {
            seeds[grid.index(i, j, k)] = [i as u16, j as u16, k as u16];
        }
        Ok(SeedGrid { grid, seeds })
    }

    /// World-space squared distance from cell `idx` to its recorded seed.
    pub fn distance_squared(&self, idx: usize) -> Option<f64> {
        let s = self.seeds[idx];
        (s != EMPTY).then(|| {
            let h = self.grid.cell_size();
            let h2 = [h.x * h.x, h.y * h.y, h.z * h.z];
            let c = self.grid.coords(idx);
            dist2(c.map(|v| v as i64), s, h2)
        })
    }
}

#[inline]
fn dist2(cell: [i64; 3], seed: [u16; 3], h2: [f64; 3]) -> f64 {
    let dx = (cell[0] - seed[0] as i64) as f64;
    let dy = (cell[1] - seed[1] as i64) as f64;
    let dz = (cell[2] - seed[2] as i64) as f64;
    dx * dx * h2[0] + dy * dy * h2[1] + dz * dz * h2[2]
}

/// Self-seeds every occupied voxel.
pub fn jfa_init(voxels: &VoxelGrid) -> Result<SeedGrid> {
    let grid = *voxels.grid();
    let mut seeds = vec![EMPTY; grid.len()];
    let mut any = false;
    for idx in voxels.occupied() {
        let [i, j, k] = grid.coords(idx);
        seeds[idx] = [i as u16, j as u16, k as u16];
        any = true;
    }
    if !any {
        return Err(Error::NoSeeds);
    }
    Ok(SeedGrid { grid, seeds })
}

/// Offsets `n/2, n/4, ..., 1` with `n` the next power of two of the largest dim.
pub fn schedule(dims: [usize; 3]) -> Vec<usize> {
    let n = dims.iter().copied().max().unwrap_or(1).next_power_of_two();
    std::iter::successors(Some(n / 2), |&o| (o > 1).then_some(o / 2))
        .filter(|&o| o >= 1)
        .collect()
}

/// One flooding pass with the given offset.
pub fn jfa_step(seeds: &SeedGrid, offset: usize) -> SeedGrid {
    let mut out = SeedGrid {
        grid: seeds.grid,
        seeds: vec![EMPTY; seeds.seeds.len()],
    };
    jfa_step_into(seeds, &mut out, offset);
    out
}

/// [`jfa_step`] writing into an existing buffer of the same shape.
pub fn jfa_step_into(src: &SeedGrid, dst: &mut SeedGrid, offset: usize) {
    assert!(offset >= 1, "jump offset must be positive");
    assert!(src.grid.same_shape(&dst.grid));
    let g = src.grid;
    let [nx, ny, nz] = g.dims().map(|d| d as i64);
    let h = g.cell_size();
    let h2 = [h.x * h.x, h.y * h.y, h.z * h.z];
    let o = offset as i64;
    let s = &src.seeds;
    let plane = (nx * ny) as usize;

    dst.seeds.par_chunks_mut(plane).enumerate().for_each(|(k, slab)| {
        let k = k as i64;
        for j in 0..ny {
            for i in 0..nx {
                let cell = [i, j, k];
                let mut best = s[(i + nx * (j + ny * k)) as usize];
                let mut best_d = if best == EMPTY { f64::INFINITY } else { dist2(cell, best, h2) };
                for dk in [-o, 0, o] {
                    let z = k + dk;
                    if z < 0 || z >= nz {
                        continue;
                    }
                    for dj in [-o, 0, o] {
                        let y = j + dj;
                        if y < 0 || y >= ny {
                            continue;
                        }
                        let row = nx * (y + ny * z);
                        for di in [-o, 0, o] {
                            let x = i + di;
                            if x < 0 || x >= nx || (di | dj | dk) == 0 {
                                continue;
                            }
                            let cand = s[(x + row) as usize];
                            if cand == EMPTY {
                                continue;
                            }
                            let d = dist2(cell, cand, h2);
                            if d < best_d || (d == best_d && cand < best) {
                                best = cand;
                                best_d = d;
                            }
                        }
                    }
                }
                slab[(i + nx * j) as usize] = best;
            }
        }
    });
}

/// Full schedule starting from already-initialized seeds.
pub fn flood(seeds: SeedGrid) -> SeedGrid {
    let mut a = seeds;
    let mut b = a.clone();
    for offset in schedule(a.grid.dims()) {
        jfa_step_into(&a, &mut b, offset);
        std::mem::swap(&mut a, &mut b);
    }
    a
}

pub fn jfa_run(voxels: &VoxelGrid) -> Result<SeedGrid> {
    Ok(flood(jfa_init(voxels)?))
}

/// Half the cell diagonal: enough for occupied cells to read negative.
pub fn default_beta(grid: &GridSpec) -> f64 {
    0.5 * grid.cell_diagonal()
}

/// Distance to the recorded seed centre minus `beta`.
pub fn seeds_to_sdf(seeds: &SeedGrid, beta: f64) -> Result<DistanceField> {
    if !(beta >= 0.0) {
        return Err(Error::Config(format!("beta must be non-negative, got {beta}")));
    }
    let g = seeds.grid;
    let beta32 = beta as f32;
    let values: Vec<f32> = (0..g.len())
        .into_par_iter()
        .map(|idx| match seeds.distance_squared(idx) {
            Some(d2) => (d2.sqrt() as f32) - beta32,
            None => f32::INFINITY,
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant("jump flood left cells without a seed".into()));
    }
    let mut field = DistanceField::new(g, values)?;
    field.beta = beta32;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Aabb;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize) -> GridSpec {
        GridSpec::cubic(n, Aabb::cube(1.0)).unwrap()
    }

    fn exhaustive(g: &GridSpec, cells: &[[usize; 3]], idx: usize) -> f64 {
        let p = g.cell_center_of(idx);
        cells
            .iter()
            .map(|&[i, j, k]| (g.cell_center(i, j, k) - p).length_squared())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn schedules() {
        assert_eq!(schedule([128; 3]), vec![64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(schedule([400, 200, 400]), vec![256, 128, 64, 32, 16, 8, 4, 2, 1]);
        assert_eq!(schedule([5, 3, 2]), vec![4, 2, 1]);
        assert!(schedule([1, 1, 1]).is_empty());
    }

    #[test]
    fn init_errors_and_counts() {
        let g = grid(8);
        let mut v = VoxelGrid::empty(g);
        assert!(matches!(jfa_init(&v), Err(Error::NoSeeds)));
        v.set(2, 3, 4, true);
        let s = jfa_init(&v).unwrap();
        assert_eq!(s.seed(2, 3, 4), Some([2, 3, 4]));
        assert_eq!(s.empty_count(), g.len() - 1);
    }

    #[test]
    fn shell_seed_count_matches_occupancy() {
        let g = grid(16);
        let v = crate::voxelize::voxelize(&crate::geometry::shapes::cube(crate::math::Vec3::ZERO, 0.6), &g).unwrap();
        let s = jfa_init(&v).unwrap();
        assert_eq!(g.len() - s.empty_count(), v.count());
    }

    #[test]
    fn single_seed_reaches_everything_exactly() {
        let g = GridSpec::new([20, 9, 13], Aabb::cube(1.0)).unwrap();
        let s = flood(SeedGrid::from_seed_cells(g, &[[17, 2, 5]]).unwrap());
        assert!(s.seeds().iter().all(|&x| x == [17, 2, 5]));
    }

    #[test]
    fn one_step_covers_reach() {
        let g = grid(9);
        let s = SeedGrid::from_seed_cells(g, &[[4, 4, 4]]).unwrap();
        let s = jfa_step(&s, 4);
        assert_eq!(s.seed(0, 0, 0), Some([4, 4, 4]));
        assert_eq!(s.seed(8, 4, 0), Some([4, 4, 4]));
        assert_eq!(s.seed(1, 0, 0), None);
    }

    #[test]
    fn ties_prefer_smaller_seed() {
        let g = grid(9);
        let s = SeedGrid::from_seed_cells(g, &[[6, 4, 4], [2, 4, 4]]).unwrap();
        let s = jfa_step(&s, 2);
        assert_eq!(s.seed(4, 4, 4), Some([2, 4, 4]));
    }

    #[test]
    fn two_seeds_can_block_each_other() {
        // every offset path from (1,1,3) to (7,0,0) passes through (7,1,1), which is closer to the other seed
        let g = GridSpec::cubic(8, Aabb::new(crate::math::Vec3::ZERO, crate::math::Vec3::splat(8.0))).unwrap();
        let s = flood(SeedGrid::from_seed_cells(g, &[[1, 1, 3], [7, 7, 1]]).unwrap());
        assert_eq!(s.seed(7, 0, 0), Some([7, 7, 1]));
        assert_eq!(s.distance_squared(g.index(7, 0, 0)), Some(50.0));
    }

    #[test]
    fn sdf_values() {
        let g = grid(16);
        let h = g.cell_size().x;
        let s = flood(SeedGrid::from_seed_cells(g, &[[5, 5, 5]]).unwrap());
        let f = seeds_to_sdf(&s, 0.0).unwrap();
        assert!((f.get(8, 5, 5) as f64 - 3.0 * h).abs() < 1e-6);
        let beta = default_beta(&g);
        let f = seeds_to_sdf(&s, beta).unwrap();
        assert_eq!(f.get(5, 5, 5), -(beta as f32));
        assert!(f.values().iter().all(|&v| v >= -(beta as f32)));
        assert!(f.get(6, 5, 5) < h as f32);
        assert!(seeds_to_sdf(&s, -1.0).is_err());
    }

    #[test]
    fn random_sets_match_oracle() {
        let g = grid(32);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut exact = 0usize;
        let mut total = 0usize;
        for _ in 0..3 {
            let cells: Vec<[usize; 3]> =
                (0..50).map(|_| [0; 3].map(|_| rng.random_range(0..32usize))).collect();
            let s = flood(SeedGrid::from_seed_cells(g, &cells).unwrap());
            for idx in 0..g.len() {
                let got = s.distance_squared(idx).unwrap();
                let want = exhaustive(&g, &cells, idx);
                assert!(got >= want - 1e-12);
                exact += (got <= want + 1e-12) as usize;
                total += 1;
            }
        }
        assert!(exact as f64 >= 0.99 * total as f64, "{exact}/{total}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn two_seeds_nearly_exact(
            a in prop::array::uniform3(0usize..12), b in prop::array::uniform3(0usize..12),
            nx in 4usize..13, ny in 4usize..13, nz in 4usize..13,
        ) {
            let g = GridSpec::new([nx, ny, nz], Aabb::cube(1.0)).unwrap();
            let cells: Vec<[usize; 3]> = [a, b]
                .into_iter()
                .map(|c| [c[0] % nx, c[1] % ny, c[2] % nz])
                .collect();
            let s = flood(SeedGrid::from_seed_cells(g, &cells).unwrap());
            let mut exact = 0;
            for idx in 0..g.len() {
                let got = s.distance_squared(idx).unwrap();
                let want = exhaustive(&g, &cells, idx);
                prop_assert!(got >= want - 1e-12);
                exact += (got <= want + 1e-12) as usize;
            }
            prop_assert!(exact as f64 >= 0.95 * g.len() as f64);
        }

        #[test]
        fn steps_never_increase_distance(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = GridSpec::new([16, 11, 7], Aabb::cube(1.0)).unwrap();
            let cells: Vec<[usize; 3]> = (0..6)
                .map(|_| [rng.random_range(0..16), rng.random_range(0..11), rng.random_range(0..7)])
                .collect();
            let mut s = SeedGrid::from_seed_cells(g, &cells).unwrap();
            for o in schedule(g.dims()) {
                let next = jfa_step(&s, o);
                for idx in 0..g.len() {
                    let before = s.distance_squared(idx).unwrap_or(f64::INFINITY);
                    let after = next.distance_squared(idx).unwrap_or(f64::INFINITY);
                    prop_assert!(after <= before);
                    prop_assert!(after >= exhaustive(&g, &cells, idx) - 1e-12);
                }
                s = next;
            }
            prop_assert_eq!(s.empty_count(), 0);
        }

        #[test]
        fn result_is_independent_of_thread_count(seed in 0u64..100) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = grid(20);
            let cells: Vec<[usize; 3]> = (0..30).map(|_| [0; 3].map(|_| rng.random_range(0..20usize))).collect();
            let init = SeedGrid::from_seed_cells(g, &cells).unwrap();
            let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
            let a = one.install(|| flood(init.clone()));
            let b = three.install(|| flood(init.clone()));
            prop_assert_eq!(a, b);
        }
    }
}
