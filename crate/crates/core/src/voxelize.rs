//! Conservative surface voxelization.
//!
//! A cell is occupied when a triangle overlaps its box, decided by the exact
//! separating-axis test (box normals, triangle normal, nine edge cross
//! products). Surfaces stay hollow: interiors are never filled.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::geometry::TriangleMesh;
use crate::math::{Aabb, Vec3};

/// Magic-free occupancy dump header: dims (3 x u32) then bounds (6 x f32).
pub const VOXEL_DUMP_HEADER_LEN: usize = 12 + 24;

/// One bit per cell, x fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    grid: GridSpec,
    bits: Vec<u64>,
}

impl VoxelGrid {
    pub fn empty(grid: GridSpec) -> VoxelGrid {
        VoxelGrid {
            grid,
            bits: vec![0; grid.len().div_ceil(64)],
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.get_index(self.grid.index(i, j, k))
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let idx = self.grid.index(i, j, k);
        self.set_index(idx, value);
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, value: bool) {
        let mask = 1u64 << (idx % 64);
        if value {
            self.bits[idx / 64] |= mask;
        } else {
            self.bits[idx / 64] &= !mask;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of occupied cells in ascending order.
    pub fn occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
    }

    /// Raw bitfield with a 36-byte little-endian header (dims, bounds).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(VOXEL_DUMP_HEADER_LEN + self.bits.len() * 8);
        for d in self.grid.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let b = self.grid.bounds();
        for v in [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let nbytes = self.grid.len().div_ceil(8);
        let raw: Vec<u8> = self.bits.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.extend_from_slice(&raw[..nbytes]);
        out
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Exact triangle / axis-aligned box overlap (closed sets).
pub fn triangle_box_overlap(tri: [Vec3; 3], center: Vec3, half: Vec3) -> bool {
    let v = tri.map(|p| p - center);
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // box face normals
    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo > half[a] || hi < -half[a] {
            return false;
        }
    }

    // triangle plane
    let n = e[0].cross(e[1]);
    let r = half.x * n.x.abs() + half.y * n.y.abs() + half.z * n.z.abs();
    if n.dot(v[0]).abs() > r {
        return false;
    }

    // edge x box-axis cross products
    let axes = [Vec3::X, Vec3::Y, Vec3::Z];
    for edge in e {
        for unit in axes {
            let a = unit.cross(edge);
            let p = [a.dot(v[0]), a.dot(v[1]), a.dot(v[2])];
            let lo = p[0].min(p[1]).min(p[2]);
            let hi = p[0].max(p[1]).max(p[2]);
            let r = half.x * a.x.abs() + half.y * a.y.abs() + half.z * a.z.abs();
            if lo > r || hi < -r {
                return false;
            }
        }
    }
    true
}

/// Inclusive cell range covering `[lo, hi]` along one axis.
fn cell_range(lo: f64, hi: f64, min: f64, h: f64, n: usize) -> (usize, usize) {
    let a = ((lo - min) / h).floor().max(0.0) as usize;
    let b = ((hi - min) / h).floor().max(0.0) as usize;
    (a.min(n - 1), b.min(n - 1))
}

fn touched_cells(mesh: &TriangleMesh, grid: &GridSpec, tri: usize, shrink: f64) -> Vec<u32> {
    let corners = mesh.triangle(tri);
    let tb = mesh.triangle_bounds(tri);
    let h = grid.cell_size();
    let min = grid.bounds().min;
    let d = grid.dims();
    let half = h * 0.5 - h * shrink;
    let r: [(usize, usize); 3] =
        std::array::from_fn(|a| cell_range(tb.min[a] - h[a] * 1e-9, tb.max[a] + h[a] * 1e-9, min[a], h[a], d[a]));
    let mut out = Vec::new();
    for k in r[2].0..=r[2].1 {
        for j in r[1].0..=r[1].1 {
            for i in r[0].0..=r[0].1 {
                if triangle_box_overlap(corners, grid.cell_center(i, j, k), half) {
                    out.push(grid.index(i, j, k) as u32);
                }
            }
        }
    }
    out
}

/// Marks every cell whose box overlaps a triangle.
///
/// Contact that is confined to a shared cell face does not mark the cell on
/// the far side, so a square aligned with cell faces marks exactly the cells
/// it spans. A triangle lying entirely in a face plane falls back to closed
/// boxes and marks both sides.
pub fn voxelize(mesh: &TriangleMesh, grid: &GridSpec) -> Result<VoxelGrid> {
    if grid.dims().iter().any(|&n| n < 2) {
        return Err(Error::InvalidGrid(format!("voxel dims {:?} must be at least 2 per axis", grid.dims())));
    }
    let bounds = grid.bounds();
    let slack = 1e-9 * bounds.diagonal();
    let outside: Vec<usize> = (0..mesh.len())
        .filter(|&t| !bounds.contains_box(&mesh.triangle_bounds(t), slack))
        .collect();
    if !outside.is_empty() {
        return Err(Error::OutOfBounds {
            count: outside.len(),
            ids: outside,
        });
    }
    if grid.len() > u32::MAX as usize {
        return Err(Error::InvalidGrid("voxel grid exceeds 2^32 cells".into()));
    }

    let lists: Vec<Vec<u32>> = (0..mesh.len())
        .into_par_iter()
        .map(|t| {
            let cells = touched_cells(mesh, grid, t, 1e-7);
            if cells.is_empty() {
                touched_cells(mesh, grid, t, -1e-9)
            } else {
                cells
            }
        })
        .collect();

    let mut vox = VoxelGrid::empty(*grid);
    for idx in lists.into_iter().flatten() {
        vox.set_index(idx as usize, true);
    }
    log::debug!("voxelized {} triangles into {} cells", mesh.len(), vox.count());
    Ok(vox)
}

/// Bounds of the occupied-cell union, or `None` when empty.
pub fn occupied_bounds(vox: &VoxelGrid) -> Option<Aabb> {
    let g = vox.grid();
    vox.occupied()
        .map(|idx| {
            let [i, j, k] = g.coords(idx);
            g.cell_box(i, j, k)
        })
        .reduce(Aabb::union)
}
