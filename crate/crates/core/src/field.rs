//! Uniform 3D grids and the scalar distance-field container.
//!
//! Values live at cell centres. Sampling is trilinear between centres and
//! clamps to the border outside the inset domain, so queries beyond the scene
//! box read the nearest border value rather than a phantom surface.
//!
//! Field files are little-endian:
//!
//! ```text
//! magic "RSDF" | version u32 | dims 3 x u32 | bounds 6 x f32 (min xyz, max xyz)
//! | beta f32 | bias f32 | frame u64 | dims-product x f32, x fastest
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::{Aabb, Vec3};

pub const FIELD_MAGIC: [u8; 4] = *b"RSDF";
pub const FIELD_VERSION: u32 = 1;
pub const FIELD_HEADER_LEN: usize = 4 + 4 + 12 + 24 + 4 + 4 + 8;

/// Cell counts plus the world box they tile.
///
/// Bounds are rounded to `f32` on construction so grids survive a trip
/// through the field file unchanged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    dims: [usize; 3],
    bounds: Aabb,
}

fn round_f32(v: Vec3) -> Vec3 {
    Vec3::new(v.x as f32 as f64, v.y as f32 as f64, v.z as f32 as f64)
}

impl GridSpec {
    pub fn new(dims: [usize; 3], bounds: Aabb) -> Result<GridSpec> {
        if dims.iter().any(|&d| d == 0 || d > u16::MAX as usize) {
            return Err(Error::InvalidGrid(format!("dims {dims:?} must be in 1..=65535")));
        }
        let bounds = Aabb::new(round_f32(bounds.min), round_f32(bounds.max));
        let e = bounds.extent();
        if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) || !e.is_finite() {
            return Err(Error::InvalidGrid(format!("bounds {bounds:?} have no volume")));
        }
        Ok(GridSpec { dims, bounds })
    }

    pub fn cubic(n: usize, bounds: Aabb) -> Result<GridSpec> {
        GridSpec::new([n, n, n], bounds)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn cell_size(&self) -> Vec3 {
        let e = self.bounds.extent();
        Vec3::new(
            e.x / self.dims[0] as f64,
            e.y / self.dims[1] as f64,
            e.z / self.dims[2] as f64,
        )
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_size().length()
    }

    /// Largest per-axis cell size.
    pub fn max_cell_size(&self) -> f64 {
        self.cell_size().max_elem()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let rest = index / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.cell_size();
        self.bounds.min + Vec3::new((i as f64 + 0.5) * h.x, (j as f64 + 0.5) * h.y, (k as f64 + 0.5) * h.z)
    }

    pub fn cell_center_of(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.cell_center(i, j, k)
    }

    pub fn cell_box(&self, i: usize, j: usize, k: usize) -> Aabb {
        let h = self.cell_size();
        let min = self.bounds.min + Vec3::new(i as f64 * h.x, j as f64 * h.y, k as f64 * h.z);
        Aabb::new(min, min + h)
    }

    /// Cell containing `p`, if inside the bounds. Points on the max face map to the last cell.
    pub fn cell_of(&self, p: Vec3) -> Option<[usize; 3]> {
        if !self.bounds.contains_point(p) {
            return None;
        }
        let u = (p - self.bounds.min).div_elem(self.cell_size());
        Some([0, 1, 2].map(|a| (u[a].floor().max(0.0) as usize).min(self.dims[a] - 1)))
    }

    /// Same bounds, each axis multiplied by `factor`.
    pub fn refine(&self, factor: usize) -> Result<GridSpec> {
        GridSpec::new(self.dims.map(|d| d * factor), self.bounds)
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.dims == other.dims && self.bounds == other.bounds
    }
}

/// Result of a trilinear query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub in_bounds: bool,
}

/// Scalar signed-distance grid with generation metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    grid: GridSpec,
    values: Vec<f32>,
    /// Surface thickening subtracted after jump flooding.
    pub beta: f32,
    /// Cumulative bias subtracted by [`DistanceField::apply_bias`].
    pub bias: f32,
    pub frame: u64,
}

impl DistanceField {
    pub fn new(grid: GridSpec, values: Vec<f32>) -> Result<DistanceField> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(DistanceField {
            grid,
            values,
            beta: 0.0,
            bias: 0.0,
            frame: 0,
        })
    }

    pub fn constant(grid: GridSpec, value: f32) -> DistanceField {
        DistanceField {
            grid,
            values: vec![value; grid.len()],
            beta: 0.0,
            bias: 0.0,
            frame: 0,
        }
    }

    /// Evaluates `f` at every cell centre.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vec3) -> f64 + Sync) -> DistanceField {
        use rayon::prelude::*;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.cell_center_of(idx)) as f32)
            .collect();
        DistanceField {
            grid,
            values,
            beta: 0.0,
            bias: 0.0,
            frame: 0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.grid.index(i, j, k)]
    }

    pub fn with_frame(mut self, frame: u64) -> Self {
        self.frame = frame;
        self
    }

    /// Trilinear interpolation between the eight surrounding cell centres.
    #[inline]
    pub fn sample_trilinear(&self, p: Vec3) -> FieldSample {
        let g = &self.grid;
        let h = g.cell_size();
        let in_bounds = g.bounds.contains_point(p);
        let u = (p - g.bounds.min).div_elem(h) - Vec3::splat(0.5);
        let mut base = [0usize; 3];
        let mut next = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = g.dims[a];
            let c = u[a].clamp(0.0, (n - 1) as f64);
            let f = c.floor();
            let i0 = (f as usize).min(n - 1);
            base[a] = i0;
            next[a] = (i0 + 1).min(n - 1);
            frac[a] = c - f;
        }
        let v = |i: usize, j: usize, k: usize| self.values[g.index(i, j, k)] as f64;
        let [i0, j0, k0] = base;
        let [i1, j1, k1] = next;
        let [fx, fy, fz] = frac;
        let c00 = v(i0, j0, k0) + (v(i1, j0, k0) - v(i0, j0, k0)) * fx;
        let c10 = v(i0, j1, k0) + (v(i1, j1, k0) - v(i0, j1, k0)) * fx;
        let c01 = v(i0, j0, k1) + (v(i1, j0, k1) - v(i0, j0, k1)) * fx;
        let c11 = v(i0, j1, k1) + (v(i1, j1, k1) - v(i0, j1, k1)) * fx;
        let c0 = c00 + (c10 - c00) * fy;
        let c1 = c01 + (c11 - c01) * fy;
        FieldSample {
            value: c0 + (c1 - c0) * fz,
            in_bounds,
        }
    }

    #[inline]
    pub fn sample(&self, p: Vec3) -> f64 {
        self.sample_trilinear(p).value
    }

    /// Lowers every value by `bias`; metadata accumulates the total.
    pub fn apply_bias(&self, bias: f32) -> DistanceField {
        let mut out = self.clone();
        out.apply_bias_in_place(bias);
        out
    }

    pub fn apply_bias_in_place(&mut self, bias: f32) {
        assert!(bias >= 0.0, "bias must be non-negative");
        if bias == 0.0 {
            return;
        }
        for v in &mut self.values {
            *v -= bias;
        }
        self.bias += bias;
    }

    /// Resamples onto `grid` by trilinear interpolation at its cell centres.
    ///
    /// Runs as three separable passes; the result is bit-identical to calling
    /// [`DistanceField::sample`] at every centre.
    pub fn resample(&self, grid: GridSpec) -> DistanceField {
        use rayon::prelude::*;
        let [sx, sy, sz] = self.grid.dims;
        let [nx, ny, nz] = grid.dims;
        let [tx, ty, tz] = [0, 1, 2].map(|a| self.taps(&grid, a));
        let src = &self.values;
        let ax: Vec<f64> = (0..nx * sy * sz)
            .into_par_iter()
            .map(|idx| {
                let (i, r) = (idx % nx, idx / nx);
                let (i0, i1, f) = tx[i];
                let v0 = src[i0 + sx * r] as f64;
                v0 + (src[i1 + sx * r] as f64 - v0) * f
            })
            .collect();
        let axy: Vec<f64> = (0..nx * ny * sz)
            .into_par_iter()
            .map(|idx| {
                let (i, r) = (idx % nx, idx / nx);
                let (j, k) = (r % ny, r / ny);
                let (j0, j1, f) = ty[j];
                let v0 = ax[i + nx * (j0 + sy * k)];
                v0 + (ax[i + nx * (j1 + sy * k)] - v0) * f
            })
            .collect();
        drop(ax);
        let values = (0..nx * ny * nz)
            .into_par_iter()
            .map(|idx| {
                let (ij, k) = (idx % (nx * ny), idx / (nx * ny));
                let (k0, k1, f) = tz[k];
                let v0 = axy[ij + nx * ny * k0];
                (v0 + (axy[ij + nx * ny * k1] - v0) * f) as f32
            })
            .collect();
        DistanceField {
            grid,
            values,
            beta: self.beta,
            bias: self.bias,
            frame: self.frame,
        }
    }

    /// Interpolation taps along axis `a` for the cell centres of `target`,
    /// computed exactly as [`DistanceField::sample_trilinear`] does.
    fn taps(&self, target: &GridSpec, a: usize) -> Vec<(usize, usize, f64)> {
        let (src, n) = (&self.grid, self.grid.dims[a]);
        let (h, ht) = (src.cell_size()[a], target.cell_size()[a]);
        let (min, tmin) = (src.bounds.min[a], target.bounds.min[a]);
        (0..target.dims[a])
            .map(|t| {
                let p = tmin + (t as f64 + 0.5) * ht;
                let u = (p - min) / h - 0.5;
                let c = u.clamp(0.0, (n - 1) as f64);
                let f = c.floor();
                let i0 = (f as usize).min(n - 1);
                (i0, (i0 + 1).min(n - 1), c - f)
            })
            .collect()
    }

    pub fn slice(&self, axis: Axis, index: usize) -> Result<Slice> {
        let d = self.grid.dims;
        let a = axis as usize;
        if index >= d[a] {
            return Err(Error::IndexOutOfRange { index, len: d[a] });
        }
        let (u, v) = axis.plane_axes();
        let (w, h) = (d[u], d[v]);
        let mut values = Vec::with_capacity(w * h);
        for row in 0..h {
            for col in 0..w {
                let mut c = [0usize; 3];
                c[a] = index;
                c[u] = col;
                c[v] = row;
                values.push(self.get(c[0], c[1], c[2]));
            }
        }
        Ok(Slice {
            width: w,
            height: h,
            values,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIELD_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(&FIELD_MAGIC);
        out.extend_from_slice(&FIELD_VERSION.to_le_bytes());
        for d in self.grid.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let b = self.grid.bounds;
        for v in [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&self.beta.to_le_bytes());
        out.extend_from_slice(&self.bias.to_le_bytes());
        out.extend_from_slice(&self.frame.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<DistanceField> {
        if bytes.len() < FIELD_HEADER_LEN {
            return Err(Error::Truncated {
                expected: FIELD_HEADER_LEN,
                found: bytes.len(),
            });
        }
        if bytes[0..4] != FIELD_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[0..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != FIELD_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: FIELD_VERSION,
            });
        }
        let dims = [u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize];
        let bf: Vec<f64> = (0..6).map(|i| f32_at(20 + 4 * i) as f64).collect();
        let bounds = Aabb::new(Vec3::new(bf[0], bf[1], bf[2]), Vec3::new(bf[3], bf[4], bf[5]));
        let grid = GridSpec::new(dims, bounds)?;
        let beta = f32_at(44);
        let bias = f32_at(48);
        let frame = u64::from_le_bytes(bytes[52..60].try_into().unwrap());
        let expected = FIELD_HEADER_LEN + 4 * grid.len();
        if bytes.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let values = bytes[FIELD_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(DistanceField {
            grid,
            values,
            beta,
            bias,
            frame,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<DistanceField> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        DistanceField::from_bytes(&bytes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    /// The two in-plane axes, in increasing order.
    pub fn plane_axes(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Axis> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(Error::Config(format!("unknown axis {s:?}"))),
        }
    }
}

/// One plane of a field, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl Slice {
    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.width + col]
    }

    /// Diverging palette: negative values in a flat red, positive values as a
    /// grey ramp reaching white at `scale`, with dark iso-lines every `scale / 8`.
    pub fn to_image(&self, scale: f32) -> Image {
        let scale = if scale > 0.0 { scale } else { 1.0 };
        // top row of the image is the highest row index
        Image::from_fn(self.width, self.height, |x, y| {
            let v = self.get(x, self.height - 1 - y);
            if v < 0.0 {
                [0.8, 0.1, 0.1]
            } else {
                let g = (v / scale).min(1.0);
                let band = ((v / scale * 8.0).fract() < 0.06) as u8 as f32;
                let g = g * (1.0 - 0.5 * band);
                [g, g, g]
            }
        })
    }

    /// Grayscale by linear remap of `[lo, hi]` to `[0, 1]`.
    pub fn to_grayscale(&self, lo: f32, hi: f32) -> Image {
        Image::from_fn(self.width, self.height, |x, y| {
            let v = ((self.get(x, self.height - 1 - y) - lo) / (hi - lo)).clamp(0.0, 1.0);
            [v, v, v]
        })
    }
}
