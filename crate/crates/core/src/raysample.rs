//! Fine-field refinement by ray sampling.
//!
//! Texels whose coarse distance is at most `d` shoot `x` uniformly random
//! rays per frame. The closest hit of the frame feeds the temporal decay
//!
//! ```text
//! f_t = min(alpha * f_{t-1} + (1 - alpha) * c_t, r_t)   if c_t <= d
//! f_t = c_t                                             otherwise
//! ```
//!
//! which runs on distance magnitudes. The sign comes separately from a vote
//! over the facing of every hit: more back-face hits than front-face hits
//! makes the texel negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{DistanceField, GridSpec};
use crate::geometry::{Bvh, Facing};
use crate::math::Vec3;

pub const DEFAULT_ALPHA: f64 = 0.95;
pub const DEFAULT_MASK_DISTANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingParams {
    /// Rays per masked texel per frame (`x`).
    pub rays_per_frame: u32,
    /// Mask distance `d`; may be infinite. Zero disables ray sampling.
    pub mask_distance: f64,
    /// Decay factor for the previous frame.
    pub alpha: f64,
    pub seed: u64,
    /// Ray length cap, normally the scene diagonal.
    pub t_max: f64,
}

impl SamplingParams {
    pub fn new(rays_per_frame: u32, mask_distance: f64, alpha: f64, seed: u64, t_max: f64) -> Result<Self> {
        let p = SamplingParams {
            rays_per_frame,
            mask_distance,
            alpha,
            seed,
            t_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mask_distance >= 0.0) {
            return Err(Error::Config(format!("mask distance must be >= 0, got {}", self.mask_distance)));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("decay alpha must be in [0, 1), got {}", self.alpha)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Config(format!("ray length cap must be positive, got {}", self.t_max)));
        }
        Ok(())
    }

    #[inline]
    pub fn masks(&self, coarse_value: f64) -> bool {
        self.mask_distance > 0.0 && coarse_value <= self.mask_distance
    }
}

/// Outcome of one frame of rays from a texel centre.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TexelSample<T = f64> {
    /// Closest hit of the frame, `None` if every ray missed.
    pub min_distance: Option<T>,
    pub front: u32,
    pub back: u32,
}

/// Per-texel generator keyed by (seed, texel, frame).
pub fn texel_rng(seed: u64, texel: usize, frame: u64) -> ChaCha8Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [texel as u64, frame] {
        h = splitmix(h ^ splitmix(v));
    }
    ChaCha8Rng::seed_from_u64(h)
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Shoots `x` uniformly distributed rays from `center`.
pub fn sample_texel<R: Rng + ?Sized>(bvh: &Bvh, center: Vec3, x: u32, t_max: f64, rng: &mut R) -> TexelSample {
    let mut out = TexelSample {
        min_distance: None,
        front: 0,
        back: 0,
    };
    for _ in 0..x {
        let [dx, dy, dz]: [f64; 3] = UnitSphere.sample(rng);
        if let Some(hit) = bvh.ray_query(center, Vec3::new(dx, dy, dz), t_max) {
            match hit.facing {
                Facing::Front => out.front += 1,
                Facing::Back => out.back += 1,
            }
            out.min_distance = Some(out.min_distance.map_or(hit.t, |m: f64| m.min(hit.t)));
        }
    }
    out
}

/// Negative when back-face hits are the strict majority.
#[inline]
pub fn resolve_sign(min_distance: Option<f64>, front: u32, back: u32) -> Option<f64> {
    min_distance.map(|m| if back > front { -m } else { m })
}

/// The decay update for one texel; a missing ray result acts as `+inf`.
#[inline]
pub fn accumulate(f_prev: f64, c_t: f64, r_t: Option<f64>, alpha: f64, d: f64) -> f64 {
    if c_t <= d {
        let blend = alpha * f_prev + (1.0 - alpha) * c_t;
        match r_t {
            Some(r) => blend.min(r),
            None => blend,
        }
    } else {
        c_t
    }
}

fn check_nesting(coarse: &GridSpec, fine: &GridSpec) -> Result<()> {
    let (c, f) = (coarse.dims(), fine.dims());
    if (0..3).any(|a| f[a] % c[a] != 0) {
        return Err(Error::DimensionMismatch(format!(
            "fine dims {f:?} are not a multiple of coarse dims {c:?}"
        )));
    }
    if coarse.bounds() != fine.bounds() {
        return Err(Error::DimensionMismatch("coarse and fine grids must share bounds".into()));
    }
    Ok(())
}

/// Fine texels whose interpolated coarse value is within `d`.
pub fn ray_mask(coarse: &DistanceField, fine: &GridSpec, d: f64) -> Result<Vec<bool>> {
    check_nesting(coarse.grid(), fine)?;
    Ok(coarse
        .resample(*fine)
        .values()
        .par_iter()
        .map(|&c| d > 0.0 && c as f64 <= d)
        .collect())
}

/// Persistent per-texel sampling state, 12 bytes.
///
/// Tallies saturate at `u16::MAX`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Texel {
    min_distance: f32,
    pub front: u16,
    pub back: u16,
    flags: u8,
}

const MASKED: u8 = 1;
const HAS_HIT: u8 = 2;

impl Texel {
    fn entering() -> Texel {
        Texel {
            flags: MASKED,
            ..Texel::default()
        }
    }

    #[inline]
    pub fn masked(&self) -> bool {
        self.flags & MASKED != 0
    }

    /// Smallest hit since the tallies were last reset.
    #[inline]
    pub fn min_distance(&self) -> Option<f32> {
        (self.flags & HAS_HIT != 0).then_some(self.min_distance)
    }

    fn record(&mut self, s: &TexelSample) {
        self.front = self.front.saturating_add(s.front.min(u16::MAX as u32) as u16);
        self.back = self.back.saturating_add(s.back.min(u16::MAX as u32) as u16);
        if let Some(r) = s.min_distance {
            let r = r as f32;
            self.min_distance = match self.min_distance() {
                Some(m) => m.min(r),
                None => r,
            };
            self.flags |= HAS_HIT;
        }
    }
}

/// Fine field plus the ray-sampling record behind each texel.
#[derive(Clone, Debug, PartialEq)]
pub struct AccumulatorField {
    grid: GridSpec,
    values: Vec<f32>,
    texels: Vec<Texel>,
    frame: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub masked_texels: u64,
    pub rays_traced: u64,
}

impl AccumulatorField {
    /// Starts from the coarse field resampled at fine texel centres, nothing masked.
    pub fn from_coarse(coarse: &DistanceField, fine: GridSpec) -> Result<Self> {
        check_nesting(coarse.grid(), &fine)?;
        let values = coarse.resample(fine).values().to_vec();
        Ok(AccumulatorField {
            grid: fine,
            texels: vec![Texel::default(); fine.len()],
            values,
            frame: 0,
        })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Signed fine values, unbiased.
    #[inline]
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn texels(&self) -> &[Texel] {
        &self.texels
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn masked_count(&self) -> usize {
        self.texels.iter().filter(|t| t.masked()).count()
    }

    /// Snapshot as a field carrying the coarse beta and this frame index.
    pub fn to_field(&self, beta: f32) -> DistanceField {
        let mut f = DistanceField::new(self.grid, self.values.clone()).expect("shape is fixed");
        f.beta = beta;
        f.frame = self.frame;
        f
    }
}

/// One frame of ray sampling and decay. Pure: `prev` is left untouched.
pub fn update_fine(
    prev: &AccumulatorField,
    coarse: &DistanceField,
    bvh: &Bvh,
    params: &SamplingParams,
    frame: u64,
) -> Result<(AccumulatorField, FrameStats)> {
    let mut next = prev.clone();
    let stats = update_fine_in_place(&mut next, coarse, bvh, params, frame)?;
    Ok((next, stats))
}

/// [`update_fine`] overwriting the accumulator. Each texel reads only its
/// own previous state, so the result is the same.
pub fn update_fine_in_place(
    acc: &mut AccumulatorField,
    coarse: &DistanceField,
    bvh: &Bvh,
    params: &SamplingParams,
    frame: u64,
) -> Result<FrameStats> {
    params.validate()?;
    let grid = acc.grid;
    check_nesting(coarse.grid(), &grid)?;
    let x = params.rays_per_frame;
    let coarse_at = coarse.resample(grid);

    let masked: u64 = acc
        .values
        .par_iter_mut()
        .zip(acc.texels.par_iter_mut())
        .zip(coarse_at.values().par_iter())
        .enumerate()
        .map(|(i, ((value, texel), &c32))| {
            let c = c32 as f64;
            if !params.masks(c) {
                *value = c32;
                *texel = Texel::default();
                return 0;
            }
            let center = grid.cell_center_of(i);
            // tallies restart whenever the texel re-enters the mask
            if !texel.masked() {
                *texel = Texel::entering();
            }
            let mut rng = texel_rng(params.seed, i, frame);
            let s = sample_texel(bvh, center, x, params.t_max, &mut rng);
            texel.record(&s);
            let f_prev = value.abs() as f64;
            let mag = accumulate(f_prev, c.max(0.0), s.min_distance, params.alpha, params.mask_distance);
            let signed = resolve_sign(Some(mag), texel.front as u32, texel.back as u32).expect("magnitude present");
            *value = signed as f32;
            1
        })
        .sum();
    acc.frame = frame;
    Ok(FrameStats {
        masked_texels: masked,
        rays_traced: masked * x as u64,
    })
}
