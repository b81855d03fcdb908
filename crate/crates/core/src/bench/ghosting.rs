//! Stale distances behind a moving object.
//!
//! The orbit scene holds still for `dwell` frames so the fine field settles
//! around the teapot, then starts moving. Texels the teapot vacates while its
//! nearest replacement surface is static see a constant coarse value `c`;
//! for them the gap `c - |f|` must shrink at least as fast as `alpha^k`.
//! Texels whose coarse value jumps above `d` must equal the coarse field
//! straight away.

use crate::error::Result;
use crate::pipeline::{Pipeline, PipelineConfig, Size};
use crate::render::scenes;

/// Relative slack on the `alpha^k` envelope.
pub const ENVELOPE_SLACK: f64 = 0.1;
/// Absolute slack for f32 storage of the fine values.
const STORAGE_SLACK: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhostingConfig {
    pub alpha: f64,
    pub mask_distance: f64,
    pub rays_per_frame: u32,
    pub coarse_dims: [usize; 3],
    pub fine_dims: [usize; 3],
    /// Static frames before the orbit starts.
    pub dwell: u64,
    /// Moving frames tracked.
    pub window: u64,
    pub seed: u64,
    /// Smallest initial gap tracked, in fine cells.
    pub min_gap_cells: f64,
}

impl Default for GhostingConfig {
    fn default() -> Self {
        GhostingConfig {
            alpha: crate::raysample::DEFAULT_ALPHA,
            mask_distance: crate::raysample::DEFAULT_MASK_DISTANCE,
            rays_per_frame: 5,
            coarse_dims: [Size::S.coarse(); 3],
            fine_dims: [Size::S.fine(); 3],
            dwell: 16,
            window: 40,
            seed: 0,
            min_gap_cells: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhostingFrame {
    /// Frames since the last static frame.
    pub k: u64,
    /// Mean `c - |f|` over tracked texels.
    pub mean_gap: f64,
    /// Largest `gap_k / (alpha^k gap_0)`; 0 when every gap has closed.
    pub max_ratio: f64,
    /// Mean `| |f| - exact |` over tracked texels.
    pub mean_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GhostingCurve {
    pub alpha: f64,
    /// Vacated texels with constant, masked, non-overestimating coarse values.
    pub tracked: usize,
    pub frames: Vec<GhostingFrame>,
    /// Every tracked gap stayed within `(1 + slack) alpha^k gap_0`.
    pub bound_holds: bool,
    /// Vacated texels whose coarse value jumped above `d`.
    pub vacated_unmasked: usize,
    /// Of those, how many equalled the coarse value on the first moving frame.
    pub vacated_unmasked_exact: usize,
    /// Unmasked texels differing from the coarse value, over all moving frames.
    pub unmasked_mismatches: u64,
    /// First `k` at which the mean gap is at most half its start.
    pub half_life: Option<u64>,
}

struct Candidate {
    index: usize,
    c: f32,
    constant: bool,
    gaps: Vec<f64>,
    errors: Vec<f64>,
    overestimates: bool,
}

pub fn ghosting_experiment(cfg: &GhostingConfig) -> Result<GhostingCurve> {
    let mut pc = PipelineConfig::sized(Size::S);
    pc.coarse_dims = cfg.coarse_dims;
    pc.fine_dims = cfg.fine_dims;
    pc.alpha = cfg.alpha;
    pc.mask_distance = cfg.mask_distance;
    pc.rays_per_frame = cfg.rays_per_frame;
    pc.seed = cfg.seed;
    let mut p = Pipeline::new(scenes::orbit(cfg.dwell), pc)?;
    let d = cfg.mask_distance;
    let min_gap = cfg.min_gap_cells * p.fine_grid().max_cell_size();

    for _ in 0..=cfg.dwell {
        p.step()?;
    }
    let fine = *p.fine_grid();
    let c0 = p.coarse_field().resample(fine).values().to_vec();
    let f0: Vec<f32> = p.accumulator().values().to_vec();
    let masked0: Vec<bool> = p.accumulator().texels().iter().map(|t| t.masked()).collect();

    let mut cands: Vec<Candidate> = Vec::new();
    let (mut vacated_unmasked, mut vacated_unmasked_exact, mut mismatches) = (0, 0, 0u64);
    for k in 1..=cfg.window {
        p.step()?;
        let ck = p.coarse_field().resample(fine);
        let ck = ck.values();
        let acc = p.accumulator();
        mismatches += acc
            .texels()
            .iter()
            .zip(acc.values())
            .zip(ck)
            .filter(|((t, f), c)| !t.masked() && f.to_bits() != c.to_bits())
            .count() as u64;
        if k == 1 {
            for i in 0..fine.len() {
                if !masked0[i] || !(ck[i] > c0[i]) {
                    continue;
                }
                if ck[i] as f64 > d {
                    vacated_unmasked += 1;
                    vacated_unmasked_exact += (acc.values()[i].to_bits() == ck[i].to_bits()) as usize;
                    continue;
                }
                let gap0 = ck[i] as f64 - f0[i].abs() as f64;
                if ck[i] > 0.0 && gap0 > min_gap {
                    cands.push(Candidate {
                        index: i,
                        c: ck[i],
                        constant: true,
                        gaps: vec![gap0],
                        errors: Vec::new(),
                        overestimates: false,
                    });
                }
            }
        }
        let bvh = p.bvh();
        for cand in &mut cands {
            let i = cand.index;
            cand.constant &= ck[i].to_bits() == cand.c.to_bits();
            let f = acc.values()[i].abs() as f64;
            cand.gaps.push(cand.c as f64 - f);
            let exact = bvh.nearest_distance(fine.cell_center_of(i));
            if k == 1 {
                let e0 = f0[i].abs() as f64;
                cand.errors.push((e0 - exact).abs());
            }
            cand.errors.push((f - exact).abs());
            cand.overestimates |= cand.c as f64 > exact;
        }
    }

    let tracked: Vec<&Candidate> = cands.iter().filter(|c| c.constant && !c.overestimates).collect();
    let mut frames = Vec::new();
    let mut bound_holds = true;
    for k in 0..=cfg.window as usize {
        let env = cfg.alpha.powi(k as i32);
        let (mut gap, mut err, mut ratio) = (0.0, 0.0, 0.0f64);
        for c in &tracked {
            let (g, g0) = (c.gaps[k], c.gaps[0]);
            gap += g;
            err += c.errors[k];
            if g > STORAGE_SLACK {
                ratio = ratio.max(g / (env * g0));
            }
            bound_holds &= g <= (1.0 + ENVELOPE_SLACK) * env * g0 + STORAGE_SLACK;
        }
        let n = tracked.len().max(1) as f64;
        frames.push(GhostingFrame {
            k: k as u64,
            mean_gap: gap / n,
            max_ratio: ratio,
            mean_error: err / n,
        });
    }
    let half_life = frames
        .iter()
        .find(|f| f.mean_gap <= 0.5 * frames[0].mean_gap)
        .map(|f| f.k)
        .filter(|_| !tracked.is_empty());
    Ok(GhostingCurve {
        alpha: cfg.alpha,
        tracked: tracked.len(),
        frames,
        bound_holds,
        vacated_unmasked,
        vacated_unmasked_exact,
        unmasked_mismatches: mismatches,
        half_life,
    })
}
