//! Per-frame orchestration: voxelize (V), jump flood (JF), ray sample (RT).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DistanceField, GridSpec};
use crate::geometry::Bvh;
use crate::jfa::{default_beta, jfa_run, seeds_to_sdf};
use crate::raysample::{update_fine_in_place, AccumulatorField, FrameStats, SamplingParams};
use crate::raysample::{DEFAULT_ALPHA, DEFAULT_MASK_DISTANCE};
use crate::render::Scene;
use crate::voxelize::voxelize;

pub const DEFAULT_BIAS: f64 = 0.01;
pub const DEFAULT_RAYS_PER_FRAME: u32 = 5;

/// Named coarse/fine resolutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Size {
    S,
    M,
    L,
}

impl Size {
    pub const ALL: [Size; 3] = [Size::S, Size::M, Size::L];

    pub fn coarse(self) -> usize {
        match self {
            Size::S => 64,
            Size::M => 128,
            Size::L => 256,
        }
    }

    pub fn fine(self) -> usize {
        2 * self.coarse()
    }
}

impl FromStr for Size {
    type Err = Error;
    fn from_str(s: &str) -> Result<Size> {
        match s {
            "S" | "s" => Ok(Size::S),
            "M" | "m" => Ok(Size::M),
            "L" | "l" => Ok(Size::L),
            _ => Err(Error::Config(format!("unknown size {s:?}; expected S, M or L"))),
        }
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub coarse_dims: [usize; 3],
    pub fine_dims: [usize; 3],
    pub rays_per_frame: u32,
    pub mask_distance: f64,
    pub alpha: f64,
    /// Coarse sign shift; `None` uses half a coarse cell diagonal.
    pub beta: Option<f64>,
    /// Thickening subtracted from the fine snapshot.
    pub bias: f64,
    pub seed: u64,
    /// Redo V and JF every frame even when nothing moves (for timing).
    pub recompute_static: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::sized(Size::M)
    }
}

impl PipelineConfig {
    pub fn sized(size: Size) -> PipelineConfig {
        PipelineConfig {
            coarse_dims: [size.coarse(); 3],
            fine_dims: [size.fine(); 3],
            rays_per_frame: DEFAULT_RAYS_PER_FRAME,
            mask_distance: DEFAULT_MASK_DISTANCE,
            alpha: DEFAULT_ALPHA,
            beta: None,
            bias: DEFAULT_BIAS,
            seed: 0,
            recompute_static: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            let (c, f) = (self.coarse_dims[a], self.fine_dims[a]);
            if c < 2 || f < c || f % c != 0 {
                return Err(Error::Config(format!(
                    "fine dims {:?} must be a multiple of coarse dims {:?} (each >= 2)",
                    self.fine_dims, self.coarse_dims
                )));
            }
        }
        if !(self.bias >= 0.0) {
            return Err(Error::Config(format!("bias must be >= 0, got {}", self.bias)));
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0) {
                return Err(Error::Config(format!("beta must be >= 0, got {b}")));
            }
        }
        Ok(())
    }
}

/// Wall-clock cost and work counters of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameReport {
    pub frame: u64,
    pub voxelize: Duration,
    pub jump_flood: Duration,
    pub ray_sample: Duration,
    pub stats: FrameStats,
}

impl FrameReport {
    pub fn total(&self) -> Duration {
        self.voxelize + self.jump_flood + self.ray_sample
    }
}

pub struct Pipeline {
    scene: Scene,
    config: PipelineConfig,
    coarse_grid: GridSpec,
    fine_grid: GridSpec,
    sampling: SamplingParams,
    beta: f64,
    frame: u64,
    coarse: Option<DistanceField>,
    bvh: Option<Arc<Bvh>>,
    acc: Option<AccumulatorField>,
}

impl Pipeline {
    pub fn new(scene: Scene, config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        scene.validate()?;
        let coarse_grid = GridSpec::new(config.coarse_dims, scene.bounds)?;
        let fine_grid = GridSpec::new(config.fine_dims, scene.bounds)?;
        let sampling = SamplingParams::new(
            config.rays_per_frame,
            config.mask_distance,
            config.alpha,
            config.seed,
            scene.bounds.diagonal(),
        )?;
        let beta = config.beta.unwrap_or_else(|| default_beta(&coarse_grid));
        Ok(Pipeline {
            scene,
            config,
            coarse_grid,
            fine_grid,
            sampling,
            beta,
            frame: 0,
            coarse: None,
            bvh: None,
            acc: None,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn coarse_grid(&self) -> &GridSpec {
        &self.coarse_grid
    }

    pub fn fine_grid(&self) -> &GridSpec {
        &self.fine_grid
    }

    pub fn sampling(&self) -> &SamplingParams {
        &self.sampling
    }

    /// Index of the next frame to run.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    /// Runs V, JF and RT for the next frame.
    pub fn step(&mut self) -> Result<FrameReport> {
        self.step_timed(1)
    }

    /// [`Pipeline::step`] with each pass run `repeats` times and its median
    /// duration reported. Repeats do not change the result.
    pub fn step_timed(&mut self, repeats: usize) -> Result<FrameReport> {
        let repeats = repeats.max(1);
        let frame = self.frame;
        let rebuild = self.coarse.is_none() || self.config.recompute_static || !self.scene.is_static();
        let mut report = FrameReport {
            frame,
            ..FrameReport::default()
        };
        if rebuild {
            let mesh = self.scene.mesh_at(frame)?;
            let (vox, t) = timed(repeats, || voxelize(&mesh, &self.coarse_grid))?;
            report.voxelize = t;
            let (coarse, t) = timed(repeats, || seeds_to_sdf(&jfa_run(&vox)?, self.beta))?;
            report.jump_flood = t;
            if self.bvh.is_none() || !self.scene.is_static() {
                self.bvh = Some(Arc::new(Bvh::build(mesh)));
            }
            self.coarse = Some(coarse.with_frame(frame));
        }
        let coarse = self.coarse.as_ref().expect("built above");
        let bvh = self.bvh.as_ref().expect("built above");
        if self.acc.is_none() {
            self.acc = Some(AccumulatorField::from_coarse(coarse, self.fine_grid)?);
        }
        let acc = self.acc.as_mut().expect("initialized above");
        let mut times = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let last = r + 1 == repeats;
            let mut scratch = if last { None } else { Some(acc.clone()) };
            let target = scratch.as_mut().unwrap_or(&mut *acc);
            let t = Instant::now();
            report.stats = update_fine_in_place(target, coarse, bvh, &self.sampling, frame)?;
            times.push(t.elapsed());
        }
        report.ray_sample = median(times);
        log::debug!(
            "frame {frame}: V {:?} JF {:?} RT {:?}, {} masked texels",
            report.voxelize,
            report.jump_flood,
            report.ray_sample,
            report.stats.masked_texels
        );
        self.frame += 1;
        Ok(report)
    }

    pub fn run(&mut self, frames: u64) -> Result<Vec<FrameReport>> {
        (0..frames).map(|_| self.step()).collect()
    }

    fn ensure_started(&self) {
        assert!(self.acc.is_some(), "no frame has run yet; call step() first");
    }

    /// Coarse field of the latest frame, unbiased. Panics before the first step.
    pub fn coarse_field(&self) -> &DistanceField {
        self.ensure_started();
        self.coarse.as_ref().expect("started")
    }

    /// Fine field of the latest frame with the configured bias applied.
    /// Panics before the first step.
    pub fn fine_field(&self) -> DistanceField {
        self.ensure_started();
        let acc = self.acc.as_ref().expect("started");
        acc.to_field(self.beta as f32).apply_bias(self.config.bias as f32)
    }

    /// Raw accumulator state. Panics before the first step.
    pub fn accumulator(&self) -> &AccumulatorField {
        self.ensure_started();
        self.acc.as_ref().expect("started")
    }

    /// Exact geometry of the latest frame. Panics before the first step.
    pub fn bvh(&self) -> &Arc<Bvh> {
        self.ensure_started();
        self.bvh.as_ref().expect("started")
    }
}

/// Median of `times`; the upper middle for even counts.
pub fn median(mut times: Vec<Duration>) -> Duration {
    times.sort_unstable();
    times.get(times.len() / 2).copied().unwrap_or_default()
}

/// Runs `f` `repeats` times, returning the last result and the median time.
pub(crate) fn timed<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, Duration)> {
    let mut times = Vec::with_capacity(repeats);
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        out = Some(f()?);
        times.push(t.elapsed());
    }
    Ok((out.expect("at least one run"), median(times)))
}
