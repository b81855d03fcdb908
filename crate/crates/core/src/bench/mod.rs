//! Scenario-driven timing harness and the ghosting experiment.
//!
//! A scenario is a TOML table:
//!
//! ```toml
//! id = "m-d0.1-x5"
//! scene = "sphere"          # see render::scenes::NAMES
//! size = "M"                # S, M or L; or give coarse_dims/fine_dims
//! rays_per_frame = 5        # x
//! mask_distance = 0.1       # d, `inf` masks every texel
//! alpha = 0.95
//! frames = 10
//! animate = true            # false freezes moving instances at frame 0
//! repeats = 5               # timing repeats per frame and pass
//! render = true             # run and time the DL pass
//! image_size = [160, 120]
//! seed = 0
//! output_dir = "out/m-d0.1-x5"   # optional CSV, image and slice output
//! # [light]                 # optional override, same shape as the scene light
//! # kind = "directional"
//! # direction = { x = 0.0, y = 1.0, z = 0.0 }
//! # angular_radius = 0.05
//! # intensity = 1.0
//! ```
//!
//! Timings are medians over `repeats`; all other CSV columns are
//! deterministic for a given seed.

pub mod ghosting;
pub mod trend;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Axis, DistanceField};
use crate::pipeline::{timed, Pipeline, PipelineConfig, Size};
use crate::raymarch::{Light, MarchParams};
use crate::raysample::{DEFAULT_ALPHA, DEFAULT_MASK_DISTANCE};
use crate::render::{rasterize_gbuffer, scenes, shade, Scene, ShadeParams};

pub use ghosting::{ghosting_experiment, GhostingConfig, GhostingCurve, GhostingFrame};
pub use trend::{trend_report, Knob, TrendReport, TrendRow, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub scene: String,
    pub size: Option<Size>,
    pub coarse_dims: Option<[usize; 3]>,
    pub fine_dims: Option<[usize; 3]>,
    pub rays_per_frame: u32,
    pub mask_distance: f64,
    pub alpha: f64,
    pub frames: u64,
    pub animate: bool,
    pub repeats: usize,
    pub render: bool,
    pub image_size: [usize; 2],
    pub seed: u64,
    pub light: Option<Light>,
    pub output_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            id: "default".into(),
            scene: "sphere".into(),
            size: Some(Size::S),
            coarse_dims: None,
            fine_dims: None,
            rays_per_frame: 5,
            mask_distance: DEFAULT_MASK_DISTANCE,
            alpha: DEFAULT_ALPHA,
            frames: 3,
            animate: true,
            repeats: 5,
            render: true,
            image_size: [160, 120],
            seed: 0,
            light: None,
            output_dir: None,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// `(coarse, fine)` dims; explicit dims win over the size name.
    pub fn dims(&self) -> Result<([usize; 3], [usize; 3])> {
        match (self.coarse_dims, self.fine_dims, self.size) {
            (Some(c), Some(f), _) => Ok((c, f)),
            (None, None, Some(s)) => Ok(([s.coarse(); 3], [s.fine(); 3])),
            (None, None, None) => Err(Error::Config(format!("scenario {:?}: no size or dims", self.id))),
            _ => Err(Error::Config(format!(
                "scenario {:?}: coarse_dims and fine_dims go together",
                self.id
            ))),
        }
    }

    /// Resolves every reference so errors surface before frame 0.
    pub fn validate(&self) -> Result<()> {
        self.build_scene()?;
        self.pipeline_config()?.validate()?;
        if self.frames == 0 {
            return Err(Error::Config(format!("scenario {:?}: frames must be positive", self.id)));
        }
        if self.image_size.contains(&0) {
            return Err(Error::Config(format!("scenario {:?}: empty image", self.id)));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let (coarse_dims, fine_dims) = self.dims()?;
        let mut c = PipelineConfig::sized(Size::S);
        c.coarse_dims = coarse_dims;
        c.fine_dims = fine_dims;
        c.rays_per_frame = self.rays_per_frame;
        c.mask_distance = self.mask_distance;
        c.alpha = self.alpha;
        c.seed = self.seed;
        c.recompute_static = true;
        Ok(c)
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let mut scene = if self.scene == "orbit" && !self.animate {
            scenes::orbit(u64::MAX)
        } else {
            scenes::by_name(&self.scene)?
        };
        if let Some(light) = self.light {
            scene.light = light;
        }
        let [w, h] = self.image_size;
        scene.camera = scene.camera.with_size(w, h);
        scene.validate()?;
        Ok(scene)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pass {
    V,
    JF,
    RT,
    DL,
}

impl Pass {
    pub const ALL: [Pass; 4] = [Pass::V, Pass::JF, Pass::RT, Pass::DL];
}

/// Per-frame pass durations (medians over repeats) and work counters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PassTimings {
    pub frame: u64,
    pub voxelize: Duration,
    pub jump_flood: Duration,
    pub ray_sample: Duration,
    pub lighting: Duration,
    pub masked_texels: u64,
    pub rays_traced: u64,
}

impl PassTimings {
    pub fn get(&self, pass: Pass) -> Duration {
        match pass {
            Pass::V => self.voxelize,
            Pass::JF => self.jump_flood,
            Pass::RT => self.ray_sample,
            Pass::DL => self.lighting,
        }
    }

    pub fn total(&self) -> Duration {
        Pass::ALL.iter().map(|&p| self.get(p)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario_id: String,
    pub frame: u64,
    pub pass: Pass,
    pub duration_ns: u64,
    pub masked_texels: u64,
    pub rays_traced: u64,
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub timings: Vec<PassTimings>,
    pub threads: usize,
}

impl ScenarioRun {
    pub fn rows(&self) -> Vec<CsvRow> {
        self.timings
            .iter()
            .flat_map(|t| {
                Pass::ALL.map(|pass| CsvRow {
                    scenario_id: self.scenario.id.clone(),
                    frame: t.frame,
                    pass,
                    duration_ns: t.get(pass).as_nanos() as u64,
                    masked_texels: t.masked_texels,
                    rays_traced: t.rays_traced,
                })
            })
            .collect()
    }

    /// Median over frames of one pass.
    pub fn median(&self, pass: Pass) -> Duration {
        crate::pipeline::median(self.timings.iter().map(|t| t.get(pass)).collect())
    }

    pub fn total_rays(&self) -> u64 {
        self.timings.iter().map(|t| t.rays_traced).sum()
    }
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Runs V, JF, RT and DL for every frame; writes CSV, the last image and a
/// mid-height fine slice when `output_dir` is set.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    s.validate()?;
    let scene = s.build_scene()?;
    let light = scene.light;
    let camera = scene.camera;
    let mut pipeline = Pipeline::new(scene, s.pipeline_config()?)?;
    let threads = rayon::current_num_threads();
    log::info!("scenario {}: {} frames on {threads} worker thread(s); timings are noisy", s.id, s.frames);

    let mut timings = Vec::with_capacity(s.frames as usize);
    let mut last_image = None;
    let mut fine: Option<DistanceField> = None;
    for _ in 0..s.frames {
        let r = pipeline.step_timed(s.repeats)?;
        let mut t = PassTimings {
            frame: r.frame,
            voxelize: r.voxelize,
            jump_flood: r.jump_flood,
            ray_sample: r.ray_sample,
            lighting: Duration::ZERO,
            masked_texels: r.stats.masked_texels,
            rays_traced: r.stats.rays_traced,
        };
        let field = pipeline.fine_field();
        if s.render {
            let gbuf = rasterize_gbuffer(pipeline.bvh(), &camera);
            let march = MarchParams::for_field(&field, pipeline.scene().bounds.diagonal())?;
            let mut params = ShadeParams::new(march);
            params.seed = s.seed;
            params.frame = r.frame;
            let (img, dt) = timed(s.repeats, || Ok(shade(&gbuf, &field, &light, &params, None)))?;
            t.lighting = dt;
            last_image = Some(img);
        }
        fine = Some(field);
        timings.push(t);
    }
    let run = ScenarioRun {
        scenario: s.clone(),
        timings,
        threads,
    };
    if let Some(dir) = &s.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(format!("{}.csv", s.id));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_csv(f, &run.rows())?;
        if let Some(img) = &last_image {
            img.write_pfm(&dir.join(format!("{}.pfm", s.id)))?;
            img.write_ppm(&dir.join(format!("{}.ppm", s.id)), 2.2)?;
        }
        if let Some(f) = &fine {
            let mid = f.grid().dims()[1] / 2;
            let slice = f.slice(Axis::Y, mid)?;
            slice.to_image(0.25).write_ppm(&dir.join(format!("{}-slice.ppm", s.id)), 1.0)?;
        }
    }
    Ok(run)
}

/// Scenarios varying one knob around `base`; ids get a knob suffix. Size
/// values are coarse cells per axis, with the fine grid twice as fine.
pub fn sweep(base: &Scenario, knob: Knob, values: &[f64]) -> Result<Vec<Scenario>> {
    values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            match knob {
                Knob::MaskDistance => s.mask_distance = v,
                Knob::RaysPerFrame => {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::Config(format!("rays per frame must be a whole number, got {v}")));
                    }
                    s.rays_per_frame = v as u32;
                }
                Knob::Size => {
                    let n = v as usize;
                    if v.fract() != 0.0 || n < 2 {
                        return Err(Error::Config(format!("coarse resolution must be a whole number >= 2, got {v}")));
                    }
                    s.size = None;
                    s.coarse_dims = Some([n; 3]);
                    s.fine_dims = Some([2 * n; 3]);
                }
            }
            s.id = format!("{}-{}{}", base.id, knob.label(), knob.format(v));
            if let Some(dir) = &base.output_dir {
                s.output_dir = Some(dir.clone());
            }
            s.validate()?;
            Ok(s)
        })
        .collect()
}
