//! Command-line front end. `run` returns the process exit code:
//!
//! | code | meaning                          |
//! |------|----------------------------------|
//! | 0    | success                          |
//! | 2    | usage error                      |
//! | 3    | configuration error              |
//! | 4    | I/O or file format error         |
//! | 5    | internal invariant breach        |

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{run_scenario, sweep, trend_report, write_csv, Knob, Scenario};
use crate::error::{Error, Result};
use crate::field::{Axis, DistanceField};
use crate::geometry::Bvh;
use crate::image::Image;
use crate::pipeline::{Pipeline, PipelineConfig, Size, DEFAULT_BIAS};
use crate::raymarch::{MarchParams, DEFAULT_MAX_STEP};
use crate::raysample::{DEFAULT_ALPHA, DEFAULT_MASK_DISTANCE};
use crate::render::{compare, rasterize_gbuffer, reference_render, scenes, shade, ShadeParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INVARIANT: i32 = 5;

pub const THREADS_ENV: &str = "HYBRID_SDF_THREADS";

const KEYS: &str = "\
Configuration keys and defaults:
  rays_per_frame  (-x)  rays per masked texel per frame        5
  mask_distance   (-d)  coarse distance below which texels are ray sampled  0.1
  decay_alpha           weight of the previous frame            0.95
  bias                  thickening subtracted from the fine field  0.01
  beta                  coarse sign shift                     half a coarse cell diagonal
  max_step              sphere-tracing step cap (world units)    0.05
  epsilon               hit threshold                          one field cell
  seed                  global random seed                     0

Sizes: S = 64^3 coarse / 128^3 fine, M = 128^3 / 256^3, L = 256^3 / 512^3.
Scenes: sphere, sphere-over-plane, thin-plate, orbit, cube.
Exit codes: 0 ok, 2 usage, 3 config, 4 I/O or format, 5 internal invariant.";

#[derive(Debug, Parser)]
#[command(name = "hybrid-sdf", version, about = "Jump-flooded and ray-sampled distance fields with soft shadows", after_help = KEYS)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Global random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run V, JF and RT for a number of frames and write the coarse and fine fields.
    Generate(GenerateArgs),
    /// Render a shaded frame with SDF soft shadows or the ray-traced reference.
    Render(RenderArgs),
    /// Export one axis-aligned slice of a field file as an image.
    Slice(SliceArgs),
    /// Sweep d, x or grid size and print ordering verdicts.
    Bench(BenchArgs),
    /// Print error metrics between two PFM images.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    #[arg(long, default_value = "sphere-over-plane")]
    pub scene: String,
    /// S, M or L.
    #[arg(long, default_value = "M", value_parser = parse_size)]
    pub size: Size,
    #[arg(long, default_value_t = 60)]
    pub frames: u64,
    /// Rays per masked texel per frame.
    #[arg(short = 'x', long = "rays", default_value_t = 5)]
    pub rays: u32,
    /// Mask distance; `inf` samples every texel.
    #[arg(short = 'd', long = "mask-distance", default_value_t = DEFAULT_MASK_DISTANCE)]
    pub mask_distance: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BIAS)]
    pub bias: f64,
    /// Coarse sign shift [default: half a coarse cell diagonal].
    #[arg(long)]
    pub beta: Option<f64>,
}

impl FieldArgs {
    fn config(&self, seed: u64) -> PipelineConfig {
        let mut c = PipelineConfig::sized(self.size);
        c.rays_per_frame = self.rays;
        c.mask_distance = self.mask_distance;
        c.alpha = self.alpha;
        c.bias = self.bias;
        c.beta = self.beta;
        c.seed = seed;
        c
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    /// Output directory for coarse.rsdf and fine.rsdf.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Sphere-traced soft shadows through the fine field.
    Rtsdf,
    /// Same, through the coarse field only.
    CoarseOnly,
    /// Distributed ray tracing against the exact mesh.
    Reference,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long, value_enum, default_value_t = Mode::Rtsdf)]
    pub mode: Mode,
    /// Shorthand for `--mode reference`.
    #[arg(long)]
    pub reference: bool,
    /// Field file to shade with, or `live` to generate one first.
    #[arg(long = "field", default_value = "live")]
    pub field_path: String,
    /// Light samples per pixel for the reference.
    #[arg(long, default_value_t = 256)]
    pub spp: u32,
    #[arg(long, default_value_t = DEFAULT_MAX_STEP)]
    pub max_step: f64,
    /// Start-offset jitter as a fraction of max_step.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Jittered marches averaged per pixel.
    #[arg(long, default_value_t = 1)]
    pub jitter_draws: u32,
    /// Hit threshold [default: one field cell].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Use each sample's own d/t instead of triangulating between samples.
    #[arg(long)]
    pub no_triangulate: bool,
    /// Light-disc samples for the umbra experiment (0 = off).
    #[arg(long, default_value_t = 0)]
    pub umbra_samples: u32,
    /// Also trace an exact hard-shadow ray per pixel.
    #[arg(long)]
    pub hard_shadow_fallback: bool,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Linear PFM output; an 8-bit PPM preview is written beside it.
    #[arg(long, short, default_value = "render.pfm")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    /// Field file (RSDF).
    #[arg(long = "field")]
    pub field_path: PathBuf,
    #[arg(long, default_value = "y", value_parser = parse_axis)]
    pub axis: Axis,
    /// Cell index along the axis [default: middle].
    #[arg(long)]
    pub index: Option<usize>,
    /// Distance mapped to full colour saturation.
    #[arg(long, default_value_t = 0.5)]
    pub scale: f32,
    #[arg(long)]
    pub grayscale: bool,
    #[arg(long, short, default_value = "slice.ppm")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    D,
    X,
    Size,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepKind,
    /// Base scenario (TOML); the command-line values below are ignored when given.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "sphere-over-plane")]
    pub scene: String,
    #[arg(long, default_value = "S", value_parser = parse_size)]
    pub size: Size,
    #[arg(long, default_value_t = 3)]
    pub frames: u64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    /// Comma-separated knob values [default: d 0.01,0.05,0.1,0.5,inf; x 0,1,5,10,15; size 64,128].
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, short, default_value = "bench")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

fn parse_size(s: &str) -> std::result::Result<Size, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Csv(_) | Error::Format(_) | Error::UnsupportedVersion { .. } | Error::Truncated { .. } => {
            EXIT_IO
        }
        Error::Invariant(_) => EXIT_INVARIANT,
        Error::IndexOutOfRange { .. } => EXIT_USAGE,
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let seed = cli.global.seed;
    match &cli.command {
        Command::Generate(a) => generate(a, seed),
        Command::Render(a) => render(a, seed),
        Command::Slice(a) => slice(a),
        Command::Bench(a) => bench(a, seed),
        Command::Compare(a) => {
            let m = compare(&Image::read_pfm(&a.a)?, &Image::read_pfm(&a.b)?, None)?;
            println!("rmse {:.6}\nmae {:.6}\nmax {:.6}\npixels {}", m.rmse, m.mae, m.max, m.pixels);
            Ok(())
        }
    }
}

fn warn_if_large(size: Size) {
    if size == Size::L {
        log::warn!("size L needs about 3 GB and is slow on few cores; expect minutes per frame");
        eprintln!("warning: size L is slow and memory hungry (512^3 fine texels)");
    }
}

fn run_pipeline(f: &FieldArgs, seed: u64) -> Result<Pipeline> {
    warn_if_large(f.size);
    let mut p = Pipeline::new(scenes::by_name(&f.scene)?, f.config(seed))?;
    for _ in 0..f.frames.max(1) {
        let r = p.step()?;
        log::info!(
            "frame {}: {} masked texels, {:.1} ms",
            r.frame,
            r.stats.masked_texels,
            r.total().as_secs_f64() * 1e3
        );
    }
    Ok(p)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn generate(a: &GenerateArgs, seed: u64) -> Result<()> {
    let p = run_pipeline(&a.field, seed)?;
    create_dir(&a.out)?;
    let coarse = p.coarse_field().clone();
    coarse.save(&a.out.join("coarse.rsdf"))?;
    p.fine_field().save(&a.out.join("fine.rsdf"))?;
    println!(
        "wrote {} and {}",
        a.out.join("coarse.rsdf").display(),
        a.out.join("fine.rsdf").display()
    );
    Ok(())
}

fn render(a: &RenderArgs, seed: u64) -> Result<()> {
    let mode = if a.reference { Mode::Reference } else { a.mode };
    let mut scene = scenes::by_name(&a.field.scene)?;
    let cam = scene.camera;
    scene.camera = cam.with_size(a.width.unwrap_or(cam.width), a.height.unwrap_or(cam.height));
    scene.camera.validate()?;
    let (field, bvh) = if mode == Mode::Reference {
        (None, Bvh::build(scene.mesh_at(a.field.frames.saturating_sub(1))?))
    } else if a.field_path == "live" {
        let p = run_pipeline(&a.field, seed)?;
        let field = match mode {
            Mode::CoarseOnly => p.coarse_field().apply_bias(a.field.bias as f32),
            _ => p.fine_field(),
        };
        (Some(field), Bvh::build(p.bvh().mesh_arc().clone()))
    } else {
        let field = DistanceField::load(Path::new(&a.field_path))?;
        let mesh = scene.mesh_at(field.frame)?;
        (Some(field), Bvh::build(mesh))
    };
    let gbuf = rasterize_gbuffer(&bvh, &scene.camera);
    let img = match field {
        None => reference_render(&gbuf, &bvh, &scene.light, a.spp.max(1), seed, [0.0; 3]),
        Some(field) => {
            let cell = field.grid().max_cell_size();
            let mut m = MarchParams::for_field(&field, scene.bounds.diagonal())?;
            m.max_step = a.max_step;
            m.jitter = a.jitter;
            m.triangulate = !a.no_triangulate;
            if let Some(e) = a.epsilon {
                m.epsilon = e;
            }
            m.validate(cell)?;
            let mut params = ShadeParams::new(m);
            params.jitter_draws = a.jitter_draws;
            params.umbra_samples = a.umbra_samples;
            params.hard_shadow_fallback = a.hard_shadow_fallback;
            params.seed = seed;
            params.frame = field.frame;
            shade(&gbuf, &field, &scene.light, &params, Some(&bvh))
        }
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    img.write_pfm(&a.out)?;
    img.write_ppm(&a.out.with_extension("ppm"), 2.2)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn slice(a: &SliceArgs) -> Result<()> {
    let field = DistanceField::load(&a.field_path)?;
    let axis_len = field.grid().dims()[a.axis as usize];
    let index = a.index.unwrap_or(axis_len / 2);
    let s = field.slice(a.axis, index)?;
    let img = if a.grayscale {
        s.to_grayscale(-a.scale, a.scale)
    } else {
        s.to_image(a.scale)
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    img.write_ppm(&a.out, 1.0)?;
    println!("wrote {} ({}x{})", a.out.display(), s.width, s.height);
    Ok(())
}

fn bench(a: &BenchArgs, seed: u64) -> Result<()> {
    let base = match &a.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario {
            id: "bench".into(),
            scene: a.scene.clone(),
            size: Some(a.size),
            frames: a.frames,
            repeats: a.repeats,
            seed,
            ..Scenario::default()
        },
    };
    let (knob, defaults) = match a.sweep {
        SweepKind::D => (Knob::MaskDistance, vec![0.01, 0.05, 0.1, 0.5, f64::INFINITY]),
        SweepKind::X => (Knob::RaysPerFrame, vec![0.0, 1.0, 5.0, 10.0, 15.0]),
        SweepKind::Size => (Knob::Size, vec![64.0, 128.0]),
    };
    let values = a.values.clone().unwrap_or(defaults);
    if knob == Knob::Size && values.iter().any(|&v| v >= 256.0) {
        warn_if_large(Size::L);
    }
    let mut scenario_base = base;
    scenario_base.output_dir = Some(a.out.clone());
    let scenarios = sweep(&scenario_base, knob, &values)?;
    let mut runs = Vec::new();
    for s in &scenarios {
        log::info!("running {}", s.id);
        runs.push(run_scenario(s)?);
    }
    let report = trend_report(&runs)?;
    create_dir(&a.out)?;
    let path = a.out.join("sweep.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let rows: Vec<_> = runs.iter().flat_map(|r| r.rows()).collect();
    write_csv(file, &rows)?;
    print!("{report}");
    println!("wrote {}", path.display());
    Ok(())
}
