//! Real-time signed distance fields for soft shadows.
//!
//! A coarse field is produced every frame by conservative voxelization and
//! 3D jump flooding. It masks the region near surfaces, where a finer field is
//! refined by ray sampling with temporal decay. Shadows are sphere traced
//! through the fine field.
//!
//! ```no_run
//! use hybrid_sdf::pipeline::{Pipeline, PipelineConfig};
//! use hybrid_sdf::render::scenes;
//!
//! let scene = scenes::by_name("sphere-over-plane").unwrap();
//! let mut pipeline = Pipeline::new(scene, PipelineConfig::default()).unwrap();
//! for _ in 0..8 {
//!     pipeline.step().unwrap();
//! }
//! let fine = pipeline.fine_field();
//! println!("fine field {:?}", fine.grid().dims());
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod image;
pub mod jfa;
pub mod math;
pub mod pipeline;
pub mod raymarch;
pub mod raysample;
pub mod render;
pub mod voxelize;

pub use error::{Error, Result};
