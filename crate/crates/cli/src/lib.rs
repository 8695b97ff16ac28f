//! Orchestration for the `mnar` command: configuration, run manifests and
//! the file-based pipeline stages.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::{Overrides, PipelineConfig, Resolved};
pub use manifest::{RunManifest, StageStatus};
pub use stages::{Context, Outcome};
