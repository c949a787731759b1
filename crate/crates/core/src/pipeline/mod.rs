//! End-to-end orchestration: ingest → filter → dedup → forge → score →
//! export, driven by one config file, plus the review store behind the
//! human-validation API.

pub mod config;
pub mod export;
pub mod review;
pub mod run;
pub mod score;

pub use config::{ForgeTask, PipelineConfig};
pub use export::{export_dataset, ExportManifest};
pub use review::{DecisionRequest, ReviewDecision, ReviewError, ReviewStats, ReviewStore, Verdict};
pub use run::{run_forge_with, run_pipeline, run_stage, RunReport, Stage, StageReport};

use crate::clients::ClientError;
use crate::forge::ForgeError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<PipelineError>,
        report: Box<RunReport>,
    },
}
