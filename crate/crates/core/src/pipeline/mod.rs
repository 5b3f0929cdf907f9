//! Stage-gated orchestration: wide-view detection, servoing and pose
//! estimation, contact and inspection per flower, and seeded batches with
//! conditional per-stage success rates.

mod batch;
mod config;
mod report;
mod run;

pub use batch::{run_batch, write_dumps, BatchReport};
pub use config::{CameraRig, NoiseParams, ScenarioConfig, StereoParams};
pub use report::{FailureReason, FlowerMetrics, RateTable, Stage, StageOutcome, StageRate, StageReport};
pub use run::{
    match_hypotheses, observe_scene, run_flower, run_flower_with_dumps, run_scene, GlobalView, ImageDump, SceneRun,
};
