use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detection,
    Alignment,
    PoseEstimation,
    Contact,
    Inspection,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Detection,
        Stage::Alignment,
        Stage::PoseEstimation,
        Stage::Contact,
        Stage::Inspection,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Detection => "detection",
            Stage::Alignment => "alignment",
            Stage::PoseEstimation => "pose_estimation",
            Stage::Contact => "contact",
            Stage::Inspection => "inspection",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// No wide-view detection matched the flower.
    NotDetected,
    /// A leaf blocked the line of sight during the approach.
    Occlusion,
    /// The endoscope lost every detection.
    TargetLost,
    /// The servo settled on a different flower.
    WrongTarget,
    /// The tracked box stayed too far from the image center.
    NotAligned,
    /// Too few stereo points on the flower.
    SparseCloud,
    /// Registration mean squared error above the threshold.
    RegistrationError,
    /// The contact motion could not be planned.
    PlanningFailed,
    /// No stigma blob in the microscope image.
    CenterNotFound,
    /// Centering did not settle within its step budget.
    CenteringTimeout,
    /// The flower center ended outside the cup.
    NotCaptured,
    /// Autofocus ran out of dial or steps.
    FocusFailed,
    /// A pollinated/unpollinated call disagreed with the ground truth.
    Misclassified,
    /// An algorithm returned an unexpected error.
    Internal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageOutcome {
    Success,
    Failure { reason: FailureReason },
    Skipped,
}

impl StageOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, StageOutcome::Success)
    }
}

/// Per-flower numbers worth auditing. Fields stay `None` when the stage
/// that would fill them did not run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowerMetrics {
    pub servo_steps: Option<usize>,
    /// Tracked box center distance from the principal point, px.
    pub alignment_error_px: Option<f64>,
    pub cloud_points: Option<usize>,
    pub registration_mse: Option<f64>,
    /// Angle between estimated and true flower normals, degrees.
    pub normal_error_deg: Option<f64>,
    pub centering_steps: Option<usize>,
    /// Cup axis to flower center in the tool plane, mm.
    pub cup_offset_mm: Option<f64>,
    pub autofocus_steps: Option<usize>,
    pub focus_score: Option<f64>,
    /// Pixel counts of every inspection in order.
    pub pollen_counts: Vec<u64>,
    pub final_pollen_count: Option<u64>,
    pub buzzes: usize,
    /// Stigma pollen particles at the end of the run.
    pub true_stigma_pollen: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub scene_seed: u64,
    pub flower_id: usize,
    pub detected: StageOutcome,
    pub aligned: StageOutcome,
    pub pose_estimated: StageOutcome,
    pub contacted: StageOutcome,
    pub inspected: StageOutcome,
    pub metrics: FlowerMetrics,
}

impl StageReport {
    /// All stages skipped; the runner fills them in order.
    pub fn pending(scene_seed: u64, flower_id: usize) -> Self {
        Self {
            scene_seed,
            flower_id,
            detected: StageOutcome::Skipped,
            aligned: StageOutcome::Skipped,
            pose_estimated: StageOutcome::Skipped,
            contacted: StageOutcome::Skipped,
            inspected: StageOutcome::Skipped,
            metrics: FlowerMetrics::default(),
        }
    }

    pub fn outcome(&self, stage: Stage) -> StageOutcome {
        match stage {
            Stage::Detection => self.detected,
            Stage::Alignment => self.aligned,
            Stage::PoseEstimation => self.pose_estimated,
            Stage::Contact => self.contacted,
            Stage::Inspection => self.inspected,
        }
    }

    pub fn outcome_mut(&mut self, stage: Stage) -> &mut StageOutcome {
        match stage {
            Stage::Detection => &mut self.detected,
            Stage::Alignment => &mut self.aligned,
            Stage::PoseEstimation => &mut self.pose_estimated,
            Stage::Contact => &mut self.contacted,
            Stage::Inspection => &mut self.inspected,
        }
    }

    pub fn outcomes(&self) -> [StageOutcome; 5] {
        Stage::ALL.map(|s| self.outcome(s))
    }

    /// A stage is skipped exactly when some earlier stage did not succeed.
    pub fn is_gated(&self) -> bool {
        let mut blocked = false;
        for o in self.outcomes() {
            if blocked != (o == StageOutcome::Skipped) {
                return false;
            }
            blocked |= !o.is_success();
        }
        true
    }

    pub fn first_failure(&self) -> Option<(Stage, FailureReason)> {
        Stage::ALL.into_iter().find_map(|s| match self.outcome(s) {
            StageOutcome::Failure { reason } => Some((s, reason)),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRate {
    pub stage: Stage,
    /// Flowers that reached the stage.
    pub attempted: usize,
    pub succeeded: usize,
    /// `succeeded / attempted`, or `None` when nothing reached the stage.
    pub rate: Option<f64>,
}

/// Conditional success rates: each stage's denominator is the number of
/// successes of the stage before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub flowers: usize,
    pub stages: Vec<StageRate>,
}

impl RateTable {
    pub fn from_reports(reports: &[StageReport]) -> Self {
        let stages = Stage::ALL
            .into_iter()
            .map(|stage| {
                let attempted = reports.iter().filter(|r| r.outcome(stage) != StageOutcome::Skipped).count();
                let succeeded = reports.iter().filter(|r| r.outcome(stage).is_success()).count();
                StageRate {
                    stage,
                    attempted,
                    succeeded,
                    rate: (attempted > 0).then(|| succeeded as f64 / attempted as f64),
                }
            })
            .collect();
        Self {
            flowers: reports.len(),
            stages,
        }
    }

    pub fn rate(&self, stage: Stage) -> Option<f64> {
        self.stages.iter().find(|s| s.stage == stage).and_then(|s| s.rate)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stage", "attempted", "succeeded", "rate"])?;
        for s in &self.stages {
            out.write_record([
                s.stage.label().to_owned(),
                s.attempted.to_string(),
                s.succeeded.to_string(),
                s.rate.map_or_else(String::new, |r| format!("{r:.4}")),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl fmt::Display for RateTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} flowers", self.flowers)?;
        for s in &self.stages {
            let rate = s.rate.map_or_else(|| "   n/a".to_owned(), |r| format!("{:5.1}%", 100.0 * r));
            writeln!(f, "  {:<16} {:>3}/{:<3} {rate}", s.stage.label(), s.succeeded, s.attempted)?;
        }
        Ok(())
    }
}
