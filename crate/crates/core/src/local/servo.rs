use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraModel;
use crate::global::Detection;

/// Assumed flower bounding-box diagonal, mm (a 24 mm flower seen square on).
pub const FLOWER_DIAGONAL_MM: f64 = 33.0;

/// Range to a detected flower from similar triangles on the box diagonal.
pub fn estimate_range_from_bbox(det: &Detection, cam: &CameraModel) -> Result<f64> {
    let diag = det.bbox.diagonal();
    if !(diag > 0.0) {
        return Err(Error::Domain("zero-size detection box".into()));
    }
    Ok(cam.focal_mean() * FLOWER_DIAGONAL_MM / diag)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdGains {
    /// Proportional gain, 1/s.
    pub kp: f64,
    /// Derivative gain, dimensionless.
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 1.0, kd: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoParams {
    pub gains: PdGains,
    /// Desired range to the flower, mm.
    pub target_range: f64,
    /// Control period, s.
    pub dt: f64,
    /// Speed clamp, mm/s.
    pub max_speed: f64,
    /// Error norm at which the loop stops, mm.
    pub tolerance: f64,
    pub max_steps: usize,
    /// Alignment succeeds when the box center lies within this many pixels
    /// of the principal point.
    pub alignment_px: f64,
}

impl Default for ServoParams {
    fn default() -> Self {
        Self {
            gains: PdGains::default(),
            target_range: 100.0,
            dt: 0.1,
            max_speed: 20.0,
            tolerance: 1.0,
            max_steps: 300,
            alignment_px: 64.0,
        }
    }
}

impl ServoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.max_speed > 0.0 && self.target_range > 0.0 && self.tolerance > 0.0) {
            return Err(Error::Config("servo: dt, max_speed, target_range and tolerance must be positive".into()));
        }
        if !(self.gains.kp.is_finite() && self.gains.kd.is_finite()) {
            return Err(Error::Config("servo: gains must be finite".into()));
        }
        Ok(())
    }
}

/// Translational velocity command in the endoscope camera frame. Rotation
/// is never commanded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoCommand {
    /// mm/s, norm at most the configured maximum.
    pub velocity: Vector3<f64>,
    /// Error this command was computed from, mm; feed it back as
    /// `prev_error` on the next step.
    pub error: Vector3<f64>,
}

impl ServoCommand {
    pub fn angular_velocity(&self) -> Vector3<f64> {
        Vector3::zeros()
    }
}

/// Detection whose box center is nearest the principal point.
pub fn closest_to_center<'a>(dets: &'a [Detection], cam: &CameraModel) -> Option<&'a Detection> {
    let pp = cam.principal_point();
    dets.iter()
        .min_by(|a, b| a.bbox.center().distance(&pp).total_cmp(&b.bbox.center().distance(&pp)))
}

/// Position error (lateral x, lateral y, axial) of a detection, mm.
pub fn servo_error(det: &Detection, cam: &CameraModel, target_range: f64) -> Result<Vector3<f64>> {
    let range = estimate_range_from_bbox(det, cam)?;
    let c = det.bbox.center();
    Ok(Vector3::new(
        (c.u - cam.cx) * range / cam.fx,
        (c.v - cam.cy) * range / cam.fy,
        range - target_range,
    ))
}

/// One PD step towards the setpoint. `prev_error = None` disables the
/// derivative term on the first step.
pub fn servo_step(
    dets: &[Detection],
    cam: &CameraModel,
    params: &ServoParams,
    prev_error: Option<Vector3<f64>>,
) -> Result<ServoCommand> {
    if !(params.dt > 0.0) {
        return Err(Error::Domain("servo dt must be positive".into()));
    }
    let det = closest_to_center(dets, cam).ok_or(Error::TargetLost)?;
    let error = servo_error(det, cam, params.target_range)?;
    let prev = prev_error.unwrap_or(error);
    let mut velocity = params.gains.kp * error + params.gains.kd * (error - prev) / params.dt;
    let speed = velocity.norm();
    if speed > params.max_speed {
        velocity *= params.max_speed / speed;
    }
    Ok(ServoCommand { velocity, error })
}
