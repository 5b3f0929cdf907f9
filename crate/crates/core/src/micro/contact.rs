use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, from_axes, to_axis_angle, PixelCoord, Point3, Pose6D};
use crate::raster::PointCloud;
use crate::rig::{ToolParams, BASE, TOOL};
use crate::scene::MicroscopeState;

use super::center::EllipseFit;

/// One motion of the contact sequence, base frame, mm and radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionPrimitive {
    /// Rotate about the cup center so tool `+z` matches the flower normal.
    RotateToPerpendicular { axis: Vector3<f64>, angle: f64 },
    /// Translate against the normal until the tool clears the flower.
    Descend { direction: Vector3<f64>, distance: f64 },
    /// Slide in the tool plane until the cup sits under the flower.
    Advance { direction: Vector3<f64>, distance: f64 },
}

impl MotionPrimitive {
    /// Applies the motion to a tool pose (tool → base).
    pub fn apply(&self, tool: &Pose6D) -> Pose6D {
        match *self {
            MotionPrimitive::RotateToPerpendicular { axis, angle } => {
                let r = axis_angle(&axis, angle) * tool.rotation();
                Pose6D::from_approx(r, *tool.translation(), tool.parent().clone(), tool.child().clone())
            }
            MotionPrimitive::Descend { direction, distance } | MotionPrimitive::Advance { direction, distance } => {
                tool.clone().with_translation(tool.translation() + distance * direction)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPlan {
    pub rotate: MotionPrimitive,
    pub descend: MotionPrimitive,
    pub advance: MotionPrimitive,
    /// Microscope slide preset during the approach, mm.
    pub slide: f64,
}

impl ContactPlan {
    pub fn primitives(&self) -> [MotionPrimitive; 3] {
        [self.rotate, self.descend, self.advance]
    }

    /// Tool pose after the three motions, plus an optional extra offset
    /// applied with the final advance (execution error).
    pub fn execute(&self, tool: &Pose6D, advance_error: &Vector3<f64>) -> Pose6D {
        let p = self.primitives().iter().fold(tool.clone(), |p, m| m.apply(&p));
        let t = p.translation() + advance_error;
        p.with_translation(t)
    }
}

/// Plans the rotate, descend and advance motions that bring the tool under
/// a flower with outward `normal` whose surface points are `cloud`, both in
/// the base frame. After the plan, tool `+z` is the normal, the upper tool
/// surface lies `clearance` below the lowest cloud point along the normal
/// and the cup center sits under the cloud centroid.
pub fn plan_contact(normal: &Vector3<f64>, cloud: &PointCloud, tool_pose: &Pose6D, tool: &ToolParams) -> Result<ContactPlan> {
    if cloud.frame.as_str() != BASE || tool_pose.parent().as_str() != BASE || tool_pose.child().as_str() != TOOL {
        return Err(Error::Planning(format!(
            "expected base-frame cloud and tool → base pose, got cloud `{}` and {} → {}",
            cloud.frame.as_str(),
            tool_pose.child().as_str(),
            tool_pose.parent().as_str()
        )));
    }
    let n = normal.try_normalize(1e-12).ok_or_else(|| Error::Planning("zero normal".into()))?;
    let centroid = cloud.centroid().ok_or(Error::EmptyCloud)?;
    let p = *tool_pose.translation();
    let in_plane = |v: Vector3<f64>| v - v.dot(&n) * n;

    // Forward axis towards the flower, or the current forward axis projected.
    let forward = [in_plane(centroid - p), in_plane(tool_pose.rotation().column(0).into_owned())]
        .into_iter()
        .chain([Vector3::x(), Vector3::y()].map(in_plane))
        .find_map(|v| v.try_normalize(1e-9))
        .expect("two independent axes cannot both be parallel to n");
    let target = from_axes(&forward, &n.cross(&forward), &n);
    let (axis, angle) = to_axis_angle(&(target * tool_pose.rotation().transpose()));

    let lowest = cloud.points.iter().map(|c| n.dot(c)).fold(f64::INFINITY, f64::min);
    let drop = n.dot(&p) - lowest + tool.clearance;
    let lowered: Point3 = p - drop * n;
    let slide_vec = in_plane(centroid - lowered);
    let distance = slide_vec.norm();
    let direction = if distance > 1e-12 { slide_vec / distance } else { forward };

    Ok(ContactPlan {
        rotate: MotionPrimitive::RotateToPerpendicular { axis, angle },
        descend: MotionPrimitive::Descend {
            direction: -n,
            distance: drop,
        },
        advance: MotionPrimitive::Advance { direction, distance },
        slide: tool.slide_approach,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CenteringParams {
    /// Lateral correction per pixel of image offset, mm/px.
    pub gain: f64,
    /// Upward creep along the tool normal per step, mm.
    pub creep: f64,
    /// Focus score on the stigma box that stops the creep.
    pub focus_threshold: f64,
    /// Image offset accepted as centered, px.
    pub tolerance_px: f64,
    pub max_steps: usize,
}

impl Default for CenteringParams {
    fn default() -> Self {
        Self {
            gain: 0.02,
            creep: 0.5,
            focus_threshold: 50.0,
            tolerance_px: 10.0,
            max_steps: 150,
        }
    }
}

impl CenteringParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.creep >= 0.0 && self.focus_threshold > 0.0 && self.tolerance_px > 0.0)
            || self.max_steps == 0
        {
            return Err(Error::Config("centering: gain, thresholds and max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Tool-frame motion for one centering step, mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteringCommand {
    pub lateral: Vector2<f64>,
    pub raise: f64,
    pub centered: bool,
    pub focused: bool,
}

impl CenteringCommand {
    pub fn done(&self) -> bool {
        self.centered && self.focused
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.lateral.x, self.lateral.y, self.raise)
    }
}

/// Proportional lateral correction that moves the cup axis towards the
/// stigma center, plus a constant upward creep until `focus` reaches the
/// threshold. The image-to-tool mapping comes from the microscope mount.
pub fn centering_step(
    ellipse: &EllipseFit,
    principal: PixelCoord,
    focus: f64,
    tool: &ToolParams,
    params: &CenteringParams,
) -> CenteringCommand {
    let (du, dv) = (ellipse.center.u - principal.u, ellipse.center.v - principal.v);
    let mount = tool.microscope_mount(0.0);
    let offset = mount.transform_vector(&Vector3::new(du, dv, 0.0));
    let focused = focus >= params.focus_threshold;
    CenteringCommand {
        lateral: params.gain * Vector2::new(offset.x, offset.y),
        raise: if focused { 0.0 } else { params.creep },
        centered: du.hypot(dv) <= params.tolerance_px,
        focused,
    }
}

/// Moves the microscope slide to the inspection preset.
pub fn final_approach(state: MicroscopeState, tool: &ToolParams) -> MicroscopeState {
    state.with_slide(tool.slide_inspect)
}

/// Distance from the cup axis to `point` (base frame) in the tool plane.
pub fn lateral_offset(tool_pose: &Pose6D, point: &Point3) -> f64 {
    let local = tool_pose.inverse().transform_point(point);
    local.x.hypot(local.y)
}

/// Whether the flower center lies within the cup radius of the cup axis.
pub fn is_captured(tool_pose: &Pose6D, flower_center: &Point3, tool: &ToolParams) -> bool {
    lateral_offset(tool_pose, flower_center) <= tool.cup_radius
}
