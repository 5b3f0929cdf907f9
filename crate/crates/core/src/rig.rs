//! Robot rig: camera presets, frame names and the tool geometry.
//!
//! Tool frame: origin at the cup center on the upper tool surface, `+z` up
//! (along the flower normal once contact begins), `+x` forward (towards the
//! fork tip). The base frame has `+x` forward, `+y` left and `+z` up.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{from_axes, CameraModel, Pose6D};

pub const BASE: &str = "base";
pub const TOOL: &str = "tool";
pub const GLOBAL_CAM: &str = "global_cam";
pub const ENDOSCOPE: &str = "endoscope";
pub const MICROSCOPE: &str = "microscope";

pub fn global_camera() -> CameraModel {
    CameraModel::centered(615.0, 640, 480, 100.0, 3000.0).expect("valid preset")
}

pub fn endoscope_camera() -> CameraModel {
    CameraModel::centered(500.0, 640, 480, 5.0, 2000.0).expect("valid preset")
}

pub fn microscope_camera() -> CameraModel {
    CameraModel::centered(1300.0, 640, 480, 1.0, 500.0).expect("valid preset")
}

/// Wide-view camera 500 mm above the base origin, looking along base `+x`.
pub fn global_camera_pose() -> Pose6D {
    let r = from_axes(&-Vector3::y(), &-Vector3::z(), &Vector3::x());
    Pose6D::new(r, Vector3::new(0.0, 0.0, 500.0), BASE, GLOBAL_CAM).expect("valid preset")
}

/// Endoscope mount: behind and above the cup, looking forward along `+x`.
pub fn endoscope_mount() -> Pose6D {
    let r = from_axes(&-Vector3::y(), &-Vector3::z(), &Vector3::x());
    Pose6D::new(r, Vector3::new(-40.0, 0.0, 25.0), TOOL, ENDOSCOPE).expect("valid preset")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolParams {
    /// Endoscope camera pose in the tool frame.
    pub endoscope_mount: Pose6D,
    /// Cup radius, mm.
    pub cup_radius: f64,
    /// Microscope lens height above the upper tool surface at slide 0, mm.
    pub lens_offset: f64,
    /// Gap kept below the lowest flower point when sliding under it, mm.
    pub clearance: f64,
    /// Slide position while approaching and centering, mm.
    pub slide_approach: f64,
    /// Slide position for inspection, mm.
    pub slide_inspect: f64,
}

impl Default for ToolParams {
    fn default() -> Self {
        Self {
            endoscope_mount: endoscope_mount(),
            cup_radius: 8.0,
            lens_offset: 8.0,
            clearance: 5.0,
            slide_approach: 45.0,
            slide_inspect: 6.0,
        }
    }
}

impl ToolParams {
    pub fn validate(&self) -> Result<()> {
        self.endoscope_mount.validate()?;
        if self.endoscope_mount.parent().as_str() != TOOL {
            return Err(Error::Config("endoscope_mount must have parent frame `tool`".into()));
        }
        if !(self.cup_radius > 0.0 && self.lens_offset >= 0.0 && self.clearance >= 0.0) {
            return Err(Error::Config("tool: cup_radius > 0, lens_offset ≥ 0, clearance ≥ 0".into()));
        }
        for s in [self.slide_approach, self.slide_inspect] {
            if !(0.0..=crate::scene::SLIDE_MAX).contains(&s) {
                return Err(Error::Config(format!("tool: slide {s} outside [0, 45] mm")));
            }
        }
        Ok(())
    }

    /// Microscope camera in the tool frame for a slide position: above the
    /// cup, looking down `−z`, image `+x` along tool `−y` and image `+y`
    /// along tool `−x`.
    pub fn microscope_mount(&self, slide: f64) -> Pose6D {
        let r = from_axes(&-Vector3::y(), &-Vector3::x(), &-Vector3::z());
        Pose6D::new(r, Vector3::new(0.0, 0.0, self.lens_offset + slide), TOOL, MICROSCOPE)
            .expect("constant rotation")
    }

    /// Tool pose (tool → base) that puts the endoscope at `endoscope_pose`.
    pub fn tool_from_endoscope(&self, endoscope_pose: &Pose6D) -> Result<Pose6D> {
        endoscope_pose.compose(&self.endoscope_mount.inverse())
    }

    pub fn endoscope_pose(&self, tool_pose: &Pose6D) -> Result<Pose6D> {
        tool_pose.compose(&self.endoscope_mount)
    }

    pub fn microscope_pose(&self, tool_pose: &Pose6D, slide: f64) -> Result<Pose6D> {
        tool_pose.compose(&self.microscope_mount(slide))
    }
}
