//! Frames, rigid transforms, pinhole projection and color conversion.
//!
//! All lengths are millimeters. Rotations are stored as 3×3 matrices and
//! re-orthonormalized after composition whenever drift exceeds 1e-9.

mod camera;
mod color;
mod pose;

pub use camera::{backproject, project, CameraModel, PixelCoord};
pub use color::{hsv_to_rgb, rgb_to_hsv, Hsv8, HsvRange, Rgb8};
pub(crate) use pose::proper_rotation;
pub use pose::{
    axis_angle, compose, from_axes, invert, nearest_rotation, rot_x, rot_y, rot_z,
    rotation_angle, rotation_between, to_axis_angle, Frame, Point3, Pose6D, ROTATION_TOLERANCE,
};
