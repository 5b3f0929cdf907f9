//! Deterministic simulator and algorithms for a three-scope robotic
//! strawberry pollination pipeline: wide-view flower detection, eye-in-hand
//! servoing with template registration, and microscope-guided contact,
//! autofocus and pollen inspection.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod global;
pub mod geometry;
pub mod imgproc;
pub mod local;
pub mod micro;
pub mod pipeline;
pub mod raster;
pub mod rig;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use geometry::{CameraModel, Frame, Hsv8, HsvRange, PixelCoord, Point3, Pose6D, Rgb8};
pub use raster::{BoundingBox, DepthMap, Image, PointCloud};
