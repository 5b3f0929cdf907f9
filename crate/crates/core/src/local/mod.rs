//! Near-range scope: PD visual servoing on the endoscope image, two-view
//! depth by block matching, and template registration for the flower pose.

mod registration;
mod servo;
mod stereo;
mod template;

pub use registration::{flower_normal, kabsch, register_template, voxel_downsample, RegParams, RegistrationResult};
pub use servo::{
    closest_to_center, estimate_range_from_bbox, servo_error, servo_step, PdGains, ServoCommand, ServoParams,
    FLOWER_DIAGONAL_MM,
};
pub use stereo::{extract_flower_cloud, two_view_depth, two_view_depth_roi, MatchParams};
pub use template::{FlowerTemplate, TEMPLATE_FRAME};
