//! Wide-view scope: color blob detection, depth-masked localization and
//! approach waypoint planning.

mod detect;
mod localize;
mod waypoint;

pub use detect::{detect_flowers, Detection, DetectorParams};
pub use localize::{localize_flower, median_depth, FlowerHypothesis};
pub use waypoint::{plan_waypoint, WAYPOINT_FRACTION_RANGE};
