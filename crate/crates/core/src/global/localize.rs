use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Point3, Pose6D};
use crate::raster::DepthMap;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowerHypothesis {
    /// Estimated flower center, base frame, mm.
    pub position: Point3,
    pub detection: Detection,
    /// Camera position and flower position, base frame.
    pub segment: (Point3, Point3),
}

/// Median of the finite depths inside the detection box.
pub fn median_depth(det: &Detection, depth: &DepthMap) -> Result<f64> {
    let b = det
        .bbox
        .clipped(depth.width(), depth.height())
        .ok_or(Error::Localization)?;
    let mut vals: Vec<f64> = (b.v_min..b.v_max)
        .flat_map(|y| (b.u_min..b.u_max).map(move |x| (x, y)))
        .map(|(x, y)| depth.get(x, y))
        .filter(|d| d.is_finite())
        .collect();
    if vals.is_empty() {
        return Err(Error::Localization);
    }
    let mid = vals.len() / 2;
    let (_, upper, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if vals.len() % 2 == 1 {
        return Ok(upper);
    }
    let lower = vals[..mid].iter().copied().fold(f64::MIN, f64::max);
    Ok(0.5 * (lower + upper))
}

/// Back-projects the box center at the median box depth and maps it into
/// the parent frame of `cam_pose`.
pub fn localize_flower(
    det: &Detection,
    depth: &DepthMap,
    cam: &CameraModel,
    cam_pose: &Pose6D,
) -> Result<FlowerHypothesis> {
    if !det.bbox.fits(depth.width(), depth.height()) {
        return Err(Error::Domain("detection box outside depth map".into()));
    }
    let z = median_depth(det, depth)?;
    let p_cam = cam.backproject(det.bbox.center(), z)?;
    let position = cam_pose.transform_point(&p_cam);
    Ok(FlowerHypothesis {
        position,
        detection: det.clone(),
        segment: (*cam_pose.translation(), position),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BoundingBox;

    fn det(b: BoundingBox) -> Detection {
        Detection {
            bbox: b,
            confidence: 1.0,
            source: "cam".into(),
        }
    }

    #[test]
    fn median_ignores_no_return_and_averages_even_counts() {
        let d = DepthMap::from_raw(4, 1, vec![DepthMap::NO_RETURN, 10.0, 30.0, 20.0]).unwrap();
        assert_eq!(median_depth(&det(BoundingBox::new(0, 0, 4, 1).unwrap()), &d).unwrap(), 20.0);
        assert_eq!(median_depth(&det(BoundingBox::new(0, 0, 3, 1).unwrap()), &d).unwrap(), 20.0);
        assert_eq!(median_depth(&det(BoundingBox::new(1, 0, 2, 1).unwrap()), &d).unwrap(), 10.0);
    }

    #[test]
    fn background_box_fails() {
        let d = DepthMap::empty(8, 8);
        let cam = CameraModel::centered(100.0, 8, 8, 1.0, 10.0).unwrap();
        let r = localize_flower(&det(BoundingBox::new(1, 1, 4, 4).unwrap()), &d, &cam, &Pose6D::identity("base"));
        assert!(matches!(r, Err(Error::Localization)));
    }
}
