use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{from_axes, Point3, Pose6D};
use crate::rig::{BASE, ENDOSCOPE};

/// Fractions of the camera–flower segment that work well for the approach.
pub const WAYPOINT_FRACTION_RANGE: (f64, f64) = (0.6, 0.8);

/// Endoscope pose (endoscope → base) at `fraction` of the way from the
/// wide-view camera to the flower, looking along the segment. Roll keeps
/// the image "up" (camera `−y`) as close to world `+z` as possible.
pub fn plan_waypoint(cam_position: &Point3, flower_position: &Point3, fraction: f64) -> Result<Pose6D> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!("waypoint fraction {fraction} outside (0, 1)")));
    }
    let seg = flower_position - cam_position;
    let len = seg.norm();
    if !(len > 1e-9) {
        return Err(Error::DegenerateSegment);
    }
    let z = seg / len;
    let mut up = Vector3::z() - Vector3::z().dot(&z) * z;
    if up.norm() < 1e-9 {
        // Looking straight up or down: fall back to world +x as "up".
        up = Vector3::x() - Vector3::x().dot(&z) * z;
    }
    let y = -up.normalize();
    let x = y.cross(&z);
    let position = cam_position + fraction * seg;
    Ok(Pose6D::from_approx(from_axes(&x, &y, &z), position, BASE, ENDOSCOPE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixty_percent_along_the_segment() {
        let p = plan_waypoint(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1000.0), 0.6).unwrap();
        assert!((p.translation() - Vector3::new(0.0, 0.0, 600.0)).norm() < 1e-9);
        let p = plan_waypoint(&Vector3::zeros(), &Vector3::new(200.0, 0.0, 0.0), 0.5).unwrap();
        assert!((p.translation() - Vector3::new(100.0, 0.0, 0.0)).norm() < 1e-12);
        // Horizontal approach keeps image-up on world-up.
        assert!((p.transform_vector(&-Vector3::y()) - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let a = Vector3::new(1.0, 2.0, 3.0);
        assert!(matches!(plan_waypoint(&a, &a, 0.6), Err(Error::DegenerateSegment)));
        assert!(plan_waypoint(&a, &Vector3::zeros(), 0.0).is_err());
        assert!(plan_waypoint(&a, &Vector3::zeros(), 1.0).is_err());
    }
}
