use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::raster::PointCloud;
use crate::scene::{PetalShape, ANTHER_HEIGHT, STIGMA_HEIGHT};

pub const TEMPLATE_FRAME: &str = "template";
/// Grid step of the canonical template, mm. Coarser grids give ICP a
/// rippled cost surface with spurious minima in spin.
const CANONICAL_SPACING: f64 = 0.25;

/// Reference flower surface with its origin at the petal-plane center and
/// the outward normal along `+z`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowerTemplate {
    pub cloud: PointCloud,
    pub normal: Vector3<f64>,
}

impl FlowerTemplate {
    /// Samples the surface seen from straight above on a square grid of
    /// `spacing` mm: stigma disk, then the anther ring, then petals.
    pub fn from_dimensions(
        shape: PetalShape,
        petal_radius: f64,
        stigma_radius: f64,
        anther_radius: f64,
        spacing: f64,
    ) -> Result<Self> {
        if !(spacing > 0.0 && petal_radius > 0.0 && stigma_radius > 0.0 && anther_radius >= stigma_radius) {
            return Err(Error::Domain("template: need positive radii, anther ≥ stigma, spacing > 0".into()));
        }
        let n = (petal_radius.max(anther_radius) / spacing).ceil() as i64;
        let mut points = Vec::new();
        for j in -n..=n {
            for i in -n..=n {
                let (a, b) = (i as f64 * spacing, j as f64 * spacing);
                let r2 = a * a + b * b;
                let z = if r2 <= stigma_radius * stigma_radius {
                    STIGMA_HEIGHT
                } else if r2 <= anther_radius * anther_radius {
                    ANTHER_HEIGHT
                } else if shape.contains(petal_radius, a, b) {
                    0.0
                } else {
                    continue;
                };
                points.push(Point3::new(a, b, z));
            }
        }
        Ok(Self {
            cloud: PointCloud::new(points, TEMPLATE_FRAME)?,
            normal: Vector3::z(),
        })
    }

    /// Canonical proportions with the petal radius set to the largest
    /// distance of `cloud` from its centroid, so that every observed point
    /// has template surface nearby.
    pub fn fitted_to(cloud: &PointCloud) -> Result<Self> {
        let c = cloud.centroid().ok_or(Error::EmptyCloud)?;
        let extent = cloud.points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
        let canonical = Self::canonical_dimensions();
        let radius = extent.max(canonical.2 + 1.0);
        Self::from_dimensions(PetalShape::Lobed, radius, canonical.1, canonical.2, CANONICAL_SPACING)
    }

    /// `(petal, stigma, anther)` radii of the canonical template, mm.
    pub fn canonical_dimensions() -> (f64, f64, f64) {
        (14.0, 4.0, 5.75)
    }

    /// Mid-range lobed flower: petals 14 mm, stigma 4 mm, anthers 5.75 mm,
    /// sampled every 0.25 mm.
    pub fn canonical() -> Self {
        let (petal, stigma, anther) = Self::canonical_dimensions();
        Self::from_dimensions(PetalShape::Lobed, petal, stigma, anther, CANONICAL_SPACING).expect("valid canonical dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_template_layers() {
        let t = FlowerTemplate::canonical();
        assert!(!t.cloud.is_empty());
        assert_eq!(t.normal, Vector3::z());
        assert!(t.cloud.points.contains(&Point3::new(0.0, 0.0, STIGMA_HEIGHT)));
        assert!(t.cloud.points.contains(&Point3::new(5.0, 0.0, ANTHER_HEIGHT)));
        assert!(t.cloud.points.contains(&Point3::new(13.5, 0.0, 0.0)));
        assert!(t.cloud.points.iter().all(|p| p.x.hypot(p.y) <= 14.0 + 1e-9));
        // Lobed outline is not symmetric: the far side of lobe 0 is empty.
        assert!(!t.cloud.points.contains(&Point3::new(-13.5, 0.0, 0.0)));
    }
}
