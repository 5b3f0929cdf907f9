use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::pose::Point3;
use crate::error::{Error, Result};

/// Continuous pixel coordinate. Pixel `(i, j)` has its center at `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &PixelCoord) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Ideal pinhole camera. Camera frame: +x right, +y down, +z forward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Near clip plane, mm.
    pub near: f64,
    /// Far clip plane, mm.
    pub far: f64,
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        near: f64,
        far: f64,
    ) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            near,
            far,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: u32, height: u32, near: f64, far: f64) -> Result<Self> {
        Self::new(
            focal,
            focal,
            f64::from(width) / 2.0,
            f64::from(height) / 2.0,
            width,
            height,
            near,
            far,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image must be non-empty".into()));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(Error::InvalidCamera("cx outside image".into()));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return Err(Error::InvalidCamera("cy outside image".into()));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::InvalidCamera("need 0 < near < far".into()));
        }
        Ok(())
    }

    pub fn focal_mean(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn principal_point(&self) -> PixelCoord {
        PixelCoord::new(self.cx, self.cy)
    }

    pub fn project(&self, x: &Point3) -> Result<PixelCoord> {
        if !(x.z > 0.0) {
            return Err(Error::BehindCamera { z: x.z });
        }
        Ok(PixelCoord::new(
            self.fx * x.x / x.z + self.cx,
            self.fy * x.y / x.z + self.cy,
        ))
    }

    /// Point at z-depth `depth` along the ray through `px`.
    pub fn backproject(&self, px: PixelCoord, depth: f64) -> Result<Point3> {
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(Error::Domain(format!("depth must be positive, got {depth}")));
        }
        Ok(Vector3::new(
            (px.u - self.cx) / self.fx * depth,
            (px.v - self.cy) / self.fy * depth,
            depth,
        ))
    }

    /// Unnormalized ray direction (z = 1) through a pixel.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, px: &PixelCoord) -> bool {
        px.u >= -0.5
            && px.v >= -0.5
            && px.u < f64::from(self.width) - 0.5
            && px.v < f64::from(self.height) - 0.5
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

pub fn project(cam: &CameraModel, x: &Point3) -> Result<PixelCoord> {
    cam.project(x)
}

pub fn backproject(cam: &CameraModel, px: PixelCoord, depth: f64) -> Result<Point3> {
    cam.backproject(px, depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraModel {
        CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480, 1.0, 5000.0).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        for d in [1.0, 100.0, 2500.0] {
            let px = cam().project(&Vector3::new(0.0, 0.0, d)).unwrap();
            assert_eq!(px, PixelCoord::new(320.0, 240.0));
        }
    }

    #[test]
    fn pinhole_formula_hand_value() {
        let px = cam().project(&Vector3::new(10.0, 0.0, 100.0)).unwrap();
        assert_eq!(px.u, 370.0);
    }

    #[test]
    fn zero_depth_is_behind_camera() {
        assert!(matches!(
            cam().project(&Vector3::new(1.0, 1.0, 0.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    #[test]
    fn backproject_principal_point() {
        let p = cam().backproject(PixelCoord::new(320.0, 240.0), 100.0).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 100.0));
        assert!(cam().backproject(PixelCoord::new(1.0, 1.0), 0.0).is_err());
        assert!(cam().backproject(PixelCoord::new(1.0, 1.0), -3.0).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(CameraModel::new(0.0, 1.0, 1.0, 1.0, 4, 4, 1.0, 2.0).is_err());
        assert!(CameraModel::new(1.0, 1.0, 4.0, 1.0, 4, 4, 1.0, 2.0).is_err());
        assert!(CameraModel::new(1.0, 1.0, 1.0, 1.0, 4, 4, 2.0, 2.0).is_err());
    }
}
