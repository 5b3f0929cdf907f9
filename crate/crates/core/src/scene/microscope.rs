//! Microscope view: pinhole render plus pollen speckles on stigmas, then a
//! disk blur whose radius grows linearly with the defocus distance.

use serde::{Deserialize, Serialize};

use super::render::{render_surfaces, shade_map, SurfaceKind, SurfaceMap};
use super::{PlantScene, STIGMA_HEIGHT};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Pose6D};
use crate::imgproc::disk_blur;
use crate::raster::Image;
use crate::rng::{splitmix64, unit_f64};

/// Largest slide travel, mm.
pub const SLIDE_MAX: f64 = 45.0;

/// Linear slide position and zoom dial. Both are clamped on construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroscopeState {
    slide: f64,
    zoom: f64,
}

impl MicroscopeState {
    pub fn new(slide: f64, zoom: f64) -> Self {
        Self {
            slide: if slide.is_nan() { 0.0 } else { slide.clamp(0.0, SLIDE_MAX) },
            zoom: if zoom.is_nan() { 0.0 } else { zoom.clamp(0.0, 1.0) },
        }
    }

    pub fn slide(&self) -> f64 {
        self.slide
    }

    pub fn zoom(&self) -> f64 {
        self.zoom
    }

    pub fn with_slide(self, slide: f64) -> Self {
        Self::new(slide, self.zoom)
    }

    pub fn with_zoom(self, zoom: f64) -> Self {
        Self::new(self.slide, zoom)
    }

    pub fn zoom_at_limit(&self) -> bool {
        self.zoom <= 0.0 || self.zoom >= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroscopeOptics {
    /// Focal distance at zoom 0, mm.
    pub focal_min: f64,
    /// Focal distance at zoom 1, mm.
    pub focal_max: f64,
    /// Blur radius per mm of defocus, px/mm.
    pub blur_per_mm: f64,
    /// Radius of one pollen grain, mm.
    pub grain_radius: f64,
}

impl Default for MicroscopeOptics {
    fn default() -> Self {
        Self {
            focal_min: 5.0,
            focal_max: 60.0,
            blur_per_mm: 0.5,
            grain_radius: 0.0075,
        }
    }
}

impl MicroscopeOptics {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_min > 0.0 && self.focal_min < self.focal_max) {
            return Err(Error::Config("microscope: need 0 < focal_min < focal_max".into()));
        }
        if !(self.blur_per_mm >= 0.0) || !(self.grain_radius > 0.0) {
            return Err(Error::Config("microscope: blur_per_mm ≥ 0 and grain_radius > 0".into()));
        }
        Ok(())
    }

    pub fn focal_distance(&self, zoom: f64) -> f64 {
        self.focal_min + (self.focal_max - self.focal_min) * zoom.clamp(0.0, 1.0)
    }

    /// Zoom setting whose focal distance is `focal`, clamped to the dial.
    pub fn zoom_for(&self, focal: f64) -> f64 {
        ((focal - self.focal_min) / (self.focal_max - self.focal_min)).clamp(0.0, 1.0)
    }

    pub fn blur_radius(&self, subject: f64, focal: f64) -> f64 {
        self.blur_per_mm * (subject - focal).abs()
    }
}

/// Sharp microscope render that can be refocused without ray casting again.
#[derive(Clone, Debug)]
pub struct SharpMicroscopeView {
    pub image: Image,
    /// Z-depth of the stigma center nearest the optical axis, if any.
    pub subject_distance: Option<f64>,
}

impl SharpMicroscopeView {
    pub fn blur_radius(&self, state: &MicroscopeState, optics: &MicroscopeOptics) -> f64 {
        match self.subject_distance {
            Some(d) => optics.blur_radius(d, optics.focal_distance(state.zoom())),
            None => 0.0,
        }
    }

    pub fn focused(&self, state: &MicroscopeState, optics: &MicroscopeOptics) -> Image {
        disk_blur(&self.image, self.blur_radius(state, optics))
    }
}

/// Paints pollen grains on their flower's stigma pixels. Each grain adds
/// coverage equal to its disk area within a pixel; coverages combine as
/// independent layers and the pixel blends towards the pollen color.
fn splat_pollen(scene: &PlantScene, cam: &CameraModel, cam_pose: &Pose6D, map: &SurfaceMap, img: &mut Image, optics: &MicroscopeOptics) {
    let to_cam = cam_pose.inverse();
    let (w, h) = (i64::from(cam.width), i64::from(cam.height));
    // Fraction of each pixel left uncovered.
    let mut clear: Vec<f32> = Vec::new();
    for (index, f) in scene.flowers.iter().enumerate() {
        if f.pollen.stigma == 0 {
            continue;
        }
        let (e1, e2, _) = f.local_axes();
        let (e1, e2) = (to_cam.transform_vector(&e1), to_cam.transform_vector(&e2));
        let s = to_cam.transform_point(&f.stigma_center());
        if s.z + f.stigma_radius <= cam.near {
            continue;
        }
        if s.z - f.stigma_radius > cam.near {
            // Conservative screen circle of the stigma disk.
            let u = cam.fx * s.x / s.z + cam.cx;
            let v = cam.fy * s.y / s.z + cam.cy;
            let rad = 2.0 * cam.fx.max(cam.fy) * f.stigma_radius / (s.z - f.stigma_radius) + 2.0;
            if u + rad < 0.0 || v + rad < 0.0 || u - rad >= w as f64 || v - rad >= h as f64 {
                continue;
            }
        }
        if clear.is_empty() {
            clear = vec![1.0; cam.pixel_count()];
        }
        let on_stigma = |x: i64, y: i64| {
            map.get(x as u32, y as u32)
                .is_some_and(|hit| hit.kind == SurfaceKind::Stigma && hit.object as usize == index)
        };
        for i in 0..f.pollen.stigma {
            let hsh = splitmix64(f.texture_seed ^ splitmix64(i.wrapping_add(0x9011E)));
            let r = f.stigma_radius * unit_f64(hsh).sqrt();
            let theta = std::f64::consts::TAU * unit_f64(splitmix64(hsh));
            let p = s + r * (theta.cos() * e1 + theta.sin() * e2);
            if p.z <= cam.near {
                continue;
            }
            let u = cam.fx * p.x / p.z + cam.cx;
            let v = cam.fy * p.y / p.z + cam.cy;
            let rho = cam.fx * optics.grain_radius / p.z;
            let (ui, vi) = (u.round() as i64, v.round() as i64);
            if rho < 0.5 {
                // Sub-pixel grain: all of its area lands in one pixel.
                if (0..w).contains(&ui) && (0..h).contains(&vi) && on_stigma(ui, vi) {
                    let a = (std::f64::consts::PI * rho * rho).min(1.0) as f32;
                    clear[(vi * w + ui) as usize] *= 1.0 - a;
                }
                continue;
            }
            let extent = (rho + 0.5).ceil() as i64;
            for y in (vi - extent).max(0)..=(vi + extent).min(h - 1) {
                for x in (ui - extent).max(0)..=(ui + extent).min(w - 1) {
                    let dist = (x as f64 - u).hypot(y as f64 - v);
                    let a = (rho + 0.5 - dist).clamp(0.0, 1.0) as f32;
                    if a > 0.0 && on_stigma(x, y) {
                        clear[(y * w + x) as usize] *= 1.0 - a;
                    }
                }
            }
        }
        let pollen = f.colors.pollen.0;
        let raw = img.as_raw_mut();
        for (i, c) in clear.iter_mut().enumerate() {
            if *c < 1.0 {
                let a = 1.0 - f64::from(*c);
                for k in 0..3 {
                    let base = f64::from(raw[i * 3 + k]);
                    raw[i * 3 + k] = (base + a * (f64::from(pollen[k]) - base)).round() as u8;
                }
                *c = 1.0;
            }
        }
    }
}

/// Sharp render with pollen, plus the subject distance used for defocus.
pub fn render_microscope_sharp(
    scene: &PlantScene,
    cam: &CameraModel,
    cam_pose: &Pose6D,
    optics: &MicroscopeOptics,
) -> SharpMicroscopeView {
    let map = render_surfaces(scene, cam, cam_pose);
    let mut image = shade_map(scene, &map);
    splat_pollen(scene, cam, cam_pose, &map, &mut image, optics);
    let to_cam = cam_pose.inverse();
    let subject_distance = scene
        .flowers
        .iter()
        .map(|f| to_cam.transform_point(&(f.center + STIGMA_HEIGHT * f.normal)))
        .filter(|p| p.z > cam.near)
        .min_by(|a, b| {
            let ka = (a.x * a.x + a.y * a.y) / (a.z * a.z);
            let kb = (b.x * b.x + b.y * b.y) / (b.z * b.z);
            ka.total_cmp(&kb)
        })
        .map(|p| p.z);
    SharpMicroscopeView {
        image,
        subject_distance,
    }
}

/// Microscope image at the given zoom: sharp render blurred by
/// `k·|subject − focal(zoom)|` pixels.
pub fn render_microscope(
    scene: &PlantScene,
    cam: &CameraModel,
    cam_pose: &Pose6D,
    state: &MicroscopeState,
    optics: &MicroscopeOptics,
) -> Image {
    render_microscope_sharp(scene, cam, cam_pose, optics).focused(state, optics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_is_clamped() {
        let s = MicroscopeState::new(60.0, -1.0);
        assert_eq!((s.slide(), s.zoom()), (45.0, 0.0));
        assert_eq!(MicroscopeState::new(-3.0, 2.0).slide(), 0.0);
        assert!(MicroscopeState::new(1.0, 1.0).zoom_at_limit());
    }

    #[test]
    fn blur_radius_formula() {
        let o = MicroscopeOptics::default();
        assert_eq!(o.blur_radius(40.0, 50.0), 5.0);
        assert_eq!(o.blur_radius(50.0, 50.0), 0.0);
        assert_eq!(o.focal_distance(0.0), 5.0);
        assert_eq!(o.focal_distance(1.0), 60.0);
        assert!((o.focal_distance(o.zoom_for(33.0)) - 33.0).abs() < 1e-12);
    }
}
