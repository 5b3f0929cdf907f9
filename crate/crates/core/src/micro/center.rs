use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HsvRange, PixelCoord};
use crate::imgproc::{connected_components, hsv_mask};
use crate::raster::{BoundingBox, Image};

/// Yellow stigma band.
pub const STIGMA_BAND: HsvRange = HsvRange::new([20, 215, 100], [30, 255, 245]);
/// Smallest stigma component accepted, px.
pub const MIN_STIGMA_PIXELS: u64 = 10;

/// Moment ellipse of the stigma blob. `a` and `b` are the semi-axes of the
/// uniform ellipse with the same second moments; `orientation` is the angle
/// of the major axis from image `+u`, radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center: PixelCoord,
    pub a: f64,
    pub b: f64,
    pub orientation: f64,
    pub pixel_count: u64,
    pub bbox: BoundingBox,
}

/// Largest stigma-colored component (first in raster order on ties) and
/// its moment ellipse. Each pixel counts as a unit square, which adds
/// `1/12` to both variances.
pub fn find_flower_center(img: &Image) -> Result<EllipseFit> {
    let mask = hsv_mask(img, |c| STIGMA_BAND.contains(c));
    let best = connected_components(&mask)
        .into_iter()
        .fold(None, |best: Option<crate::imgproc::Component>, c| match best {
            Some(b) if b.area >= c.area => Some(b),
            _ => Some(c),
        })
        .filter(|c| c.area >= MIN_STIGMA_PIXELS)
        .ok_or(Error::CenterNotFound)?;
    let [cuu, cuv, cvv] = best.covariance();
    let (cuu, cvv) = (cuu + 1.0 / 12.0, cvv + 1.0 / 12.0);
    let mean = 0.5 * (cuu + cvv);
    let spread = (0.25 * (cuu - cvv).powi(2) + cuv * cuv).sqrt();
    let (l1, l2) = (mean + spread, (mean - spread).max(1.0 / 12.0));
    Ok(EllipseFit {
        center: best.centroid(),
        a: 2.0 * l1.sqrt(),
        b: 2.0 * l2.sqrt(),
        orientation: 0.5 * (2.0 * cuv).atan2(cuu - cvv),
        pixel_count: best.area,
        bbox: best.bbox,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rgb8;

    const STIGMA: Rgb8 = Rgb8::new(200, 169, 16);

    fn paint_ellipse(img: &mut Image, cu: f64, cv: f64, a: f64, b: f64, theta: f64) {
        let (s, c) = theta.sin_cos();
        for y in 0..img.height() {
            for x in 0..img.width() {
                let (du, dv) = (x as f64 - cu, y as f64 - cv);
                let (p, q) = (c * du + s * dv, -s * du + c * dv);
                if (p / a).powi(2) + (q / b).powi(2) <= 1.0 {
                    img.set(x, y, STIGMA);
                }
            }
        }
    }

    #[test]
    fn disk_center_and_radius() {
        let mut img = Image::filled(200, 150, Rgb8::new(240, 215, 232));
        paint_ellipse(&mut img, 90.0, 70.0, 30.0, 30.0, 0.0);
        let e = find_flower_center(&img).unwrap();
        assert!(e.center.distance(&PixelCoord::new(90.0, 70.0)) < 1e-9);
        assert!((e.a - 30.0).abs() < 0.3 && (e.b - 30.0).abs() < 0.3);
        assert!(e.a >= e.b && e.b > 0.0);
    }

    #[test]
    fn tilted_ellipse_axes_and_orientation() {
        let mut img = Image::filled(200, 150, Rgb8::new(10, 90, 20));
        paint_ellipse(&mut img, 100.5, 75.0, 40.0, 15.0, 0.5);
        let e = find_flower_center(&img).unwrap();
        assert!((e.a - 40.0).abs() < 0.5 && (e.b - 15.0).abs() < 0.5);
        assert!((e.orientation - 0.5).abs() < 0.01);
    }

    #[test]
    fn largest_component_wins() {
        let mut img = Image::filled(200, 150, Rgb8::new(0, 0, 0));
        paint_ellipse(&mut img, 30.0, 30.0, 5.0, 5.0, 0.0);
        paint_ellipse(&mut img, 150.0, 100.0, 12.0, 12.0, 0.0);
        let e = find_flower_center(&img).unwrap();
        assert!(e.center.distance(&PixelCoord::new(150.0, 100.0)) < 1e-9);
    }

    #[test]
    fn tiny_or_missing_blob_is_an_error() {
        let mut img = Image::filled(50, 50, Rgb8::new(0, 0, 0));
        assert!(matches!(find_flower_center(&img), Err(Error::CenterNotFound)));
        for x in 0..9 {
            img.set(x, 3, STIGMA);
        }
        assert!(matches!(find_flower_center(&img), Err(Error::CenterNotFound)));
        img.set(9, 3, STIGMA);
        let e = find_flower_center(&img).unwrap();
        assert!(e.b > 0.0 && e.a > e.b);
    }
}
