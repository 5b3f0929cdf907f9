use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord};
use crate::global::Detection;
use crate::raster::{BoundingBox, DepthMap, Image, PointCloud};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Odd block side, px.
    pub block: u32,
    /// Largest disparity searched, px.
    pub search: u32,
    /// Matches below this normalized cross-correlation are rejected.
    pub min_ncc: f64,
    /// Blocks whose intensity standard deviation is below this are
    /// treated as textureless.
    pub min_texture: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            block: 7,
            search: 64,
            min_ncc: 0.7,
            min_texture: 2.0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.block % 2 == 0 || self.block < 3 {
            return Err(Error::Config("stereo: block must be odd and ≥ 3".into()));
        }
        if self.search == 0 || !(-1.0..=1.0).contains(&self.min_ncc) || !(self.min_texture >= 0.0) {
            return Err(Error::Config("stereo: search > 0, min_ncc in [−1, 1], min_texture ≥ 0".into()));
        }
        Ok(())
    }
}

/// Channel-sum intensity plus box sums for block statistics.
struct Plane {
    w: usize,
    h: usize,
    gray: Vec<f64>,
    /// Integral images of gray and gray², `(w+1)·(h+1)`.
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Plane {
    fn new(img: &Image) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let gray: Vec<f64> = img
            .as_raw()
            .chunks_exact(3)
            .map(|c| (f64::from(c[0]) + f64::from(c[1]) + f64::from(c[2])) / 3.0)
            .collect();
        let mut sum = vec![0.0; (w + 1) * (h + 1)];
        let mut sq = vec![0.0; (w + 1) * (h + 1)];
        for y in 0..h {
            let (mut rs, mut rq) = (0.0, 0.0);
            for x in 0..w {
                let g = gray[y * w + x];
                rs += g;
                rq += g * g;
                sum[(y + 1) * (w + 1) + x + 1] = sum[y * (w + 1) + x + 1] + rs;
                sq[(y + 1) * (w + 1) + x + 1] = sq[y * (w + 1) + x + 1] + rq;
            }
        }
        Self { w, h, gray, sum, sq }
    }

    /// Mean and standard deviation of the block centered at `(x, y)`.
    fn stats(&self, x: usize, y: usize, half: usize) -> (f64, f64) {
        let s = self.w + 1;
        let (x0, x1, y0, y1) = (x - half, x + half + 1, y - half, y + half + 1);
        let n = ((2 * half + 1) * (2 * half + 1)) as f64;
        let area = |t: &[f64]| t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
        let mean = area(&self.sum) / n;
        let var = (area(&self.sq) / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Depth from a rectified pair where view B sits `baseline` mm along `+x`
/// of view A, so a point at depth `z` appears `f·baseline/z` px further
/// left in B. Only pixels of `roi` are matched; the rest are no-return.
pub fn two_view_depth_roi(
    img_a: &Image,
    img_b: &Image,
    baseline: f64,
    cam: &CameraModel,
    params: &MatchParams,
    roi: &BoundingBox,
) -> Result<DepthMap> {
    params.validate()?;
    if img_a.width() != img_b.width() || img_a.height() != img_b.height() {
        return Err(Error::Domain("stereo images differ in size".into()));
    }
    if !(baseline > 0.0) {
        return Err(Error::Domain("baseline must be positive".into()));
    }
    let mut depth = DepthMap::empty(img_a.width(), img_a.height());
    let Some(roi) = roi.clipped(img_a.width(), img_a.height()) else {
        return Ok(depth);
    };
    let (a, b) = (Plane::new(img_a), Plane::new(img_b));
    let half = (params.block / 2) as usize;
    let search = params.search as usize;
    let n = ((2 * half + 1) * (2 * half + 1)) as f64;
    let (w, h) = (a.w, a.h);
    let mut scores = vec![f64::NEG_INFINITY; search + 1];

    for y in (roi.v_min as usize).max(half)..(roi.v_max as usize).min(h.saturating_sub(half)) {
        for x in (roi.u_min as usize).max(half)..(roi.u_max as usize).min(w.saturating_sub(half)) {
            let (ma, sa) = a.stats(x, y, half);
            if sa < params.min_texture {
                continue;
            }
            let max_d = search.min(x - half);
            let mut best = (f64::NEG_INFINITY, 0usize);
            #[allow(clippy::needless_range_loop)]
            for d in 0..=max_d {
                let (mb, sb) = b.stats(x - d, y, half);
                let score = if sb < 1e-9 {
                    f64::NEG_INFINITY
                } else {
                    let mut cross = 0.0;
                    for dy in 0..=2 * half {
                        let row = (y + dy - half) * w;
                        let ra = &a.gray[row + x - half..=row + x + half];
                        let rb = &b.gray[row + x - d - half..=row + x - d + half];
                        cross += ra.iter().zip(rb).map(|(p, q)| p * q).sum::<f64>();
                    }
                    (cross / n - ma * mb) / (sa * sb)
                };
                scores[d] = score;
                if score > best.0 {
                    best = (score, d);
                }
            }
            let (score, d) = best;
            if d == 0 || score < params.min_ncc {
                continue;
            }
            let mut disparity = d as f64;
            if d < max_d {
                let (l, c, r) = (scores[d - 1], scores[d], scores[d + 1]);
                let curv = l - 2.0 * c + r;
                if l.is_finite() && r.is_finite() && curv < 0.0 {
                    disparity += (0.5 * (l - r) / curv).clamp(-0.5, 0.5);
                }
            }
            let z = cam.fx * baseline / disparity;
            if z >= cam.near && z <= cam.far {
                depth.set(x as u32, y as u32, z);
            }
        }
    }
    Ok(depth)
}

/// Full-frame [`two_view_depth_roi`].
pub fn two_view_depth(
    img_a: &Image,
    img_b: &Image,
    baseline: f64,
    cam: &CameraModel,
    params: &MatchParams,
) -> Result<DepthMap> {
    two_view_depth_roi(img_a, img_b, baseline, cam, params, &BoundingBox::full(img_a.width(), img_a.height()))
}

/// Back-projects every finite depth inside the (clipped) detection box into
/// the camera frame named by the detection source.
pub fn extract_flower_cloud(depth: &DepthMap, det: &Detection, cam: &CameraModel) -> Result<PointCloud> {
    let b = det.bbox.clipped(depth.width(), depth.height()).ok_or(Error::EmptyCloud)?;
    let mut points = Vec::new();
    for y in b.v_min..b.v_max {
        for x in b.u_min..b.u_max {
            let z = depth.get(x, y);
            if DepthMap::is_return(z) {
                points.push(cam.backproject(PixelCoord::new(f64::from(x), f64::from(y)), z)?);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    PointCloud::new(points, det.source.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rgb8;

    fn cam(w: u32, h: u32) -> CameraModel {
        CameraModel::centered(500.0, w, h, 5.0, 2000.0).unwrap()
    }

    /// Random-dot pair with a uniform shift of `d` px.
    fn shifted_pair(w: u32, h: u32, d: u32) -> (Image, Image) {
        let pattern = |x: i64, y: i64| {
            let hsh = crate::rng::splitmix64((x as u64) << 32 ^ y as u64);
            (hsh % 200) as u8 + 20
        };
        let mut a = Image::filled(w, h, Rgb8::new(0, 0, 0));
        let mut b = a.clone();
        for y in 0..h {
            for x in 0..w {
                let g = pattern(i64::from(x), i64::from(y));
                a.set(x, y, Rgb8::new(g, g, g));
                let g = pattern(i64::from(x) + i64::from(d), i64::from(y));
                b.set(x, y, Rgb8::new(g, g, g));
            }
        }
        (a, b)
    }

    #[test]
    fn uniform_shift_recovers_depth() {
        let (a, b) = shifted_pair(160, 40, 25);
        let c = cam(160, 40);
        let depth = two_view_depth(&a, &b, 5.0, &c, &MatchParams::default()).unwrap();
        let mut matched = 0;
        for y in 3..37 {
            for x in 30..157 {
                let z = depth.get(x, y);
                if z.is_finite() {
                    assert!((z - 100.0).abs() < 2.0, "({x},{y}) {z}");
                    matched += 1;
                }
            }
        }
        assert!(matched > 3000, "{matched}");
    }

    #[test]
    fn identical_images_give_no_returns() {
        let (a, _) = shifted_pair(80, 30, 0);
        let depth = two_view_depth(&a, &a, 5.0, &cam(80, 30), &MatchParams::default()).unwrap();
        assert_eq!(depth.valid_count(), 0);
    }

    #[test]
    fn textureless_pixels_give_no_returns() {
        let a = Image::filled(50, 20, Rgb8::new(90, 90, 90));
        let depth = two_view_depth(&a, &a, 5.0, &cam(50, 20), &MatchParams::default()).unwrap();
        assert_eq!(depth.valid_count(), 0);
    }

    #[test]
    fn cloud_extraction_clips_and_rejects_empty() {
        let mut d = DepthMap::empty(10, 10);
        let det = |b| Detection {
            bbox: b,
            confidence: 1.0,
            source: "endoscope".into(),
        };
        assert!(matches!(
            extract_flower_cloud(&d, &det(BoundingBox::new(0, 0, 10, 10).unwrap()), &cam(10, 10)),
            Err(Error::EmptyCloud)
        ));
        d.set(9, 9, 50.0);
        let cloud = extract_flower_cloud(&d, &det(BoundingBox::new(5, 5, 40, 40).unwrap()), &cam(10, 10)).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.frame.as_str(), "endoscope");
        assert!((cloud.points[0].z - 50.0).abs() < 1e-12);
    }
}
