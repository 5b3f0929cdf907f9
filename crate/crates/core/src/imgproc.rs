//! Binary masks, connected components and the defocus disk blur.

use crate::geometry::{rgb_to_hsv, Hsv8, PixelCoord, Rgb8};
use crate::raster::{BoundingBox, Image};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.data[y as usize * self.width as usize + x as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }
}

/// Evaluates an HSV predicate per pixel. Consecutive identical pixels reuse
/// the previous verdict, which makes flat backgrounds nearly free.
pub fn hsv_mask(img: &Image, pred: impl Fn(Hsv8) -> bool) -> Mask {
    let mut mask = Mask::new(img.width(), img.height());
    let mut last: Option<(Rgb8, bool)> = None;
    for (i, px) in img.pixels().enumerate() {
        let hit = match last {
            Some((c, v)) if c == px => v,
            _ => {
                let v = pred(rgb_to_hsv(px));
                last = Some((px, v));
                v
            }
        };
        mask.data[i] = hit;
    }
    mask
}

/// 8-connected component with exact integer raw moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub area: u64,
    pub bbox: BoundingBox,
    sum_u: i64,
    sum_v: i64,
    sum_uu: i64,
    sum_uv: i64,
    sum_vv: i64,
}

impl Component {
    pub fn centroid(&self) -> PixelCoord {
        let n = self.area as f64;
        PixelCoord::new(self.sum_u as f64 / n, self.sum_v as f64 / n)
    }

    /// Population covariance `[[σuu, σuv], [σuv, σvv]]` of pixel centers.
    pub fn covariance(&self) -> [f64; 3] {
        let n = self.area as i128;
        let (su, sv) = (self.sum_u as i128, self.sum_v as i128);
        let nn = (n * n) as f64;
        let cuu = (n * self.sum_uu as i128 - su * su) as f64 / nn;
        let cuv = (n * self.sum_uv as i128 - su * sv) as f64 / nn;
        let cvv = (n * self.sum_vv as i128 - sv * sv) as f64 / nn;
        [cuu, cuv, cvv]
    }

    /// Filled fraction of the bounding box.
    pub fn fill_ratio(&self) -> f64 {
        self.area as f64 / self.bbox.area() as f64
    }
}

/// Components in raster order of their first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; mask.data.len()];
    let mut out = Vec::new();
    let mut stack: Vec<(i64, i64)> = Vec::new();
    for start in 0..mask.data.len() {
        if !mask.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push((start as i64 % w, start as i64 / w));
        let mut c = Component {
            area: 0,
            bbox: BoundingBox {
                u_min: u32::MAX,
                v_min: u32::MAX,
                u_max: 0,
                v_max: 0,
            },
            sum_u: 0,
            sum_v: 0,
            sum_uu: 0,
            sum_uv: 0,
            sum_vv: 0,
        };
        while let Some((x, y)) = stack.pop() {
            c.area += 1;
            c.sum_u += x;
            c.sum_v += y;
            c.sum_uu += x * x;
            c.sum_uv += x * y;
            c.sum_vv += y * y;
            c.bbox.u_min = c.bbox.u_min.min(x as u32);
            c.bbox.v_min = c.bbox.v_min.min(y as u32);
            c.bbox.u_max = c.bbox.u_max.max(x as u32 + 1);
            c.bbox.v_max = c.bbox.v_max.max(y as u32 + 1);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.data[j] && !seen[j] {
                        seen[j] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        out.push(c);
    }
    out
}

/// One kernel row of an anti-aliased disk: a full-weight span `|dx| ≤ full`
/// plus symmetric fractional taps beyond it.
struct KernelRow {
    dy: i64,
    full: i64,
    partial: Vec<(i64, f64)>,
}

fn disk_kernel(radius: f64) -> (Vec<KernelRow>, f64, i64) {
    let reach = (radius + 0.5).ceil() as i64;
    let mut rows = Vec::new();
    let mut total = 0.0;
    for dy in -reach..=reach {
        let mut full = -1;
        let mut partial = Vec::new();
        for dx in 0..=reach {
            let w = (radius + 0.5 - ((dx * dx + dy * dy) as f64).sqrt()).clamp(0.0, 1.0);
            if w >= 1.0 && full == dx - 1 {
                full = dx;
            } else if w > 0.0 {
                partial.push((dx, w));
            }
        }
        if full < 0 && partial.is_empty() {
            continue;
        }
        total += (2 * full + 1).max(0) as f64;
        for &(dx, w) in &partial {
            total += if dx == 0 { w } else { 2.0 * w };
        }
        rows.push(KernelRow { dy, full, partial });
    }
    (rows, total, reach)
}

/// Uniform disk blur with anti-aliased rim and replicated borders. Radii
/// below half a pixel return the input unchanged.
pub fn disk_blur(img: &Image, radius: f64) -> Image {
    if !(radius >= 0.5) {
        return img.clone();
    }
    let (rows, total, reach) = disk_kernel(radius);
    let w = img.width() as usize;
    let h = img.height() as i64;
    let reach_u = reach as usize;
    let ext = w + 2 * reach_u;
    let src = img.as_raw();

    // Per row: replicated samples and prefix sums, channels interleaved.
    let mut samples = vec![0u32; h as usize * ext * 3];
    let mut prefix = vec![0u32; h as usize * (ext + 1) * 3];
    for y in 0..h as usize {
        let s_row = &mut samples[y * ext * 3..(y + 1) * ext * 3];
        let p_row = &mut prefix[y * (ext + 1) * 3..(y + 1) * (ext + 1) * 3];
        let mut acc = [0u32; 3];
        for i in 0..ext {
            let x = (i as i64 - reach).clamp(0, w as i64 - 1) as usize;
            for c in 0..3 {
                let val = u32::from(src[(y * w + x) * 3 + c]);
                s_row[i * 3 + c] = val;
                p_row[i * 3 + c] = acc[c];
                acc[c] += val;
            }
        }
        p_row[ext * 3..].copy_from_slice(&acc);
    }

    let n = w * 3;
    let mut out = vec![0u8; src.len()];
    let mut whole = vec![0u32; n];
    let mut frac = vec![0f32; n];
    let inv = 1.0 / total;
    for y in 0..h {
        whole.fill(0);
        frac.fill(0.0);
        for row in &rows {
            let yy = (y + row.dy).clamp(0, h - 1) as usize;
            let s_row = &samples[yy * ext * 3..(yy + 1) * ext * 3];
            if row.full >= 0 {
                let p_row = &prefix[yy * (ext + 1) * 3..(yy + 1) * (ext + 1) * 3];
                let hi = &p_row[(reach + row.full + 1) as usize * 3..][..n];
                let lo = &p_row[(reach - row.full) as usize * 3..][..n];
                for ((acc, &b), &a) in whole.iter_mut().zip(hi).zip(lo) {
                    *acc += b - a;
                }
            }
            for &(dx, wt) in &row.partial {
                let wt = wt as f32;
                if dx == 0 {
                    for (acc, &v) in frac.iter_mut().zip(&s_row[reach_u * 3..][..n]) {
                        *acc += wt * v as f32;
                    }
                } else {
                    let left = &s_row[(reach - dx) as usize * 3..][..n];
                    let right = &s_row[(reach + dx) as usize * 3..][..n];
                    for ((acc, &l), &r) in frac.iter_mut().zip(left).zip(right) {
                        *acc += wt * (l + r) as f32;
                    }
                }
            }
        }
        let o = &mut out[y as usize * n..(y as usize + 1) * n];
        for ((dst, &a), &f) in o.iter_mut().zip(&whole).zip(&frac) {
            *dst = ((f64::from(a) + f64::from(f)) * inv).round().clamp(0.0, 255.0) as u8;
        }
    }
    Image::from_raw(img.width(), img.height(), out).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> Mask {
        let mut m = Mask::new(rows[0].len() as u32, rows.len() as u32);
        for (y, r) in rows.iter().enumerate() {
            for (x, ch) in r.chars().enumerate() {
                m.set(x as u32, y as u32, ch == '#');
            }
        }
        m
    }

    #[test]
    fn diagonal_pixels_join_under_8_connectivity() {
        let m = mask_from(&["#..", ".#.", "..#", "...", "##."]);
        let cc = connected_components(&m);
        assert_eq!(cc.len(), 2);
        assert_eq!(cc[0].area, 3);
        assert_eq!(cc[0].bbox, BoundingBox::new(0, 0, 3, 3).unwrap());
        assert_eq!(cc[1].area, 2);
        assert_eq!(cc[1].centroid(), PixelCoord::new(0.5, 4.0));
    }

    #[test]
    fn moments_of_a_row() {
        let m = mask_from(&["####"]);
        let c = &connected_components(&m)[0];
        let [cuu, cuv, cvv] = c.covariance();
        assert!((cuu - 1.25).abs() < 1e-12);
        assert_eq!((cuv, cvv), (0.0, 0.0));
        assert_eq!(c.fill_ratio(), 1.0);
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = Image::filled(20, 15, Rgb8::new(10, 200, 77));
        for r in [0.0, 0.7, 3.0, 9.5] {
            assert_eq!(disk_blur(&img, r), img);
        }
    }

    #[test]
    fn blur_kernel_matches_direct_convolution() {
        let mut img = Image::filled(31, 23, Rgb8::new(0, 0, 0));
        for y in 0..23 {
            for x in 0..31 {
                let v = ((x * 37 + y * 91) % 251) as u8;
                img.set(x, y, Rgb8::new(v, 255 - v, v / 2));
            }
        }
        let r = 3.3;
        let blurred = disk_blur(&img, r);
        let reach = 4i64;
        for &(x, y) in &[(0i64, 0i64), (15, 11), (30, 22), (7, 20)] {
            for c in 0..3 {
                let (mut s, mut t) = (0.0, 0.0);
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let wt = (r + 0.5 - ((dx * dx + dy * dy) as f64).sqrt()).clamp(0.0, 1.0);
                        let xx = (x + dx).clamp(0, 30) as u32;
                        let yy = (y + dy).clamp(0, 22) as u32;
                        s += wt * f64::from(img.get(xx, yy).0[c]);
                        t += wt;
                    }
                }
                let expect = (s / t).round() as u8;
                assert_eq!(blurred.get(x as u32, y as u32).0[c], expect);
            }
        }
    }

    #[test]
    fn hsv_mask_cache_does_not_leak_between_colors() {
        let mut img = Image::filled(4, 1, Rgb8::new(255, 0, 0));
        img.set(2, 0, Rgb8::new(0, 0, 255));
        let m = hsv_mask(&img, |c| c.h < 10);
        assert_eq!(m.as_slice(), &[true, true, false, true]);
    }
}
