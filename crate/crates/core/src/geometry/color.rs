//! 8-bit RGB/HSV conversion.
//!
//! Hue uses the half-degree convention: `H ∈ [0, 180)`, so pure yellow is
//! 30 and pure green is 60. Saturation and value span `[0, 255]`. All
//! threshold bands in this crate (flower center, pollen filters) are written
//! on this scale; feeding them full-degree hues silently halves every band.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rgb8(pub [u8; 3]);

impl Rgb8 {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self([r, g, b])
    }

    /// Multiplies all channels by `factor`, rounding and saturating.
    pub fn scaled(self, factor: f64) -> Self {
        let f = |c: u8| (f64::from(c) * factor).round().clamp(0.0, 255.0) as u8;
        Self([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hsv8 {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

impl Hsv8 {
    pub const fn new(h: u8, s: u8, v: u8) -> Self {
        Self { h, s, v }
    }
}

/// Fixed-point RGB→HSV matching the usual 8-bit vision-library convention
/// (rounded saturation and half-degree hue, red wins ties, then green).
pub fn rgb_to_hsv(c: Rgb8) -> Hsv8 {
    let [r, g, b] = c.0.map(i32::from);
    let v = r.max(g).max(b);
    let min = r.min(g).min(b);
    let diff = v - min;
    let s = if v == 0 { 0 } else { (510 * diff + v) / (2 * v) };
    let h = if diff == 0 {
        0
    } else {
        let sector = if v == r {
            g - b
        } else if v == g {
            b - r + 2 * diff
        } else {
            r - g + 4 * diff
        };
        // floor(30 * sector / diff + 0.5)
        let h = (60 * sector + diff).div_euclid(2 * diff);
        if h < 0 {
            h + 180
        } else {
            h
        }
    };
    Hsv8::new(h as u8, s as u8, v as u8)
}

/// Inverse conversion, used to author colors from HSV specifications.
pub fn hsv_to_rgb(c: Hsv8) -> Rgb8 {
    let h = f64::from(c.h) * 2.0;
    let s = f64::from(c.s) / 255.0;
    let v = f64::from(c.v);
    let sector = (h / 60.0).floor();
    let f = h / 60.0 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    let q8 = |x: f64| x.round().clamp(0.0, 255.0) as u8;
    Rgb8::new(q8(r), q8(g), q8(b))
}

/// Inclusive per-channel HSV band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvRange {
    pub lower: [u8; 3],
    pub upper: [u8; 3],
}

impl HsvRange {
    pub const fn new(lower: [u8; 3], upper: [u8; 3]) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, c: Hsv8) -> bool {
        let x = [c.h, c.s, c.v];
        (0..3).all(|i| self.lower[i] <= x[i] && x[i] <= self.upper[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_colors() {
        assert_eq!(rgb_to_hsv(Rgb8::new(0, 0, 0)), Hsv8::new(0, 0, 0));
        assert_eq!(rgb_to_hsv(Rgb8::new(255, 0, 0)), Hsv8::new(0, 255, 255));
        assert_eq!(rgb_to_hsv(Rgb8::new(128, 128, 128)), Hsv8::new(0, 0, 128));
        assert_eq!(rgb_to_hsv(Rgb8::new(0, 255, 0)), Hsv8::new(60, 255, 255));
        assert_eq!(rgb_to_hsv(Rgb8::new(0, 0, 255)), Hsv8::new(120, 255, 255));
        assert_eq!(rgb_to_hsv(Rgb8::new(255, 255, 0)), Hsv8::new(30, 255, 255));
    }

    #[test]
    fn hue_wraps_below_zero() {
        // Red dominant with blue above green: negative sector wraps to the top.
        let hsv = rgb_to_hsv(Rgb8::new(255, 0, 100));
        assert!(hsv.h > 150 && hsv.h < 180);
    }

    #[test]
    fn hue_never_reaches_180_exhaustive_edges() {
        for r in (0..=255).step_by(5) {
            for g in (0..=255).step_by(5) {
                for b in (0..=255).step_by(5) {
                    let hsv = rgb_to_hsv(Rgb8::new(r as u8, g as u8, b as u8));
                    assert!(hsv.h < 180);
                    assert_eq!(hsv.v as i32, r.max(g).max(b));
                    if r == g && g == b {
                        assert_eq!(hsv.s, 0);
                    }
                }
            }
        }
    }

    #[test]
    fn hsv_round_trip_is_close() {
        for &(h, s, v) in &[(25u8, 230u8, 200u8), (15, 220, 200), (90, 50, 50), (160, 30, 240)] {
            let back = rgb_to_hsv(hsv_to_rgb(Hsv8::new(h, s, v)));
            assert!((i32::from(back.h) - i32::from(h)).abs() <= 1, "{back:?}");
            assert!((i32::from(back.s) - i32::from(s)).abs() <= 2, "{back:?}");
            assert_eq!(back.v, v);
        }
    }
}
