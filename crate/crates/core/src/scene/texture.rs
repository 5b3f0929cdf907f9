//! Procedural surface texture: multi-octave value noise evaluated in surface
//! coordinates (mm), so every camera sees the same pattern on a surface.
//! Octaves finer than about two pixels are faded out using the pixel
//! footprint, which keeps low-magnification views free of aliasing noise.

use crate::rng::{splitmix64, unit_f64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Octave {
    /// Lattice spacing, mm.
    pub wavelength: f64,
    pub amplitude: f64,
}

pub const PETAL: &[Octave] = &[
    Octave { wavelength: 1.6, amplitude: 0.45 },
    Octave { wavelength: 0.7, amplitude: 0.35 },
    Octave { wavelength: 0.25, amplitude: 0.2 },
];

pub const ANTHER: &[Octave] = &[
    Octave { wavelength: 1.0, amplitude: 0.4 },
    Octave { wavelength: 0.35, amplitude: 0.35 },
    Octave { wavelength: 0.1, amplitude: 0.25 },
];

pub const STIGMA: &[Octave] = &[
    Octave { wavelength: 1.5, amplitude: 0.3 },
    Octave { wavelength: 0.5, amplitude: 0.25 },
    Octave { wavelength: 0.15, amplitude: 0.25 },
    Octave { wavelength: 0.045, amplitude: 0.2 },
];

#[inline]
fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let key = (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    let h = splitmix64(seed ^ key);
    2.0 * unit_f64(h) - 1.0
}

#[inline]
fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise in `[-1, 1]` on a unit lattice.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (smooth(x - fx), smooth(y - fy));
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Weighted octave sum normalized to `[-1, 1]`. `footprint` is the surface
/// size of one pixel in mm.
pub fn fbm(seed: u64, x: f64, y: f64, octaves: &[Octave], footprint: f64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    for (k, o) in octaves.iter().enumerate() {
        norm += o.amplitude;
        let px_per_cell = o.wavelength / footprint.max(1e-12);
        let fade = ((px_per_cell - 1.5) / 1.5).clamp(0.0, 1.0);
        if fade == 0.0 {
            continue;
        }
        let s = splitmix64(seed.wrapping_add(k as u64));
        sum += fade * o.amplitude * value_noise(s, x / o.wavelength, y / o.wavelength);
    }
    if norm > 0.0 {
        sum / norm
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_bounded_and_continuous() {
        for i in 0..2000 {
            let x = i as f64 * 0.173 - 50.0;
            let y = i as f64 * 0.091 + 3.0;
            let v = value_noise(9, x, y);
            assert!((-1.0..=1.0).contains(&v));
            assert!((value_noise(9, x + 1e-7, y) - v).abs() < 1e-5);
        }
        assert_eq!(value_noise(4, 2.0, 3.0), lattice(4, 2, 3));
    }

    #[test]
    fn coarse_footprint_suppresses_fine_octaves() {
        let fine = fbm(1, 0.37, 0.81, STIGMA, 0.001);
        let coarse = fbm(1, 0.37, 0.81, STIGMA, 100.0);
        assert_eq!(coarse, 0.0);
        assert!(fine != 0.0);
    }
}
