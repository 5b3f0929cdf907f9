//! Images, depth maps, point clouds and their on-disk formats.
//!
//! Color images are binary PPM (`P6`, maxval 255). Depth maps are 16-bit
//! binary PGM (`P5`, maxval 65535, big-endian) holding millimeters rounded to
//! the nearest integer, with 0 meaning "no return". Point clouds dump as
//! ASCII `x y z` lines.

use std::io::{BufRead, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame, PixelCoord, Point3, Pose6D, Rgb8};

/// Pixel rectangle `[u_min, u_max) × [v_min, v_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BoundingBox {
    pub fn new(u_min: u32, v_min: u32, u_max: u32, v_max: u32) -> Result<Self> {
        if u_min >= u_max || v_min >= v_max {
            return Err(Error::Domain(format!(
                "empty box [{u_min},{u_max})×[{v_min},{v_max})"
            )));
        }
        Ok(Self {
            u_min,
            v_min,
            u_max,
            v_max,
        })
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            u_min: 0,
            v_min: 0,
            u_max: width,
            v_max: height,
        }
    }

    pub fn width(&self) -> u32 {
        self.u_max.saturating_sub(self.u_min)
    }

    pub fn height(&self) -> u32 {
        self.v_max.saturating_sub(self.v_min)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Center in pixel-center coordinates.
    pub fn center(&self) -> PixelCoord {
        PixelCoord::new(
            (f64::from(self.u_min) + f64::from(self.u_max) - 1.0) / 2.0,
            (f64::from(self.v_min) + f64::from(self.v_max) - 1.0) / 2.0,
        )
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width()).hypot(f64::from(self.height()))
    }

    pub fn contains(&self, px: &PixelCoord) -> bool {
        px.u >= f64::from(self.u_min) - 0.5
            && px.u < f64::from(self.u_max) - 0.5
            && px.v >= f64::from(self.v_min) - 0.5
            && px.v < f64::from(self.v_max) - 0.5
    }

    /// Intersection with a `width × height` image; `None` if nothing remains.
    pub fn clipped(&self, width: u32, height: u32) -> Option<Self> {
        let b = Self {
            u_min: self.u_min.min(width),
            v_min: self.v_min.min(height),
            u_max: self.u_max.min(width),
            v_max: self.v_max.min(height),
        };
        (b.u_min < b.u_max && b.v_min < b.v_max).then_some(b)
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.u_max <= width && self.v_max <= height && self.u_min < self.u_max && self.v_min < self.v_max
    }
}

/// 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: Rgb8) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&color.0);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidRaster(format!(
                "expected {} bytes for {width}×{height}, got {}",
                width as usize * height as usize * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb8 {
        let o = self.offset(x, y);
        Rgb8([self.data[o], self.data[o + 1], self.data[o + 2]])
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgb8) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&c.0);
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb8> + '_ {
        self.data.chunks_exact(3).map(|c| Rgb8([c[0], c[1], c[2]]))
    }

    pub fn crop(&self, roi: &BoundingBox) -> Result<Image> {
        if !roi.fits(self.width, self.height) {
            return Err(Error::Domain("crop outside image".into()));
        }
        let mut data = Vec::with_capacity(roi.area() as usize * 3);
        for y in roi.v_min..roi.v_max {
            let a = self.offset(roi.u_min, y);
            let b = self.offset(roi.u_max - 1, y) + 3;
            data.extend_from_slice(&self.data[a..b]);
        }
        Image::from_raw(roi.width(), roi.height(), data)
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_ppm<R: BufRead>(mut r: R) -> Result<Image> {
        let (magic, width, height, maxval) = read_pnm_header(&mut r)?;
        if magic != "P6" {
            return Err(Error::Format(format!("expected P6, found {magic}")));
        }
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported maxval {maxval}")));
        }
        let mut data = vec![0u8; width as usize * height as usize * 3];
        r.read_exact(&mut data)?;
        Image::from_raw(width, height, data)
    }

    pub fn save_ppm(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_ppm(std::io::BufWriter::new(f))
    }

    pub fn load_ppm(path: impl AsRef<std::path::Path>) -> Result<Image> {
        let f = std::fs::File::open(path)?;
        Image::read_ppm(std::io::BufReader::new(f))
    }
}

/// Per-pixel z-depth in millimeters. Pixels without a surface hold
/// [`DepthMap::NO_RETURN`] (positive infinity).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub const NO_RETURN: f64 = f64::INFINITY;

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![Self::NO_RETURN; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidRaster("depth length mismatch".into()));
        }
        if data.iter().any(|d| d.is_nan() || *d <= 0.0) {
            return Err(Error::InvalidRaster("depth values must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_raw(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, d: f64) {
        debug_assert!(!d.is_nan() && d > 0.0);
        self.data[y as usize * self.width as usize + x as usize] = d;
    }

    pub fn is_return(d: f64) -> bool {
        d.is_finite()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }

    pub fn write_pgm16<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &d in &self.data {
            let mm: u16 = if d.is_finite() {
                d.round().clamp(1.0, 65535.0) as u16
            } else {
                0
            };
            buf.extend_from_slice(&mm.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_pgm16<R: BufRead>(mut r: R) -> Result<DepthMap> {
        let (magic, width, height, maxval) = read_pnm_header(&mut r)?;
        if magic != "P5" {
            return Err(Error::Format(format!("expected P5, found {magic}")));
        }
        if maxval != 65535 {
            return Err(Error::Format(format!("expected 16-bit maxval, found {maxval}")));
        }
        let mut buf = vec![0u8; width as usize * height as usize * 2];
        r.read_exact(&mut buf)?;
        let data = buf
            .chunks_exact(2)
            .map(|b| match u16::from_be_bytes([b[0], b[1]]) {
                0 => Self::NO_RETURN,
                mm => f64::from(mm),
            })
            .collect();
        DepthMap::from_raw(width, height, data)
    }

    pub fn save_pgm16(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_pgm16(std::io::BufWriter::new(f))
    }
}

fn read_pnm_header<R: BufRead>(r: &mut R) -> Result<(String, u32, u32, u32)> {
    let mut tokens: Vec<String> = Vec::with_capacity(4);
    let mut token = String::new();
    let mut in_comment = false;
    while tokens.len() < 4 {
        let mut byte = [0u8; 1];
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("truncated header".into()));
        }
        let c = byte[0] as char;
        if in_comment {
            in_comment = c != '\n';
            continue;
        }
        if c == '#' {
            in_comment = true;
        } else if c.is_ascii_whitespace() {
            if !token.is_empty() {
                tokens.push(std::mem::take(&mut token));
            }
        } else {
            token.push(c);
        }
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| Error::Format(format!("bad header field `{s}`")))
    };
    Ok((tokens[0].clone(), num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?))
}

/// 3-D points (mm) expressed in a named frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, frame: impl Into<Frame>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Domain("point cloud coordinates must be finite".into()));
        }
        Ok(Self {
            points,
            frame: frame.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// Re-expresses the cloud through `pose`, whose child must be this frame.
    pub fn transformed(&self, pose: &Pose6D) -> Result<PointCloud> {
        if pose.child() != &self.frame {
            return Err(Error::FrameMismatch {
                left: pose.child().to_string(),
                right: self.frame.to_string(),
            });
        }
        Ok(PointCloud {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            frame: pose.parent().clone(),
        })
    }

    pub fn write_xyz<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.points {
            writeln!(w, "{:.4} {:.4} {:.4}", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn read_xyz<R: BufRead>(r: R, frame: impl Into<Frame>) -> Result<PointCloud> {
        let mut points = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Format(format!("bad xyz `{t}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(Error::Format(format!("expected 3 values, got `{line}`")));
            }
            points.push(Vector3::new(vals[0], vals[1], vals[2]));
        }
        PointCloud::new(points, frame)
    }
}
