use serde::{Deserialize, Serialize};

use super::{BuzzModel, PetalShape};
use crate::error::{Error, Result};
use crate::geometry::Rgb8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneColors {
    pub background: Rgb8,
    pub petal: Rgb8,
    pub stigma: Rgb8,
    pub anther: Rgb8,
    pub pollen: Rgb8,
    pub stem: Rgb8,
    pub leaf: Rgb8,
}

impl Default for SceneColors {
    fn default() -> Self {
        Self {
            background: Rgb8::new(30, 45, 60),
            petal: Rgb8::new(240, 215, 232),
            stigma: Rgb8::new(200, 169, 16),
            anther: Rgb8::new(200, 110, 20),
            pollen: Rgb8::new(245, 240, 215),
            stem: Rgb8::new(70, 120, 50),
            leaf: Rgb8::new(50, 110, 40),
        }
    }
}

/// Parameters of the plant generator. Ranges are inclusive `[min, max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub n_flowers: usize,
    /// Center of the placement box, base frame, mm.
    pub region_center: [f64; 3],
    pub region_half_extent: [f64; 3],
    /// Point the flowers broadly face (the wide-view camera).
    pub viewpoint: [f64; 3],
    pub min_spacing: f64,
    pub petal_radius: [f64; 2],
    pub stigma_radius: [f64; 2],
    pub anther_radius: [f64; 2],
    pub petal_shape: PetalShape,
    /// Maximum tilt of the flower normal away from the viewpoint direction.
    pub max_tilt_deg: f64,
    pub stem_length: [f64; 2],
    pub stem_max_angle_deg: f64,
    pub stem_radius: f64,
    pub anther_pollen: [u64; 2],
    pub initial_stigma_pollen: u64,
    pub n_leaves: usize,
    pub leaf_radius: [f64; 2],
    /// Leaves sit behind the flower region by this much along +x, mm.
    pub leaf_setback: [f64; 2],
    pub buzz: BuzzModel,
    pub colors: SceneColors,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_flowers: 5,
            region_center: [1000.0, 0.0, 500.0],
            region_half_extent: [40.0, 200.0, 150.0],
            viewpoint: [0.0, 0.0, 500.0],
            min_spacing: 20.0,
            petal_radius: [11.0, 17.0],
            stigma_radius: [3.5, 4.5],
            anther_radius: [5.0, 6.5],
            petal_shape: PetalShape::Lobed,
            max_tilt_deg: 30.0,
            stem_length: [40.0, 80.0],
            stem_max_angle_deg: 45.0,
            stem_radius: 1.5,
            anther_pollen: [200_000, 200_000],
            initial_stigma_pollen: 1_000,
            n_leaves: 3,
            leaf_radius: [30.0, 60.0],
            leaf_setback: [100.0, 200.0],
            buzz: BuzzModel::default(),
            colors: SceneColors::default(),
            max_attempts: 10_000,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!("{name}: empty range {r:?}")));
    }
    if positive && !(r[0] > 0.0) {
        return Err(Error::Config(format!("{name}: values must be positive")));
    }
    Ok(())
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("petal_radius", self.petal_radius, true)?;
        check_range("stigma_radius", self.stigma_radius, true)?;
        check_range("anther_radius", self.anther_radius, true)?;
        check_range("stem_length", self.stem_length, true)?;
        check_range("leaf_radius", self.leaf_radius, true)?;
        check_range("leaf_setback", self.leaf_setback, false)?;
        if self.anther_pollen[0] > self.anther_pollen[1] {
            return Err(Error::Config("anther_pollen: empty range".into()));
        }
        if self.stigma_radius[1] >= self.anther_radius[0] {
            return Err(Error::Config("stigma must be smaller than the anther ring".into()));
        }
        if self.anther_radius[1] >= self.petal_radius[0] {
            return Err(Error::Config("anther ring must be smaller than the petals".into()));
        }
        if self.region_half_extent.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::Config("region_half_extent must be non-negative".into()));
        }
        if !(self.min_spacing >= 0.0) || !(self.stem_radius > 0.0) {
            return Err(Error::Config("min_spacing and stem_radius out of range".into()));
        }
        if !(0.0..=90.0).contains(&self.max_tilt_deg) || !(0.0..=90.0).contains(&self.stem_max_angle_deg) {
            return Err(Error::Config("angles must lie in [0, 90] degrees".into()));
        }
        self.buzz.validate()
    }
}
