use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rgb_to_hsv, HsvRange};
use crate::raster::Image;
use crate::scene::{apply_buzz, PlantScene};

/// Saturated flower tissue (stigma and anthers).
pub const TISSUE_BAND: HsvRange = HsvRange::new([0, 170, 0], [45, 255, 255]);
/// Pale pollen.
pub const POLLEN_BAND: HsvRange = HsvRange::new([0, 0, 154], [62, 168, 255]);

/// How the first band is used.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TissueFilter {
    /// Pixels inside the first band are discarded before counting.
    #[default]
    Remove,
    /// Only pixels inside the first band are counted. With the default
    /// bands the two saturation ranges do not overlap, so this counts zero.
    Keep,
}

/// Pollen-colored pixels after discarding saturated tissue.
pub fn count_pollen(img: &Image) -> u64 {
    count_pollen_with(img, TissueFilter::Remove)
}

pub fn count_pollen_with(img: &Image, filter: TissueFilter) -> u64 {
    img.pixels()
        .map(rgb_to_hsv)
        .filter(|&c| {
            let tissue = TISSUE_BAND.contains(c);
            let keep = match filter {
                TissueFilter::Remove => !tissue,
                TissueFilter::Keep => tissue,
            };
            keep && POLLEN_BAND.contains(c)
        })
        .count() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PollinationParams {
    /// Pixel count above which a stigma is classified as pollinated.
    pub threshold: u64,
    pub buzz_duration: f64,
    pub max_buzzes: usize,
}

impl Default for PollinationParams {
    fn default() -> Self {
        Self {
            threshold: 50_000,
            buzz_duration: 10.0,
            max_buzzes: 5,
        }
    }
}

impl PollinationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.buzz_duration > 0.0 && self.buzz_duration.is_finite()) {
            return Err(Error::Config("pollination: buzz_duration must be positive".into()));
        }
        Ok(())
    }
}

/// One microscope inspection of a stigma.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InspectionResult {
    pub count: u64,
    pub focus_score: f64,
    pub pollinated: bool,
    /// Buzzes applied before this inspection.
    pub buzzes_before: usize,
    /// Stigma pollen particles at inspection time.
    pub true_stigma_pollen: u64,
    #[serde(skip)]
    pub image: Option<Image>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PollinationOutcome {
    pub inspections: Vec<InspectionResult>,
    pub buzzes: usize,
    /// The last inspection classified the stigma as pollinated.
    pub pollinated: bool,
}

/// Inspect, buzz while the count stays at or below the threshold, and
/// inspect again, up to `max_buzzes` buzzes. `inspect` returns the
/// microscope image and its focus score for the current scene state.
pub fn pollination_loop<F>(
    scene: &mut PlantScene,
    flower_id: usize,
    params: &PollinationParams,
    mut inspect: F,
) -> Result<PollinationOutcome>
where
    F: FnMut(&PlantScene) -> Result<(Image, f64)>,
{
    params.validate()?;
    let mut inspections = Vec::new();
    let mut buzzes = 0;
    loop {
        let (image, focus_score) = inspect(scene)?;
        let count = count_pollen(&image);
        let pollinated = count > params.threshold;
        inspections.push(InspectionResult {
            count,
            focus_score,
            pollinated,
            buzzes_before: buzzes,
            true_stigma_pollen: scene.flower(flower_id)?.pollen.stigma,
            image: Some(image),
        });
        if pollinated || buzzes >= params.max_buzzes {
            return Ok(PollinationOutcome {
                inspections,
                buzzes,
                pollinated,
            });
        }
        apply_buzz(scene, flower_id, params.buzz_duration)?;
        buzzes += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rgb8;
    use crate::scene::{generate_scene, SceneConfig};

    #[test]
    fn bands_separate_scene_colors() {
        let mut img = Image::filled(4, 1, Rgb8::new(245, 240, 215));
        img.set(1, 0, Rgb8::new(200, 169, 16));
        img.set(2, 0, Rgb8::new(200, 110, 20));
        img.set(3, 0, Rgb8::new(240, 215, 232));
        assert_eq!(count_pollen(&img), 1);
        assert_eq!(count_pollen_with(&img, TissueFilter::Keep), 0);
    }

    fn fake_inspect(per_grain: f64) -> impl FnMut(&PlantScene) -> Result<(Image, f64)> {
        move |s: &PlantScene| {
            let n = (s.flowers[0].pollen.stigma as f64 * per_grain) as u32;
            let mut img = Image::filled(1000, 1000, Rgb8::new(200, 169, 16));
            for i in 0..n.min(1_000_000) {
                img.set(i % 1000, i / 1000, Rgb8::new(245, 240, 215));
            }
            Ok((img, 100.0))
        }
    }

    #[test]
    fn already_pollinated_stops_after_first_inspection() {
        let mut scene = generate_scene(&SceneConfig::default(), 1).unwrap();
        scene.flowers[0].pollen.stigma = 90_000;
        let out = pollination_loop(&mut scene, 0, &PollinationParams::default(), fake_inspect(1.0)).unwrap();
        assert_eq!((out.inspections.len(), out.buzzes), (1, 0));
        assert!(out.pollinated);
    }

    #[test]
    fn fresh_flower_needs_one_buzz_and_bad_one_gives_up() {
        let mut scene = generate_scene(&SceneConfig::default(), 1).unwrap();
        let out = pollination_loop(&mut scene, 0, &PollinationParams::default(), fake_inspect(1.0)).unwrap();
        assert_eq!((out.inspections.len(), out.buzzes), (2, 1));
        assert!(out.pollinated && !out.inspections[0].pollinated);
        let mut scene = generate_scene(&SceneConfig::default(), 1).unwrap();
        let out = pollination_loop(&mut scene, 0, &PollinationParams::default(), fake_inspect(0.0)).unwrap();
        assert_eq!((out.inspections.len(), out.buzzes), (6, 5));
        assert!(!out.pollinated);
    }
}
