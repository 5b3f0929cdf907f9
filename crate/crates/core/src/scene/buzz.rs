use serde::{Deserialize, Serialize};

use super::{PlantScene, PollenCounts};
use crate::error::{Error, Result};

/// Exponential-saturation pollen transfer: a buzz of `t` seconds releases
/// `1 − exp(−λ·t)` of the anther pollen; `capture` of it lands on the stigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuzzModel {
    /// Release rate λ, 1/s.
    pub rate: f64,
    /// Fraction of released pollen captured by the stigma.
    pub capture: f64,
}

impl Default for BuzzModel {
    fn default() -> Self {
        Self {
            rate: 0.23,
            capture: 0.9,
        }
    }
}

impl BuzzModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) || !(0.0..=1.0).contains(&self.capture) {
            return Err(Error::Config("buzz: need rate ≥ 0 and capture ∈ [0, 1]".into()));
        }
        Ok(())
    }

    /// Counts after one buzz. Released pollen is rounded to whole grains and
    /// the captured share is floored, so rounding losses go to `lost`.
    pub fn transfer(&self, counts: PollenCounts, duration_s: f64) -> PollenCounts {
        let fraction = 1.0 - (-self.rate * duration_s).exp();
        let moved = ((counts.anthers as f64) * fraction).round().min(counts.anthers as f64) as u64;
        let captured = ((moved as f64) * self.capture).floor().min(moved as f64) as u64;
        PollenCounts {
            anthers: counts.anthers - moved,
            stigma: counts.stigma + captured,
            lost: counts.lost + (moved - captured),
        }
    }
}

/// Vibrates one flower for `duration_s` seconds using the scene's model.
pub fn apply_buzz(scene: &mut PlantScene, flower_id: usize, duration_s: f64) -> Result<PollenCounts> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::Domain(format!("buzz duration must be positive, got {duration_s}")));
    }
    let model = scene.buzz;
    let flower = scene.flower_mut(flower_id)?;
    flower.pollen = model.transfer(flower.pollen, duration_s);
    Ok(flower.pollen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rgb8;

    fn counts() -> PollenCounts {
        PollenCounts {
            anthers: 200_000,
            stigma: 1_000,
            lost: 0,
        }
    }

    #[test]
    fn ten_second_buzz_closed_form() {
        let after = BuzzModel::default().transfer(counts(), 10.0);
        let moved = (200_000.0 * (1.0 - (-2.3f64).exp())).round();
        assert_eq!(after.stigma, 1_000 + (0.9 * moved).floor() as u64);
        assert_eq!(after.total(), counts().total());
    }

    #[test]
    fn tiny_buzz_changes_nothing() {
        assert_eq!(BuzzModel::default().transfer(counts(), 1e-9), counts());
    }

    #[test]
    fn unknown_flower_and_bad_duration() {
        let mut scene = PlantScene::empty(Rgb8::new(0, 0, 0), 0);
        assert!(matches!(apply_buzz(&mut scene, 3, 10.0), Err(Error::UnknownFlower(3))));
        assert!(apply_buzz(&mut scene, 3, 0.0).is_err());
    }
}
