use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HsvRange;
use crate::imgproc::{connected_components, hsv_mask};
use crate::raster::{BoundingBox, Image};
use crate::rng;

const STREAM_DETECTOR: u64 = 0xDE7E;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    /// Filled fraction of the box, `[0, 1]`.
    pub confidence: f64,
    /// Frame label of the camera that produced the image.
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// A pixel is flower-colored if it falls in any band.
    pub bands: Vec<HsvRange>,
    pub min_area: u64,
    /// Probability of dropping each component, emulating missed detections.
    pub p_miss: f64,
    pub seed: u64,
    pub source: String,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            bands: vec![
                // Yellow-orange flower center.
                HsvRange::new([0, 60, 60], [45, 255, 255]),
                // White-ish petals.
                HsvRange::new([0, 0, 170], [179, 60, 255]),
            ],
            min_area: 30,
            p_miss: 0.0,
            seed: 0,
            source: crate::rig::GLOBAL_CAM.to_owned(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::Config("detector: at least one HSV band is required".into()));
        }
        if !(0.0..=1.0).contains(&self.p_miss) {
            return Err(Error::Config("detector: p_miss must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Bounding boxes of flower-colored connected components, in raster order
/// of each component's first pixel.
pub fn detect_flowers(img: &Image, params: &DetectorParams) -> Result<Vec<Detection>> {
    if img.is_empty() {
        return Err(Error::Domain("detector input image is empty".into()));
    }
    let mask = hsv_mask(img, |c| params.bands.iter().any(|b| b.contains(c)));
    let mut rng = (params.p_miss > 0.0).then(|| rng::stream(params.seed, STREAM_DETECTOR));
    let mut out = Vec::new();
    for comp in connected_components(&mask) {
        if comp.area < params.min_area {
            continue;
        }
        if let Some(rng) = rng.as_mut() {
            if rng.gen::<f64>() < params.p_miss {
                continue;
            }
        }
        out.push(Detection {
            bbox: comp.bbox,
            confidence: comp.fill_ratio(),
            source: params.source.clone(),
        });
    }
    Ok(out)
}
