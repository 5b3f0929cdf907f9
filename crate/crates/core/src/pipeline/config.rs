use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Pose6D};
use crate::global::DetectorParams;
use crate::local::{MatchParams, RegParams, ServoParams};
use crate::micro::{AutofocusParams, CenteringParams, PollinationParams};
use crate::rig::{self, ToolParams, BASE, GLOBAL_CAM};
use crate::scene::{MicroscopeOptics, SceneConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRig {
    pub global: CameraModel,
    /// Wide-view camera pose (camera → base).
    pub global_pose: Pose6D,
    pub endoscope: CameraModel,
    pub microscope: CameraModel,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            global: rig::global_camera(),
            global_pose: rig::global_camera_pose(),
            endoscope: rig::endoscope_camera(),
            microscope: rig::microscope_camera(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StereoParams {
    pub matching: MatchParams,
    /// Sideways shift between the two endoscope views, mm.
    pub baseline: f64,
    /// Points farther than this from the median cloud depth are dropped, mm.
    pub depth_window: f64,
    /// Fewest cloud points worth registering.
    pub min_points: usize,
}

impl Default for StereoParams {
    fn default() -> Self {
        Self {
            matching: MatchParams::default(),
            baseline: 5.0,
            depth_window: 25.0,
            min_points: 200,
        }
    }
}

/// Perturbations that emulate field failures. All zero by default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    /// Gaussian noise on the wide-view depth map, mm.
    pub global_depth_sigma: f64,
    /// Probability that a leaf blocks the approach to a flower.
    pub occlusion_rate: f64,
    /// Gaussian error of the executed slide under the flower, per tool axis, mm.
    pub contact_sigma: f64,
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.global_depth_sigma >= 0.0 && self.contact_sigma >= 0.0) || !(0.0..=1.0).contains(&self.occlusion_rate) {
            return Err(Error::Config("noise: sigmas ≥ 0 and occlusion_rate ∈ [0, 1]".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.global_depth_sigma == 0.0 && self.occlusion_rate == 0.0 && self.contact_sigma == 0.0
    }
}

/// Everything a batch run needs. Unknown keys are rejected on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scene: SceneConfig,
    pub cameras: CameraRig,
    pub tool: ToolParams,
    pub optics: MicroscopeOptics,
    pub detector: DetectorParams,
    /// Fraction of the camera–flower segment used as the approach waypoint.
    pub waypoint_fraction: f64,
    pub servo: ServoParams,
    pub stereo: StereoParams,
    pub registration: RegParams,
    pub centering: CenteringParams,
    pub autofocus: AutofocusParams,
    pub pollination: PollinationParams,
    pub noise: NoiseParams,
    pub n_scenes: usize,
    pub base_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub dump_images: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            cameras: CameraRig::default(),
            tool: ToolParams::default(),
            optics: MicroscopeOptics::default(),
            detector: DetectorParams::default(),
            waypoint_fraction: 0.6,
            servo: ServoParams::default(),
            stereo: StereoParams::default(),
            registration: RegParams::default(),
            centering: CenteringParams::default(),
            autofocus: AutofocusParams::default(),
            pollination: PollinationParams::default(),
            noise: NoiseParams::default(),
            n_scenes: 1,
            base_seed: 0,
            output_dir: None,
            dump_images: false,
        }
    }
}

impl ScenarioConfig {
    /// Noise knobs tuned so a 50-flower batch behaves like the field trial:
    /// a fifth of detections missed, occasional leaf occlusion on approach
    /// and a loose slide under the flower.
    pub fn field_emulation() -> Self {
        let mut c = Self {
            n_scenes: 10,
            ..Self::default()
        };
        c.detector.p_miss = 0.2;
        c.noise = NoiseParams {
            global_depth_sigma: 2.0,
            occlusion_rate: 0.05,
            contact_sigma: 10.0,
        };
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        for cam in [&self.cameras.global, &self.cameras.endoscope, &self.cameras.microscope] {
            cam.validate().map_err(|e| Error::Config(format!("camera: {e}")))?;
        }
        let gp = &self.cameras.global_pose;
        gp.validate().map_err(|e| Error::Config(format!("global_pose: {e}")))?;
        if gp.parent().as_str() != BASE || gp.child().as_str() != GLOBAL_CAM {
            return Err(Error::Config(format!("global_pose must map `{GLOBAL_CAM}` into `{BASE}`")));
        }
        self.tool.validate()?;
        self.optics.validate()?;
        self.detector.validate()?;
        if !(self.waypoint_fraction > 0.0 && self.waypoint_fraction < 1.0) {
            return Err(Error::Config("waypoint_fraction must lie in (0, 1)".into()));
        }
        self.servo.validate()?;
        self.stereo.matching.validate()?;
        if !(self.stereo.baseline > 0.0 && self.stereo.depth_window > 0.0) {
            return Err(Error::Config("stereo: baseline and depth_window must be positive".into()));
        }
        self.registration.validate()?;
        self.centering.validate()?;
        self.autofocus.validate()?;
        self.pollination.validate()?;
        self.noise.validate()?;
        if self.n_scenes == 0 {
            return Err(Error::Config("n_scenes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
