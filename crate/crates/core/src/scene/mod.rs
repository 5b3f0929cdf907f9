//! Synthetic ground-truth world: flowers as flat disk stacks on stems, leaf
//! occluders, three-camera rendering and the buzz pollen-transfer surrogate.

mod buzz;
mod config;
mod generate;
mod microscope;
mod render;
pub mod texture;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{axis_angle, Point3, Rgb8};

pub use buzz::{apply_buzz, BuzzModel};
pub use config::{SceneColors, SceneConfig};
pub use generate::generate_scene;
pub use microscope::{
    render_microscope, render_microscope_sharp, MicroscopeOptics, MicroscopeState, SharpMicroscopeView, SLIDE_MAX,
};
pub use render::{render_color, render_depth, render_surfaces, SurfaceHit, SurfaceKind, SurfaceMap};

/// Height of the anther ring above the petal plane, mm.
pub const ANTHER_HEIGHT: f64 = 1.2;
/// Height of the stigma disk above the petal plane, mm.
pub const STIGMA_HEIGHT: f64 = 2.5;

/// Petal lobes as `(angle°, size fraction)`; deliberately irregular so the
/// outline has no rotational symmetry.
const LOBES: [(f64, f64); 5] = [(0.0, 1.0), (80.0, 0.9), (150.0, 0.95), (205.0, 0.84), (285.0, 0.92)];
const LOBE_RADIUS_FRACTION: f64 = 0.42;
const INNER_DISK_FRACTION: f64 = 0.55;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PetalShape {
    /// Five irregular overlapping lobes around an inner disk.
    #[default]
    Lobed,
    /// Plain circular disk.
    Disk,
}

impl PetalShape {
    /// Whether local petal-plane coordinates `(a, b)` lie on the petals of
    /// a flower with outer radius `radius`.
    pub fn contains(self, radius: f64, a: f64, b: f64) -> bool {
        let r2 = a * a + b * b;
        match self {
            PetalShape::Disk => r2 <= radius * radius,
            PetalShape::Lobed => {
                if r2 > radius * radius {
                    return false;
                }
                let inner = INNER_DISK_FRACTION * radius;
                if r2 <= inner * inner {
                    return true;
                }
                LOBES.iter().any(|&(deg, s)| {
                    let rho = LOBE_RADIUS_FRACTION * radius * s;
                    let d = radius * s - rho;
                    let (sin, cos) = deg.to_radians().sin_cos();
                    let (da, db) = (a - d * cos, b - d * sin);
                    da * da + db * db <= rho * rho
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowerColors {
    pub petal: Rgb8,
    pub stigma: Rgb8,
    pub anther: Rgb8,
    pub pollen: Rgb8,
    pub stem: Rgb8,
}

/// Pollen bookkeeping for one flower; the sum is conserved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollenCounts {
    pub anthers: u64,
    pub stigma: u64,
    pub lost: u64,
}

impl PollenCounts {
    pub fn total(&self) -> u64 {
        self.anthers + self.stigma + self.lost
    }
}

/// Stem modeled as a capsule from the flower center downward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stem {
    pub top: Point3,
    pub bottom: Point3,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowerInstance {
    pub id: usize,
    /// Center of the petal plane, base frame, mm.
    pub center: Point3,
    /// Outward unit normal (the stigma side).
    pub normal: Vector3<f64>,
    /// In-plane rotation of the petal outline, radians.
    pub spin: f64,
    pub petal_shape: PetalShape,
    pub petal_radius: f64,
    pub stigma_radius: f64,
    pub anther_radius: f64,
    pub stem: Stem,
    pub pollen: PollenCounts,
    pub pollen_budget: u64,
    pub colors: FlowerColors,
    pub texture_seed: u64,
}

impl FlowerInstance {
    /// Orthonormal `(e1, e2, normal)` of the petal plane, `e1` rotated by `spin`.
    pub fn local_axes(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let n = self.normal.normalize();
        let helper = if n.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = helper.cross(&n).normalize();
        let e1 = axis_angle(&n, self.spin) * e1;
        (e1, n.cross(&e1), n)
    }

    pub fn stigma_center(&self) -> Point3 {
        self.center + STIGMA_HEIGHT * self.normal
    }

    /// Extent of the disk stack around `center`.
    pub fn bounding_radius(&self) -> f64 {
        self.petal_radius.max(self.anther_radius).hypot(STIGMA_HEIGHT)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafOccluder {
    pub center: Point3,
    pub normal: Vector3<f64>,
    pub radius: f64,
    pub color: Rgb8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantScene {
    pub flowers: Vec<FlowerInstance>,
    pub leaves: Vec<LeafOccluder>,
    pub background: Rgb8,
    pub seed: u64,
    pub buzz: BuzzModel,
}

impl PlantScene {
    pub fn empty(background: Rgb8, seed: u64) -> Self {
        Self {
            flowers: Vec::new(),
            leaves: Vec::new(),
            background,
            seed,
            buzz: BuzzModel::default(),
        }
    }

    pub fn flower(&self, id: usize) -> crate::Result<&FlowerInstance> {
        self.flowers.iter().find(|f| f.id == id).ok_or(crate::Error::UnknownFlower(id))
    }

    pub fn flower_mut(&mut self, id: usize) -> crate::Result<&mut FlowerInstance> {
        self.flowers.iter_mut().find(|f| f.id == id).ok_or(crate::Error::UnknownFlower(id))
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Whether any leaf blocks the open segment between two points.
    pub fn leaf_blocks(&self, from: &Point3, to: &Point3) -> bool {
        let d = to - from;
        self.leaves.iter().any(|leaf| {
            let denom = leaf.normal.dot(&d);
            if denom.abs() < 1e-12 {
                return false;
            }
            let s = leaf.normal.dot(&(leaf.center - from)) / denom;
            if !(s > 1e-9 && s < 1.0 - 1e-9) {
                return false;
            }
            (from + s * d - leaf.center).norm() <= leaf.radius
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobed_outline_reaches_full_radius_only_at_first_lobe() {
        let r = 14.0;
        assert!(PetalShape::Lobed.contains(r, r - 1e-9, 0.0));
        assert!(!PetalShape::Lobed.contains(r, -r + 0.5, 0.0));
        assert!(PetalShape::Lobed.contains(r, 0.0, 0.0));
        assert!(!PetalShape::Lobed.contains(r, r + 0.1, 0.0));
        assert!(PetalShape::Disk.contains(r, 0.0, -r));
    }

    #[test]
    fn local_axes_are_orthonormal() {
        let mut f = crate::scene::generate_scene(&SceneConfig::default(), 3).unwrap().flowers[0].clone();
        for spin in [0.0, 1.0, -2.5] {
            f.spin = spin;
            let (e1, e2, n) = f.local_axes();
            assert!((e1.norm() - 1.0).abs() < 1e-12 && (e2.norm() - 1.0).abs() < 1e-12);
            assert!(e1.dot(&e2).abs() < 1e-12 && e1.dot(&n).abs() < 1e-12);
            assert!((e1.cross(&e2) - n).norm() < 1e-12);
        }
    }
}
