//! Per-pixel ray casting with per-object screen-bound culling and a
//! z-buffer. Depth values are z-depth along the camera axis.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::texture::{self, fbm};
use super::{PlantScene, ANTHER_HEIGHT, STIGMA_HEIGHT};
use crate::geometry::{CameraModel, Pose6D, Rgb8};
use crate::raster::{DepthMap, Image};
use crate::rng::{derive_seed, splitmix64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceKind {
    Petal,
    Anther,
    Stigma,
    Stem,
    Leaf,
}

/// Nearest surface seen through one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub kind: SurfaceKind,
    /// Index into `scene.flowers` (petal, anther, stigma, stem) or
    /// `scene.leaves`.
    pub object: u32,
    /// Z-depth in the camera frame, mm.
    pub depth: f64,
    /// Surface coordinates in the flower's petal plane, mm.
    pub local: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct SurfaceMap {
    pub width: u32,
    pub height: u32,
    pub hits: Vec<Option<SurfaceHit>>,
    /// Mean focal length of the camera that produced the map.
    pub focal: f64,
}

impl SurfaceMap {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Option<&SurfaceHit> {
        self.hits[y as usize * self.width as usize + x as usize].as_ref()
    }
}

struct FlowerView {
    index: u32,
    c: Vector3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    n: Vector3<f64>,
    nc: f64,
}

/// Pixel rectangle `[x0, x1) × [y0, y1)` covering a sphere, or `None` if the
/// sphere cannot be visible.
fn screen_bounds(cam: &CameraModel, center: &Vector3<f64>, radius: f64) -> Option<(u32, u32, u32, u32)> {
    if center.z + radius < cam.near || center.z - radius > cam.far {
        return None;
    }
    let full = Some((0, cam.width, 0, cam.height));
    let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for corner in 0..8 {
        let p = center
            + Vector3::new(
                if corner & 1 == 0 { -radius } else { radius },
                if corner & 2 == 0 { -radius } else { radius },
                if corner & 4 == 0 { -radius } else { radius },
            );
        if p.z <= cam.near * 0.5 {
            return full;
        }
        let u = cam.fx * p.x / p.z + cam.cx;
        let v = cam.fy * p.y / p.z + cam.cy;
        u0 = u0.min(u);
        u1 = u1.max(u);
        v0 = v0.min(v);
        v1 = v1.max(v);
    }
    let clamp_lo = |x: f64, max: u32| (x.floor() - 1.0).clamp(0.0, f64::from(max)) as u32;
    let clamp_hi = |x: f64, max: u32| (x.ceil() + 2.0).clamp(0.0, f64::from(max)) as u32;
    let b = (
        clamp_lo(u0, cam.width),
        clamp_hi(u1, cam.width),
        clamp_lo(v0, cam.height),
        clamp_hi(v1, cam.height),
    );
    (b.0 < b.1 && b.2 < b.3).then_some(b)
}

/// Ray–capsule intersection; `dir` must be unit length. Returns ray distance.
fn capsule_hit(dir: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, r: f64) -> Option<f64> {
    let ba = b - a;
    let oa = -a;
    let baba = ba.dot(&ba);
    let bard = ba.dot(dir);
    let baoa = ba.dot(&oa);
    let rdoa = dir.dot(&oa);
    let oaoa = oa.dot(&oa);
    let qa = baba - bard * bard;
    let qb = baba * rdoa - baoa * bard;
    let qc = baba * oaoa - baoa * baoa - r * r * baba;
    let h = qb * qb - qa * qc;
    if h >= 0.0 && qa > 1e-12 {
        let t = (-qb - h.sqrt()) / qa;
        let y = baoa + t * bard;
        if y > 0.0 && y < baba {
            return (t > 0.0).then_some(t);
        }
    }
    // End caps.
    let mut best: Option<f64> = None;
    for end in [a, b] {
        let oc = -end;
        let hb = dir.dot(&oc);
        let hc = oc.dot(&oc) - r * r;
        let hh = hb * hb - hc;
        if hh >= 0.0 {
            let t = -hb - hh.sqrt();
            if t > 0.0 && best.map_or(true, |bt| t < bt) {
                best = Some(t);
            }
        }
    }
    best
}

/// Ray casts every pixel and returns the nearest surface per pixel.
pub fn render_surfaces(scene: &PlantScene, cam: &CameraModel, cam_pose: &Pose6D) -> SurfaceMap {
    let to_cam = cam_pose.inverse();
    let (w, h) = (cam.width, cam.height);
    let mut hits: Vec<Option<SurfaceHit>> = vec![None; cam.pixel_count()];

    let ray = |x: u32, y: u32| cam.ray(f64::from(x), f64::from(y));
    let mut write = |x: u32, y: u32, hit: SurfaceHit| {
        let slot = &mut hits[y as usize * w as usize + x as usize];
        if slot.map_or(true, |s| hit.depth < s.depth) && hit.depth >= cam.near && hit.depth <= cam.far {
            *slot = Some(hit);
        }
    };

    for (index, f) in scene.flowers.iter().enumerate() {
        let (e1, e2, n) = f.local_axes();
        let c = to_cam.transform_point(&f.center);
        let n = to_cam.transform_vector(&n);
        let view = FlowerView {
            index: index as u32,
            c,
            e1: to_cam.transform_vector(&e1),
            e2: to_cam.transform_vector(&e2),
            n,
            nc: n.dot(&c),
        };
        let Some((x0, x1, y0, y1)) = screen_bounds(cam, &view.c, f.bounding_radius()) else {
            continue;
        };
        let layers = [
            (STIGMA_HEIGHT, SurfaceKind::Stigma),
            (ANTHER_HEIGHT, SurfaceKind::Anther),
            (0.0, SurfaceKind::Petal),
        ];
        for y in y0..y1 {
            for x in x0..x1 {
                let d = ray(x, y);
                let denom = view.n.dot(&d);
                if denom.abs() < 1e-9 {
                    continue;
                }
                let mut best: Option<SurfaceHit> = None;
                for &(height, kind) in &layers {
                    let t = (view.nc + height) / denom;
                    if t <= 0.0 || best.is_some_and(|b| b.depth <= t) {
                        continue;
                    }
                    let q = t * d - view.c;
                    let (a, b) = (q.dot(&view.e1), q.dot(&view.e2));
                    let r2 = a * a + b * b;
                    let inside = match kind {
                        SurfaceKind::Stigma => r2 <= f.stigma_radius.powi(2),
                        SurfaceKind::Anther => r2 <= f.anther_radius.powi(2),
                        _ => f.petal_shape.contains(f.petal_radius, a, b),
                    };
                    if inside {
                        best = Some(SurfaceHit {
                            kind,
                            object: view.index,
                            depth: t,
                            local: [a, b],
                        });
                    }
                }
                if let Some(hit) = best {
                    write(x, y, hit);
                }
            }
        }

        let a = to_cam.transform_point(&f.stem.top);
        let b = to_cam.transform_point(&f.stem.bottom);
        let mid = 0.5 * (a + b);
        let bound = 0.5 * (b - a).norm() + f.stem.radius;
        if let Some((x0, x1, y0, y1)) = screen_bounds(cam, &mid, bound) {
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = ray(x, y);
                    let dn = d.normalize();
                    if let Some(t) = capsule_hit(&dn, &a, &b, f.stem.radius) {
                        let hit = SurfaceHit {
                            kind: SurfaceKind::Stem,
                            object: index as u32,
                            depth: t * dn.z,
                            local: [0.0, 0.0],
                        };
                        write(x, y, hit);
                    }
                }
            }
        }
    }

    for (index, leaf) in scene.leaves.iter().enumerate() {
        let c = to_cam.transform_point(&leaf.center);
        let n = to_cam.transform_vector(&leaf.normal);
        let nc = n.dot(&c);
        let Some((x0, x1, y0, y1)) = screen_bounds(cam, &c, leaf.radius) else {
            continue;
        };
        for y in y0..y1 {
            for x in x0..x1 {
                let d = ray(x, y);
                let denom = n.dot(&d);
                if denom.abs() < 1e-9 {
                    continue;
                }
                let t = nc / denom;
                if t > 0.0 && (t * d - c).norm_squared() <= leaf.radius * leaf.radius {
                    let hit = SurfaceHit {
                        kind: SurfaceKind::Leaf,
                        object: index as u32,
                        depth: t,
                        local: [0.0, 0.0],
                    };
                    write(x, y, hit);
                }
            }
        }
    }

    SurfaceMap {
        width: w,
        height: h,
        hits,
        focal: cam.focal_mean(),
    }
}

const PETAL_SALT: u64 = 0x0001;
const ANTHER_SALT: u64 = 0x0002;
const STIGMA_SALT: u64 = 0x0003;

/// Stigma brightness (HSV value) range produced by the texture.
pub(crate) const STIGMA_VALUE: (f64, f64) = (120.0, 240.0);

pub(crate) fn shade(scene: &PlantScene, hit: &SurfaceHit, footprint: f64) -> Rgb8 {
    match hit.kind {
        SurfaceKind::Leaf => scene.leaves[hit.object as usize].color,
        SurfaceKind::Stem => scene.flowers[hit.object as usize].colors.stem,
        kind => {
            let f = &scene.flowers[hit.object as usize];
            let [a, b] = hit.local;
            match kind {
                SurfaceKind::Petal => {
                    let n = fbm(f.texture_seed ^ PETAL_SALT, a, b, texture::PETAL, footprint);
                    f.colors.petal.scaled((0.9 + 0.25 * n).clamp(0.78, 1.02))
                }
                SurfaceKind::Anther => {
                    let n = fbm(f.texture_seed ^ ANTHER_SALT, a, b, texture::ANTHER, footprint);
                    f.colors.anther.scaled((0.95 + 0.4 * n).clamp(0.75, 1.1))
                }
                _ => {
                    let n = fbm(f.texture_seed ^ STIGMA_SALT, a, b, texture::STIGMA, footprint);
                    let v = (180.0 + 150.0 * n).clamp(STIGMA_VALUE.0, STIGMA_VALUE.1);
                    let base = f.colors.stigma;
                    let vmax = f64::from(base.0.iter().copied().max().unwrap_or(1).max(1));
                    base.scaled(v / vmax)
                }
            }
        }
    }
}

pub(crate) fn shade_map(scene: &PlantScene, map: &SurfaceMap) -> Image {
    let mut img = Image::filled(map.width, map.height, scene.background);
    let raw = img.as_raw_mut();
    for (i, hit) in map.hits.iter().enumerate() {
        if let Some(hit) = hit {
            let c = shade(scene, hit, hit.depth / map.focal);
            raw[i * 3..i * 3 + 3].copy_from_slice(&c.0);
        }
    }
    img
}

/// Color image of the scene seen from `cam_pose` (camera → base).
pub fn render_color(scene: &PlantScene, cam: &CameraModel, cam_pose: &Pose6D) -> Image {
    shade_map(scene, &render_surfaces(scene, cam, cam_pose))
}

fn pose_hash(p: &Pose6D) -> u64 {
    p.rotation()
        .iter()
        .chain(p.translation().iter())
        .fold(0u64, |h, v| splitmix64(h ^ v.to_bits()))
}

/// Z-depth map with additive zero-mean Gaussian noise of `noise_sigma` mm.
/// The noise stream is keyed by the scene seed and the camera pose.
pub fn render_depth(scene: &PlantScene, cam: &CameraModel, cam_pose: &Pose6D, noise_sigma: f64) -> DepthMap {
    let map = render_surfaces(scene, cam, cam_pose);
    let mut depth = DepthMap::empty(cam.width, cam.height);
    let mut noise = (noise_sigma > 0.0).then(|| {
        (
            ChaCha8Rng::seed_from_u64(derive_seed(scene.seed, pose_hash(cam_pose))),
            Normal::new(0.0, noise_sigma).expect("finite sigma"),
        )
    });
    for y in 0..cam.height {
        for x in 0..cam.width {
            if let Some(hit) = map.get(x, y) {
                let mut d = hit.depth;
                if let Some((rng, dist)) = noise.as_mut() {
                    d += dist.sample(rng);
                }
                depth.set(x, y, d.clamp(1e-3, cam.far));
            }
        }
    }
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{from_axes, Frame};
    use crate::scene::{FlowerColors, FlowerInstance, LeafOccluder, PetalShape, PollenCounts, SceneColors, Stem};

    pub(crate) fn looking_down_x(position: Vector3<f64>) -> Pose6D {
        let r = from_axes(&-Vector3::y(), &-Vector3::z(), &Vector3::x());
        Pose6D::new(r, position, Frame::new("base"), Frame::new("cam")).unwrap()
    }

    pub(crate) fn single_flower(center: Vector3<f64>, shape: PetalShape) -> PlantScene {
        let colors = SceneColors::default();
        let mut scene = PlantScene::empty(colors.background, 1);
        scene.flowers.push(FlowerInstance {
            id: 0,
            center,
            normal: -Vector3::x(),
            spin: 0.3,
            petal_shape: shape,
            petal_radius: 14.0,
            stigma_radius: 4.0,
            anther_radius: 6.0,
            stem: Stem {
                top: center,
                bottom: center + Vector3::new(50.0, 0.0, -30.0),
                radius: 1.5,
            },
            pollen: PollenCounts {
                anthers: 200_000,
                stigma: 1_000,
                lost: 0,
            },
            pollen_budget: 201_000,
            colors: FlowerColors {
                petal: colors.petal,
                stigma: colors.stigma,
                anther: colors.anther,
                pollen: colors.pollen,
                stem: colors.stem,
            },
            texture_seed: 77,
        });
        scene
    }

    fn cam() -> CameraModel {
        CameraModel::centered(500.0, 640, 480, 10.0, 3000.0).unwrap()
    }

    #[test]
    fn empty_scene_is_uniform_background() {
        let scene = PlantScene::empty(Rgb8::new(1, 2, 3), 0);
        let img = render_color(&scene, &cam(), &looking_down_x(Vector3::zeros()));
        assert!(img.pixels().all(|p| p == Rgb8::new(1, 2, 3)));
        let d = render_depth(&scene, &cam(), &looking_down_x(Vector3::zeros()), 0.0);
        assert_eq!(d.valid_count(), 0);
    }

    #[test]
    fn axis_flower_hits_principal_point_with_exact_depth() {
        let scene = single_flower(Vector3::new(500.0, 0.0, 0.0), PetalShape::Disk);
        let pose = looking_down_x(Vector3::zeros());
        let d = render_depth(&scene, &cam(), &pose, 0.0);
        // The stigma disk faces the camera 2.5 mm in front of the petal plane.
        assert!((d.get(320, 240) - (500.0 - STIGMA_HEIGHT)).abs() < 0.01);
        let img = render_color(&scene, &cam(), &pose);
        assert_ne!(img.get(320, 240), scene.background);
        assert_eq!(img.get(0, 0), scene.background);
        assert_eq!(d.get(0, 0), DepthMap::NO_RETURN);
    }

    #[test]
    fn leaf_in_front_wins_the_z_test() {
        let mut scene = single_flower(Vector3::new(500.0, 0.0, 0.0), PetalShape::Lobed);
        scene.leaves.push(LeafOccluder {
            center: Vector3::new(400.0, 0.0, 0.0),
            normal: -Vector3::x(),
            radius: 40.0,
            color: Rgb8::new(50, 110, 40),
        });
        let img = render_color(&scene, &cam(), &looking_down_x(Vector3::zeros()));
        assert_eq!(img.get(320, 240), Rgb8::new(50, 110, 40));
    }

    #[test]
    fn capsule_matches_sphere_cap() {
        let a = Vector3::new(0.0, 0.0, 100.0);
        let b = Vector3::new(0.0, 30.0, 100.0);
        let t = capsule_hit(&Vector3::z(), &a, &b, 2.0).unwrap();
        assert!((t - 98.0).abs() < 1e-9);
        let t = capsule_hit(&Vector3::z(), &Vector3::new(0.0, -5.0, 50.0), &Vector3::new(0.0, 5.0, 50.0), 1.0).unwrap();
        assert!((t - 49.0).abs() < 1e-9);
        assert!(capsule_hit(&Vector3::z(), &Vector3::new(5.0, 0.0, 50.0), &Vector3::new(5.0, 1.0, 50.0), 1.0).is_none());
    }
}
