use nalgebra::Vector3;
use rand::Rng;

use super::{FlowerColors, FlowerInstance, LeafOccluder, PlantScene, PollenCounts, SceneConfig, Stem};
use crate::error::{Error, Result};
use crate::geometry::axis_angle;
use crate::rng;

const STREAM_SCENE: u64 = 0x5C3E;

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

/// Rotates unit vector `v` away from itself by `angle` about a random
/// perpendicular axis.
fn tilt(rng: &mut impl Rng, v: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let helper = if v.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
    let p1 = v.cross(&helper).normalize();
    let p2 = v.cross(&p1);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let axis = phi.cos() * p1 + phi.sin() * p2;
    (axis_angle(&axis, angle) * v).normalize()
}

/// Deterministic plant scene for `seed`.
pub fn generate_scene(config: &SceneConfig, seed: u64) -> Result<PlantScene> {
    config.validate()?;
    let mut rng = rng::stream(seed, STREAM_SCENE);
    let c = Vector3::from(config.region_center);
    let h = Vector3::from(config.region_half_extent);
    let viewpoint = Vector3::from(config.viewpoint);
    let colors = FlowerColors {
        petal: config.colors.petal,
        stigma: config.colors.stigma,
        anther: config.colors.anther,
        pollen: config.colors.pollen,
        stem: config.colors.stem,
    };

    let mut flowers: Vec<FlowerInstance> = Vec::with_capacity(config.n_flowers);
    let mut attempts = 0usize;
    while flowers.len() < config.n_flowers {
        attempts += 1;
        if attempts > config.max_attempts {
            return Err(Error::Generation(format!(
                "placed {} of {} flowers with spacing {} mm after {} attempts",
                flowers.len(),
                config.n_flowers,
                config.min_spacing,
                config.max_attempts
            )));
        }
        let center = c + Vector3::new(
            uniform(&mut rng, [-h.x, h.x]),
            uniform(&mut rng, [-h.y, h.y]),
            uniform(&mut rng, [-h.z, h.z]),
        );
        if flowers.iter().any(|f| (f.center - center).norm() < config.min_spacing) {
            continue;
        }
        let facing = (viewpoint - center).normalize();
        let tilt_angle = uniform(&mut rng, [0.0, config.max_tilt_deg.to_radians()]);
        let normal = tilt(&mut rng, &facing, tilt_angle);
        let spin = rng.gen_range(0.0..std::f64::consts::TAU);
        let petal_radius = uniform(&mut rng, config.petal_radius);
        let stigma_radius = uniform(&mut rng, config.stigma_radius);
        let anther_radius = uniform(&mut rng, config.anther_radius);
        let stem_angle = uniform(&mut rng, [0.0, config.stem_max_angle_deg.to_radians()]);
        let stem_dir = tilt(&mut rng, &-normal, stem_angle);
        let stem_len = uniform(&mut rng, config.stem_length);
        let anthers = if config.anther_pollen[0] == config.anther_pollen[1] {
            config.anther_pollen[0]
        } else {
            rng.gen_range(config.anther_pollen[0]..=config.anther_pollen[1])
        };
        let pollen = PollenCounts {
            anthers,
            stigma: config.initial_stigma_pollen,
            lost: 0,
        };
        flowers.push(FlowerInstance {
            id: flowers.len(),
            center,
            normal,
            spin,
            petal_shape: config.petal_shape,
            petal_radius,
            stigma_radius,
            anther_radius,
            stem: Stem {
                top: center,
                bottom: center + stem_len * stem_dir,
                radius: config.stem_radius,
            },
            pollen,
            pollen_budget: pollen.total(),
            colors,
            texture_seed: rng.gen(),
        });
    }

    let leaves = (0..config.n_leaves)
        .map(|_| {
            let center = c + Vector3::new(
                h.x + uniform(&mut rng, config.leaf_setback),
                uniform(&mut rng, [-1.2 * h.y, 1.2 * h.y]),
                uniform(&mut rng, [-1.2 * h.z, 1.2 * h.z]),
            );
            let facing = (viewpoint - center).normalize();
            let lean = uniform(&mut rng, [0.0, 0.5]);
            let normal = tilt(&mut rng, &facing, lean);
            LeafOccluder {
                center,
                normal,
                radius: uniform(&mut rng, config.leaf_radius),
                color: config.colors.leaf,
            }
        })
        .collect();

    Ok(PlantScene {
        flowers,
        leaves,
        background: config.colors.background,
        seed,
        buzz: config.buzz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let cfg = SceneConfig::default();
        let a = generate_scene(&cfg, 42).unwrap().to_json().unwrap();
        let b = generate_scene(&cfg, 42).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scene(&cfg, 43).unwrap().to_json().unwrap());
    }

    #[test]
    fn zero_flowers() {
        let cfg = SceneConfig {
            n_flowers: 0,
            ..SceneConfig::default()
        };
        assert!(generate_scene(&cfg, 1).unwrap().flowers.is_empty());
    }

    #[test]
    fn eight_flowers_respect_spacing_and_invariants() {
        let cfg = SceneConfig {
            n_flowers: 8,
            ..SceneConfig::default()
        };
        for seed in 0..20 {
            let s = generate_scene(&cfg, seed).unwrap();
            assert_eq!(s.flowers.len(), 8);
            for (i, a) in s.flowers.iter().enumerate() {
                assert!((11.0..=17.0).contains(&a.petal_radius));
                assert!((a.normal.norm() - 1.0).abs() < 1e-12);
                assert_eq!(a.stem.top, a.center);
                let stem_dir = (a.stem.bottom - a.stem.top).normalize();
                assert!(stem_dir.dot(&-a.normal) >= 45f64.to_radians().cos() - 1e-9);
                assert_eq!(a.pollen.total(), a.pollen_budget);
                for b in &s.flowers[i + 1..] {
                    assert!((a.center - b.center).norm() >= 20.0);
                }
            }
        }
    }

    #[test]
    fn infeasible_spacing_is_a_generation_error() {
        let cfg = SceneConfig {
            n_flowers: 50,
            min_spacing: 500.0,
            max_attempts: 200,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&cfg, 0), Err(Error::Generation(_))));
    }
}
