use nalgebra::Vector3;
use pollisim::geometry::{axis_angle, rgb_to_hsv, Pose6D, Rgb8};
use pollisim::micro::{count_pollen, focus_score, plan_contact, pollination_loop, PollinationParams, TISSUE_BAND};
use pollisim::raster::{BoundingBox, Image, PointCloud};
use pollisim::rig::{self, ToolParams};
use pollisim::scene::{generate_scene, SceneConfig};
use proptest::prelude::*;

fn image(w: u32, h: u32, max: u8) -> impl Strategy<Value = Image> {
    proptest::collection::vec(0..=max, (w * h * 3) as usize).prop_map(move |data| Image::from_raw(w, h, data).unwrap())
}

fn map_pixels(img: &Image, f: impl Fn(u8) -> u8) -> Image {
    Image::from_raw(img.width(), img.height(), img.as_raw().iter().map(|&v| f(v)).collect()).unwrap()
}

proptest! {
    #[test]
    fn focus_ignores_brightness_offsets(img in image(9, 7, 120), k in 0u8..=135) {
        let roi = BoundingBox::full(9, 7);
        let a = focus_score(&img, &roi).unwrap();
        let b = focus_score(&map_pixels(&img, |v| v + k), &roi).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn focus_scales_with_contrast_squared(img in image(8, 8, 63), c in 1u8..=4) {
        let roi = BoundingBox::full(8, 8);
        let a = focus_score(&img, &roi).unwrap();
        let b = focus_score(&map_pixels(&img, |v| v * c), &roi).unwrap();
        let c2 = f64::from(c) * f64::from(c);
        prop_assert!((b - c2 * a).abs() <= 1e-9 * (1.0 + b));
    }

    #[test]
    fn counted_pollen_is_never_tissue(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        let c = Rgb8::new(r, g, b);
        if count_pollen(&Image::filled(1, 1, c)) == 1 {
            prop_assert!(!TISSUE_BAND.contains(rgb_to_hsv(c)));
        }
    }

    #[test]
    fn pollination_loop_is_bounded(
        anthers in 0u64..400_000,
        threshold in 0u64..60_000,
        max_buzzes in 0usize..6,
        duration in 0.5f64..20.0,
        seed in 0u64..50,
    ) {
        let mut config = SceneConfig { n_flowers: 1, n_leaves: 0, ..SceneConfig::default() };
        config.anther_pollen = [anthers, anthers];
        let mut scene = generate_scene(&config, seed).unwrap();
        let params = PollinationParams { threshold, buzz_duration: duration, max_buzzes };
        // One pollen-colored pixel per ten stigma grains.
        let out = pollination_loop(&mut scene, 0, &params, |s| {
            let n = (s.flowers[0].pollen.stigma / 10).min(100_000) as u32;
            let mut img = Image::filled(400, 250, Rgb8::new(0, 0, 0));
            for i in 0..n {
                img.set(i % 400, i / 400, Rgb8::new(240, 235, 200));
            }
            Ok((img, 0.0))
        })
        .unwrap();
        prop_assert!(out.inspections.len() <= max_buzzes + 1);
        prop_assert_eq!(out.buzzes + 1, out.inspections.len());
        let last = out.inspections.last().unwrap();
        prop_assert_eq!(out.pollinated, last.count > threshold);
        prop_assert!(out.pollinated || out.buzzes == max_buzzes);
        let f = &scene.flowers[0];
        prop_assert_eq!(f.pollen.total(), f.pollen_budget);
    }

    #[test]
    fn contact_plan_clears_and_centers(
        seed in 0u64..200,
        yaw in -3.0f64..3.0,
        tilt in 0.0f64..0.6,
        offset in (-80.0f64..80.0, -80.0f64..80.0, -80.0f64..80.0),
    ) {
        let scene = generate_scene(&SceneConfig::default(), seed).unwrap();
        let f = &scene.flowers[0];
        let (e1, e2, n) = f.local_axes();
        let mut pts = Vec::new();
        for i in -17..=17 {
            for j in -17..=17 {
                let (a, b) = (f64::from(i), f64::from(j));
                if f.petal_shape.contains(f.petal_radius, a, b) {
                    pts.push(f.center + a * e1 + b * e2);
                }
            }
        }
        pts.push(f.stigma_center());
        let cloud = PointCloud::new(pts, rig::BASE).unwrap();
        let r = axis_angle(&Vector3::z(), yaw) * axis_angle(&Vector3::x(), tilt);
        let start = f.center - 100.0 * f.normal + Vector3::new(offset.0, offset.1, offset.2);
        let tool_pose = Pose6D::new(r, start, rig::BASE, rig::TOOL).unwrap();
        let tool = ToolParams::default();
        let plan = plan_contact(&n, &cloud, &tool_pose, &tool).unwrap();
        let end = plan.execute(&tool_pose, &Vector3::zeros());

        prop_assert!((end.transform_vector(&Vector3::z()) - n).norm() <= 1e-9);
        let lowest = cloud.points.iter().map(|p| n.dot(p)).fold(f64::INFINITY, f64::min);
        prop_assert!((lowest - n.dot(end.translation()) - tool.clearance).abs() <= 1e-9);
        let centroid = cloud.centroid().unwrap();
        let lateral = (centroid - end.translation()) - n.dot(&(centroid - end.translation())) * n;
        prop_assert!(lateral.norm() <= 1e-9);
        prop_assert!(lateral.norm() <= tool.cup_radius);
    }
}
