use pollisim::geometry::Rgb8;
use pollisim::global::{detect_flowers, localize_flower, DetectorParams};
use pollisim::raster::Image;
use pollisim::rig;
use pollisim::scene::{generate_scene, render_color, render_depth, SceneConfig};
use proptest::prelude::*;

fn single_flower(center: [f64; 3], seed: u64) -> pollisim::scene::PlantScene {
    let config = SceneConfig {
        n_flowers: 1,
        n_leaves: 0,
        region_center: center,
        region_half_extent: [0.0; 3],
        ..SceneConfig::default()
    };
    generate_scene(&config, seed).unwrap()
}

fn shifted(img: &Image, dx: i64, dy: i64, fill: Rgb8) -> Image {
    let mut out = Image::filled(img.width(), img.height(), fill);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (sx, sy) = (i64::from(x) - dx, i64::from(y) - dy);
            if sx >= 0 && sy >= 0 && sx < i64::from(img.width()) && sy < i64::from(img.height()) {
                out.set(x, y, img.get(sx as u32, sy as u32));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn detect_then_localize_recovers_centers(u in -0.85f64..0.85, v in -0.85f64..0.85, seed in 0u64..10_000) {
        let cam = rig::global_camera();
        let pose = rig::global_camera_pose();
        // Lateral offsets as fractions of the frustum half-width at 1000 mm.
        let range = 1000.0;
        let y = -u * cam.cx / cam.fx * range;
        let z = 500.0 - v * cam.cy / cam.fy * range;
        let scene = single_flower([range, y, z], seed);
        let truth = scene.flowers[0].center;
        let img = render_color(&scene, &cam, &pose);
        let depth = render_depth(&scene, &cam, &pose, 0.0);
        let dets = detect_flowers(&img, &DetectorParams::default()).unwrap();
        let best = dets
            .iter()
            .map(|d| (localize_flower(d, &depth, &cam, &pose).unwrap().position - truth).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(best <= 5.0, "{} detections, nearest {best:.2} mm", dets.len());
    }

    #[test]
    fn detection_boxes_follow_image_shifts(dx in -40i64..40, dy in -40i64..40, seed in 0u64..10_000) {
        let cam = rig::global_camera();
        let scene = single_flower([1000.0, 0.0, 500.0], seed);
        let img = render_color(&scene, &cam, &rig::global_camera_pose());
        let params = DetectorParams::default();
        let a = detect_flowers(&img, &params).unwrap();
        let b = detect_flowers(&shifted(&img, dx, dy, scene.background), &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (da, db) in a.iter().zip(&b) {
            let (ca, cb) = (da.bbox.center(), db.bbox.center());
            prop_assert!((cb.u - ca.u - dx as f64).abs() <= 1.0 && (cb.v - ca.v - dy as f64).abs() <= 1.0);
        }
    }
}
