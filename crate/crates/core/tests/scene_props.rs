use pollisim::rig;
use pollisim::scene::{apply_buzz, generate_scene, render_color, render_depth, render_microscope_sharp, MicroscopeOptics, SceneConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn buzz_sequences_conserve_pollen(
        seed in 0u64..1000,
        anthers in 0u64..1_000_000,
        rate in 0.0f64..2.0,
        capture in 0.0f64..=1.0,
        durations in proptest::collection::vec(0.001f64..30.0, 0..8),
    ) {
        let mut config = SceneConfig { n_flowers: 2, n_leaves: 0, ..SceneConfig::default() };
        config.anther_pollen = [anthers, anthers];
        config.buzz.rate = rate;
        config.buzz.capture = capture;
        let mut scene = generate_scene(&config, seed).unwrap();
        let budget = scene.flowers[1].pollen_budget;
        let other = scene.flowers[0].pollen;
        let mut prev = scene.flowers[1].pollen;
        prop_assert_eq!(prev.total(), budget);
        for d in durations {
            let now = apply_buzz(&mut scene, 1, d).unwrap();
            prop_assert_eq!(now.total(), budget);
            prop_assert!(now.anthers <= prev.anthers && now.stigma >= prev.stigma && now.lost >= prev.lost);
            prev = now;
        }
        prop_assert_eq!(scene.flowers[0].pollen, other);
    }
}

#[test]
fn rendering_is_byte_identical() {
    let cam = rig::global_camera();
    let pose = rig::global_camera_pose();
    for seed in [0, 17, 91] {
        let scene = generate_scene(&SceneConfig::default(), seed).unwrap();
        let again = generate_scene(&SceneConfig::default(), seed).unwrap();
        assert_eq!(scene, again);
        assert_eq!(render_color(&scene, &cam, &pose).as_raw(), render_color(&again, &cam, &pose).as_raw());
        let (d0, d1) = (render_depth(&scene, &cam, &pose, 2.0), render_depth(&again, &cam, &pose, 2.0));
        assert!(d0.as_raw().iter().zip(d1.as_raw()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let f = &scene.flowers[0];
        let mic_cam = rig::microscope_camera();
        let mic_pose = pollisim::global::plan_waypoint(&(f.center + 200.0 * f.normal), &f.stigma_center(), 0.9).unwrap();
        let optics = MicroscopeOptics::default();
        let a = render_microscope_sharp(&scene, &mic_cam, &mic_pose, &optics);
        let b = render_microscope_sharp(&again, &mic_cam, &mic_pose, &optics);
        assert_eq!(a.image.as_raw(), b.image.as_raw());
        assert_eq!(a.subject_distance, b.subject_distance);
    }
}

#[test]
fn depth_returns_match_colored_pixels() {
    let cam = rig::global_camera();
    let pose = rig::global_camera_pose();
    for seed in 0..6 {
        let mut scene = generate_scene(&SceneConfig::default(), seed).unwrap();
        // A background no surface can be shaded to.
        scene.background = pollisim::Rgb8::new(0, 0, 255);
        let img = render_color(&scene, &cam, &pose);
        let depth = render_depth(&scene, &cam, &pose, 0.0);
        let mut returns = 0;
        for y in 0..cam.height {
            for x in 0..cam.width {
                let hit = depth.get(x, y).is_finite();
                assert_eq!(hit, img.get(x, y) != scene.background, "seed {seed} pixel ({x}, {y})");
                returns += usize::from(hit);
            }
        }
        assert!(returns > 1000);
    }
}
