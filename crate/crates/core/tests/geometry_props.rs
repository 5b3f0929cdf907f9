use nalgebra::Vector3;
use pollisim::geometry::{axis_angle, rgb_to_hsv, PixelCoord, Pose6D, Rgb8};
use pollisim::rig;
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose6D> {
    (vec3(1.0), 0.0..std::f64::consts::PI, vec3(500.0)).prop_filter_map("degenerate axis", |(axis, angle, t)| {
        let axis = axis.try_normalize(1e-3)?;
        Pose6D::new(axis_angle(&axis, angle), t, "a", "b").ok()
    })
}

proptest! {
    #[test]
    fn poses_preserve_distances(p in pose(), a in vec3(1000.0), b in vec3(1000.0)) {
        let d0 = (a - b).norm();
        let d1 = (p.transform_point(&a) - p.transform_point(&b)).norm();
        prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
    }

    #[test]
    fn inverse_composes_to_identity(p in pose(), x in vec3(1000.0)) {
        let id = p.compose(&p.inverse()).unwrap();
        prop_assert!(id.is_identity(1e-9));
        let back = p.inverse().transform_point(&p.transform_point(&x));
        prop_assert!((back - x).norm() <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn composition_is_associative(a in pose(), b in pose(), c in pose(), x in vec3(100.0)) {
        let b = b.relabel("b", "c");
        let c = c.relabel("c", "d");
        let left = a.compose(&b).unwrap().compose(&c).unwrap();
        let right = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!((left.transform_point(&x) - right.transform_point(&x)).norm() <= 1e-8);
    }

    #[test]
    fn grey_has_zero_saturation(g in any::<u8>()) {
        let hsv = rgb_to_hsv(Rgb8::new(g, g, g));
        prop_assert_eq!((hsv.h, hsv.s, hsv.v), (0, 0, g));
    }

    #[test]
    fn value_is_the_max_channel(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        prop_assert_eq!(rgb_to_hsv(Rgb8::new(r, g, b)).v, r.max(g).max(b));
    }
}

#[test]
fn project_backproject_round_trip_on_every_preset() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for cam in [rig::global_camera(), rig::endoscope_camera(), rig::microscope_camera()] {
        for _ in 0..1000 {
            let px = PixelCoord::new(rng.gen_range(0.0..f64::from(cam.width)), rng.gen_range(0.0..f64::from(cam.height)));
            let depth = rng.gen_range(cam.near..cam.far);
            let back = cam.project(&cam.backproject(px, depth).unwrap()).unwrap();
            assert!(back.distance(&px) <= 1e-6, "{px:?} -> {back:?}");
        }
    }
}
