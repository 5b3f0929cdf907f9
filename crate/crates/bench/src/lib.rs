//! Deterministic fixtures shared by the benchmarks.

use pollisim::geometry::{axis_angle, from_axes};
use pollisim::global::plan_waypoint;
use pollisim::local::FlowerTemplate;
use pollisim::raster::{Image, PointCloud};
use pollisim::rig;
use pollisim::scene::{generate_scene, render_color, render_microscope_sharp, PlantScene, SceneConfig, SharpMicroscopeView};
use pollisim::{Point3, Pose6D};

/// Default five-flower scene.
pub fn scene(seed: u64) -> PlantScene {
    generate_scene(&SceneConfig::default(), seed).expect("default config generates")
}

/// Endoscope pose at the default approach waypoint of flower 0.
pub fn waypoint_pose(scene: &PlantScene) -> Pose6D {
    let global = rig::global_camera_pose();
    plan_waypoint(global.translation(), &scene.flowers[0].center, 0.6).expect("distinct points")
}

/// Endoscope view from the waypoint and from 5 mm to its right.
pub fn stereo_pair(scene: &PlantScene) -> (Image, Image, Pose6D) {
    let cam = rig::endoscope_camera();
    let a = waypoint_pose(scene);
    let b = a.clone().with_translation(a.translation() + a.transform_vector(&Point3::new(5.0, 0.0, 0.0)));
    (render_color(scene, &cam, &a), render_color(scene, &cam, &b), a)
}

/// Sharp microscope view from beneath flower 0 at the inspection slide.
pub fn microscope_view(scene: &PlantScene) -> SharpMicroscopeView {
    let f = &scene.flowers[0];
    let (e1, e2, n) = f.local_axes();
    let tool = rig::ToolParams::default();
    let pose = Pose6D::new(from_axes(&e1, &e2, &n), f.center - 1.5 * n, rig::BASE, rig::TOOL).expect("orthonormal");
    let mic = tool.microscope_pose(&pose, tool.slide_inspect).expect("tool frame");
    render_microscope_sharp(scene, &rig::microscope_camera(), &mic, &Default::default())
}

/// Canonical template moved by a fixed 20° / 12 mm offset.
pub fn displaced_template_cloud() -> (FlowerTemplate, PointCloud) {
    let tpl = FlowerTemplate::canonical();
    let r = axis_angle(&Point3::new(1.0, 2.0, 0.5).normalize(), 20f64.to_radians());
    let t = Point3::new(8.0, -6.0, 6.0);
    let points = tpl.cloud.points.iter().map(|p| r * p + t).collect();
    (tpl, PointCloud::new(points, "observed").expect("finite points"))
}
