use criterion::{black_box, criterion_group, criterion_main, Criterion};
use pollisim::global::{detect_flowers, DetectorParams};
use pollisim::imgproc::disk_blur;
use pollisim::local::{closest_to_center, register_template, two_view_depth_roi, MatchParams, RegParams};
use pollisim::micro::{count_pollen, focus_score};
use pollisim::pipeline::{run_scene, ScenarioConfig};
use pollisim::raster::BoundingBox;
use pollisim::rig;
use pollisim::scene::render_color;
use pollisim_bench as fx;

fn rendering(c: &mut Criterion) {
    let scene = fx::scene(1);
    let pose = fx::waypoint_pose(&scene);
    let cam = rig::endoscope_camera();
    c.bench_function("render_endoscope", |b| b.iter(|| render_color(black_box(&scene), &cam, &pose)));
    c.bench_function("render_microscope_sharp", |b| b.iter(|| fx::microscope_view(black_box(&scene))));
}

fn global(c: &mut Criterion) {
    let scene = fx::scene(1);
    let img = render_color(&scene, &rig::global_camera(), &rig::global_camera_pose());
    let params = DetectorParams::default();
    c.bench_function("detect_flowers", |b| b.iter(|| detect_flowers(black_box(&img), &params).unwrap()));
}

fn local(c: &mut Criterion) {
    let scene = fx::scene(1);
    let (a, b_img, _) = fx::stereo_pair(&scene);
    let cam = rig::endoscope_camera();
    let params = DetectorParams {
        source: rig::ENDOSCOPE.into(),
        ..DetectorParams::default()
    };
    let dets = detect_flowers(&a, &params).unwrap();
    let roi = closest_to_center(&dets, &cam).expect("flower in view").bbox;
    let matching = MatchParams::default();
    c.bench_function("two_view_depth_roi", |b| {
        b.iter(|| two_view_depth_roi(black_box(&a), &b_img, 5.0, &cam, &matching, &roi).unwrap())
    });

    let (tpl, cloud) = fx::displaced_template_cloud();
    let reg = RegParams::default();
    let mut group = c.benchmark_group("registration");
    group.sample_size(10);
    group.bench_function("register_template", |b| b.iter(|| register_template(black_box(&cloud), &tpl, &reg).unwrap()));
    group.finish();
}

fn micro(c: &mut Criterion) {
    let view = fx::microscope_view(&fx::scene(1));
    let roi = BoundingBox::full(view.image.width(), view.image.height());
    c.bench_function("focus_score", |b| b.iter(|| focus_score(black_box(&view.image), &roi).unwrap()));
    c.bench_function("disk_blur_r5", |b| b.iter(|| disk_blur(black_box(&view.image), 5.0)));
    c.bench_function("count_pollen", |b| b.iter(|| count_pollen(black_box(&view.image))));
}

fn end_to_end(c: &mut Criterion) {
    let mut config = ScenarioConfig::default();
    config.scene.n_flowers = 1;
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("run_scene_one_flower", |b| b.iter(|| run_scene(black_box(&config), 3).unwrap()));
    group.finish();
}

criterion_group!(benches, rendering, global, local, micro, end_to_end);
criterion_main!(benches);
