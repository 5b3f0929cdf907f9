use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ScenarioConfig;
use super::report::{FailureReason, Stage, StageOutcome, StageReport};
use crate::error::{Error, Result};
use crate::geometry::{rot_x, Point3, Pose6D};
use crate::global::{detect_flowers, localize_flower, plan_waypoint, Detection, DetectorParams, FlowerHypothesis};
use crate::local::{
    closest_to_center, extract_flower_cloud, register_template, servo_step, two_view_depth_roi, FlowerTemplate,
};
use crate::micro::{
    autofocus, centering_step, final_approach, find_flower_center, focus_score, is_captured, lateral_offset,
    plan_contact, pollination_loop,
};
use crate::raster::{BoundingBox, DepthMap, Image, PointCloud};
use crate::rig::{BASE, ENDOSCOPE, GLOBAL_CAM};
use crate::rng::{derive_seed, stream};
use crate::scene::{
    generate_scene, render_color, render_depth, render_microscope, render_microscope_sharp, FlowerInstance,
    LeafOccluder, MicroscopeState, PlantScene, STIGMA_HEIGHT,
};

const STREAM_DETECT: u64 = 0xD37E;
const STREAM_OCCLUDE: u64 = 0x0CC1;
const STREAM_CONTACT: u64 = 0xC047;

/// Leaf injected between the endoscope and the flower, mm.
const OCCLUDER_STANDOFF: f64 = 60.0;
const OCCLUDER_RADIUS: f64 = 40.0;
const VIEW_FRAME: &str = "view";
/// Distance off the registered disk stack still counted as flower, mm.
const FLOWER_SLAB: f64 = 2.0;

/// An image captured during a run, with an optional JSON sidecar.
#[derive(Clone, Debug)]
pub struct ImageDump {
    pub name: String,
    pub image: Image,
    pub sidecar: Option<serde_json::Value>,
}

/// Wide-view capture of a scene and the hypotheses derived from it.
#[derive(Clone, Debug)]
pub struct GlobalView {
    pub image: Image,
    pub depth: DepthMap,
    pub detections: Vec<Detection>,
    pub hypotheses: Vec<FlowerHypothesis>,
}

/// Renders the wide view, detects flowers and localizes every detection
/// that has depth support.
pub fn observe_scene(scene: &PlantScene, config: &ScenarioConfig) -> Result<GlobalView> {
    let cam = &config.cameras.global;
    let pose = &config.cameras.global_pose;
    let image = render_color(scene, cam, pose);
    let depth = render_depth(scene, cam, pose, config.noise.global_depth_sigma);
    let params = DetectorParams {
        seed: derive_seed(scene.seed, STREAM_DETECT ^ config.detector.seed),
        source: GLOBAL_CAM.to_owned(),
        ..config.detector.clone()
    };
    let detections = detect_flowers(&image, &params)?;
    let hypotheses = detections
        .iter()
        .filter_map(|d| localize_flower(d, &depth, cam, pose).ok())
        .collect();
    Ok(GlobalView {
        image,
        depth,
        detections,
        hypotheses,
    })
}

/// For each flower (scene order), the hypothesis whose box contains the
/// projected flower center, nearest box center first. Each hypothesis is
/// used at most once.
pub fn match_hypotheses(scene: &PlantScene, hypotheses: &[FlowerHypothesis], config: &ScenarioConfig) -> Vec<Option<usize>> {
    let cam = &config.cameras.global;
    let to_cam = config.cameras.global_pose.inverse();
    let mut used = vec![false; hypotheses.len()];
    scene
        .flowers
        .iter()
        .map(|f| {
            let px = cam.project(&to_cam.transform_point(&f.center)).ok()?;
            let best = hypotheses
                .iter()
                .enumerate()
                .filter(|(i, h)| !used[*i] && h.detection.bbox.contains(&px))
                .min_by(|a, b| {
                    let da = a.1.detection.bbox.center().distance(&px);
                    let db = b.1.detection.bbox.center().distance(&px);
                    da.total_cmp(&db)
                })
                .map(|(i, _)| i)?;
            used[best] = true;
            Some(best)
        })
        .collect()
}

type StageResult<T> = std::result::Result<T, FailureReason>;

fn internal(_: Error) -> FailureReason {
    FailureReason::Internal
}

fn record<T>(report: &mut StageReport, stage: Stage, result: StageResult<T>) -> Option<T> {
    match result {
        Ok(v) => {
            *report.outcome_mut(stage) = StageOutcome::Success;
            Some(v)
        }
        Err(reason) => {
            *report.outcome_mut(stage) = StageOutcome::Failure { reason };
            None
        }
    }
}

struct FlowerRun<'a> {
    config: &'a ScenarioConfig,
    truth: FlowerInstance,
    report: StageReport,
    dumps: Option<&'a mut Vec<ImageDump>>,
}

impl FlowerRun<'_> {
    fn dump(&mut self, name: &str, image: &Image, sidecar: Option<serde_json::Value>) {
        if let Some(d) = self.dumps.as_deref_mut() {
            d.push(ImageDump {
                name: format!("s{}_f{}_{name}", self.report.scene_seed, self.truth.id),
                image: image.clone(),
                sidecar,
            });
        }
    }

    /// Waypoint, then PD servoing on the endoscope image until the error
    /// settles or the step budget is spent.
    fn align(&mut self, scene: &PlantScene, hypothesis: &FlowerHypothesis) -> StageResult<(Pose6D, Detection, Image)> {
        let cfg = self.config;
        let cam = &cfg.cameras.endoscope;
        let params = DetectorParams {
            p_miss: 0.0,
            source: ENDOSCOPE.to_owned(),
            ..cfg.detector.clone()
        };
        let start = cfg.cameras.global_pose.translation();
        let mut pose = plan_waypoint(start, &hypothesis.position, cfg.waypoint_fraction).map_err(internal)?;
        let lost = |scene: &PlantScene, pose: &Pose6D| {
            if scene.leaf_blocks(pose.translation(), &self.truth.center) {
                FailureReason::Occlusion
            } else {
                FailureReason::TargetLost
            }
        };
        let mut prev = None;
        let mut steps = 0;
        let (image, det) = loop {
            let image = render_color(scene, cam, &pose);
            let dets = detect_flowers(&image, &params).map_err(internal)?;
            let cmd = match servo_step(&dets, cam, &cfg.servo, prev) {
                Ok(c) => c,
                Err(Error::TargetLost) => {
                    self.report.metrics.servo_steps = Some(steps);
                    return Err(lost(scene, &pose));
                }
                Err(e) => return Err(internal(e)),
            };
            if cmd.error.norm() < cfg.servo.tolerance || steps >= cfg.servo.max_steps {
                let det = closest_to_center(&dets, cam).cloned().ok_or(FailureReason::TargetLost)?;
                break (image, det);
            }
            prev = Some(cmd.error);
            let v = pose.transform_vector(&cmd.velocity);
            pose = pose.clone().with_translation(pose.translation() + v * cfg.servo.dt);
            steps += 1;
        };
        self.report.metrics.servo_steps = Some(steps);
        let offset = det.bbox.center().distance(&cam.principal_point());
        self.report.metrics.alignment_error_px = Some(offset);
        self.dump("endoscope", &image, None);
        if scene.leaf_blocks(pose.translation(), &self.truth.center) {
            return Err(FailureReason::Occlusion);
        }
        let on_target = cam
            .project(&pose.inverse().transform_point(&self.truth.center))
            .is_ok_and(|px| det.bbox.contains(&px));
        if !on_target {
            return Err(FailureReason::WrongTarget);
        }
        if offset > cfg.servo.alignment_px {
            return Err(FailureReason::NotAligned);
        }
        Ok((pose, det, image))
    }

    /// Two-view depth inside the tracked box, then template registration.
    /// Returns the flower normal and its surface points in the base frame.
    fn estimate_pose(
        &mut self,
        scene: &PlantScene,
        pose: &Pose6D,
        det: &Detection,
        view_a: &Image,
    ) -> StageResult<(Vector3<f64>, PointCloud)> {
        let cfg = self.config;
        let cam = &cfg.cameras.endoscope;
        let st = &cfg.stereo;
        let shifted = pose.translation() + pose.transform_vector(&Vector3::new(st.baseline, 0.0, 0.0));
        let view_b = render_color(scene, cam, &pose.clone().with_translation(shifted));
        let depth = two_view_depth_roi(view_a, &view_b, st.baseline, cam, &st.matching, &det.bbox).map_err(internal)?;
        let cloud = match extract_flower_cloud(&depth, det, cam) {
            Ok(c) => c,
            Err(Error::EmptyCloud) => return Err(FailureReason::SparseCloud),
            Err(e) => return Err(internal(e)),
        };
        let mut zs: Vec<f64> = cloud.points.iter().map(|p| p.z).collect();
        let mid = zs.len() / 2;
        let median = *zs.select_nth_unstable_by(mid, f64::total_cmp).1;
        let points: Vec<Point3> = cloud
            .points
            .iter()
            .filter(|p| (p.z - median).abs() < st.depth_window)
            .copied()
            .collect();
        self.report.metrics.cloud_points = Some(points.len());
        if points.len() < st.min_points {
            return Err(FailureReason::SparseCloud);
        }
        let cloud = PointCloud::new(points, ENDOSCOPE).map_err(internal)?;
        let centroid = cloud.centroid().ok_or(FailureReason::SparseCloud)?;
        let view = Pose6D::new(rot_x(PI), centroid, ENDOSCOPE, VIEW_FRAME).map_err(internal)?;
        let local = cloud.transformed(&view.inverse()).map_err(internal)?;
        let template = FlowerTemplate::fitted_to(&local).map_err(internal)?;
        let reg = register_template(&local, &template, &cfg.registration).map_err(|e| match e {
            Error::Registration(_) | Error::EmptyCloud => FailureReason::SparseCloud,
            e => internal(e),
        })?;
        self.report.metrics.registration_mse = Some(reg.mse);
        let normal = pose.transform_vector(&view.transform_vector(&reg.pose.transform_vector(&Vector3::z())));
        let err = normal.normalize().dot(&self.truth.normal).clamp(-1.0, 1.0).acos().to_degrees();
        self.report.metrics.normal_error_deg = Some(err);
        if !reg.converged {
            return Err(FailureReason::RegistrationError);
        }
        // Contact planning only trusts points that sit on the fitted flower.
        let to_template = reg.pose.inverse();
        let on_flower: Vec<Point3> = cloud
            .points
            .iter()
            .zip(&local.points)
            .filter(|(_, q)| {
                let z = to_template.transform_point(q).z;
                (-FLOWER_SLAB..=STIGMA_HEIGHT + FLOWER_SLAB).contains(&z)
            })
            .map(|(p, _)| pose.transform_point(p))
            .collect();
        let base_cloud = PointCloud::new(on_flower, BASE).map_err(internal)?;
        Ok((normal, base_cloud))
    }

    /// Plans and executes the slide under the flower, then centers the
    /// stigma in the microscope while creeping up into focus.
    fn contact(
        &mut self,
        scene: &PlantScene,
        endoscope_pose: &Pose6D,
        normal: &Vector3<f64>,
        cloud: &PointCloud,
    ) -> StageResult<(Pose6D, MicroscopeState)> {
        let cfg = self.config;
        let tool = &cfg.tool;
        let cam = &cfg.cameras.microscope;
        let start = tool.tool_from_endoscope(endoscope_pose).map_err(internal)?;
        let plan = plan_contact(normal, cloud, &start, tool).map_err(|e| match e {
            Error::Planning(_) | Error::EmptyCloud => FailureReason::PlanningFailed,
            e => internal(e),
        })?;
        let planned = plan.execute(&start, &Vector3::zeros());
        let mut error = Vector3::zeros();
        if cfg.noise.contact_sigma > 0.0 {
            let mut rng = stream(derive_seed(scene.seed, self.truth.id as u64), STREAM_CONTACT);
            let (gx, gy): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let (x, y) = (planned.rotation().column(0).into_owned(), planned.rotation().column(1).into_owned());
            error = cfg.noise.contact_sigma * (gx * x + gy * y);
        }
        let mut pose = plan.execute(&start, &error);
        let mut state = MicroscopeState::new(
            plan.slide,
            cfg.optics.zoom_for(tool.lens_offset + plan.slide - STIGMA_HEIGHT),
        );
        let mut steps = 0;
        let result = loop {
            let mic = tool.microscope_pose(&pose, state.slide()).map_err(internal)?;
            let img = render_microscope(scene, cam, &mic, &state, &cfg.optics);
            let ellipse = match find_flower_center(&img) {
                Ok(e) => e,
                Err(_) => {
                    self.dump("centering", &img, None);
                    break Err(FailureReason::CenterNotFound);
                }
            };
            let focus = focus_score(&img, &ellipse.bbox).map_err(internal)?;
            let cmd = centering_step(&ellipse, cam.principal_point(), focus, tool, &cfg.centering);
            if cmd.done() {
                self.dump("centering", &img, None);
                break Ok(());
            }
            if steps >= cfg.centering.max_steps {
                break Err(FailureReason::CenteringTimeout);
            }
            // The flower stops the tool once the upper surface reaches it.
            let up = pose.rotation().column(2).into_owned();
            let mut t = pose.translation() + pose.transform_vector(&cmd.translation());
            let over = up.dot(&(t - self.truth.center));
            if over > 0.0 {
                t -= over * up;
            }
            pose = pose.with_translation(t);
            steps += 1;
        };
        self.report.metrics.centering_steps = Some(steps);
        self.report.metrics.cup_offset_mm = Some(lateral_offset(&pose, &self.truth.center));
        result?;
        if !is_captured(&pose, &self.truth.center, tool) {
            return Err(FailureReason::NotCaptured);
        }
        state = state.with_slide(plan.slide);
        Ok((pose, state))
    }

    /// Final approach, autofocus and the inspect/buzz loop. Succeeds when
    /// every pollinated call matches the stigma's true particle count.
    fn inspect(&mut self, scene: &mut PlantScene, tool_pose: &Pose6D, state: MicroscopeState) -> StageResult<()> {
        let cfg = self.config;
        let cam = &cfg.cameras.microscope;
        let state = final_approach(state, &cfg.tool);
        let mic = cfg.tool.microscope_pose(tool_pose, state.slide()).map_err(internal)?;
        let roi = BoundingBox::full(cam.width, cam.height);
        let view = render_microscope_sharp(scene, cam, &mic, &cfg.optics);
        let af = autofocus(&view, &roi, state, &cfg.optics, &cfg.autofocus).map_err(internal)?;
        self.report.metrics.autofocus_steps = Some(af.steps);
        self.report.metrics.focus_score = Some(af.score);
        if !af.converged {
            return Err(FailureReason::FocusFailed);
        }
        let focused = af.state;
        let mut first = Some(af.image);
        let outcome = pollination_loop(scene, self.truth.id, &cfg.pollination, |s| {
            let img = match first.take() {
                Some(img) => img,
                None => render_microscope_sharp(s, cam, &mic, &cfg.optics).focused(&focused, &cfg.optics),
            };
            let score = focus_score(&img, &roi)?;
            Ok((img, score))
        })
        .map_err(internal)?;
        let m = &mut self.report.metrics;
        m.pollen_counts = outcome.inspections.iter().map(|i| i.count).collect();
        m.final_pollen_count = m.pollen_counts.last().copied();
        m.buzzes = outcome.buzzes;
        for (k, i) in outcome.inspections.iter().enumerate() {
            if let Some(img) = &i.image {
                let sidecar = serde_json::json!({ "count": i.count, "focus_score": i.focus_score });
                self.dump(&format!("inspection{k}"), img, Some(sidecar));
            }
        }
        let threshold = cfg.pollination.threshold;
        if outcome.inspections.iter().any(|i| i.pollinated != (i.true_stigma_pollen >= threshold)) {
            return Err(FailureReason::Misclassified);
        }
        Ok(())
    }
}

/// Runs every stage after detection for one flower. The scene keeps the
/// pollen transferred by any buzz; injected occluders are removed again.
pub fn run_flower(
    scene: &mut PlantScene,
    flower_id: usize,
    hypothesis: &FlowerHypothesis,
    config: &ScenarioConfig,
) -> StageReport {
    run_flower_with_dumps(scene, flower_id, hypothesis, config, None)
}

pub fn run_flower_with_dumps(
    scene: &mut PlantScene,
    flower_id: usize,
    hypothesis: &FlowerHypothesis,
    config: &ScenarioConfig,
    dumps: Option<&mut Vec<ImageDump>>,
) -> StageReport {
    let mut report = StageReport::pending(scene.seed, flower_id);
    let Ok(truth) = scene.flower(flower_id).cloned() else {
        report.detected = StageOutcome::Failure {
            reason: FailureReason::Internal,
        };
        return report;
    };
    report.detected = StageOutcome::Success;
    let leaves = scene.leaves.len();
    if config.noise.occlusion_rate > 0.0 {
        let mut rng = stream(derive_seed(scene.seed, flower_id as u64), STREAM_OCCLUDE);
        if rng.gen::<f64>() < config.noise.occlusion_rate {
            let from = config.cameras.global_pose.translation();
            let dir = (truth.center - from).normalize();
            scene.leaves.push(LeafOccluder {
                center: truth.center - OCCLUDER_STANDOFF * dir,
                normal: -dir,
                radius: OCCLUDER_RADIUS,
                color: config.scene.colors.leaf,
            });
        }
    }
    let mut run = FlowerRun {
        config,
        truth,
        report,
        dumps,
    };
    run_stages(&mut run, scene, hypothesis);
    scene.leaves.truncate(leaves);
    run.report.metrics.true_stigma_pollen = scene.flower(flower_id).map_or(0, |f| f.pollen.stigma);
    run.report
}

fn run_stages(run: &mut FlowerRun<'_>, scene: &mut PlantScene, hypothesis: &FlowerHypothesis) {
    let aligned = run.align(scene, hypothesis);
    let Some((pose, det, image)) = record(&mut run.report, Stage::Alignment, aligned) else {
        return;
    };
    let estimated = run.estimate_pose(scene, &pose, &det, &image);
    let Some((normal, cloud)) = record(&mut run.report, Stage::PoseEstimation, estimated) else {
        return;
    };
    let contacted = run.contact(scene, &pose, &normal, &cloud);
    let Some((tool_pose, state)) = record(&mut run.report, Stage::Contact, contacted) else {
        return;
    };
    let inspected = run.inspect(scene, &tool_pose, state);
    record(&mut run.report, Stage::Inspection, inspected);
}

/// Reports (scene flower order) and captured images for one seeded scene.
#[derive(Clone, Debug)]
pub struct SceneRun {
    pub reports: Vec<StageReport>,
    pub dumps: Vec<ImageDump>,
}

pub fn run_scene(config: &ScenarioConfig, seed: u64) -> Result<SceneRun> {
    let mut scene = generate_scene(&config.scene, seed)?;
    let global = observe_scene(&scene, config)?;
    let matches = match_hypotheses(&scene, &global.hypotheses, config);
    let mut dumps = Vec::new();
    if config.dump_images {
        dumps.push(ImageDump {
            name: format!("s{seed}_global"),
            image: global.image.clone(),
            sidecar: None,
        });
    }
    let mut reports = Vec::with_capacity(scene.flowers.len());
    for (index, m) in matches.into_iter().enumerate() {
        let id = scene.flowers[index].id;
        let report = match m {
            Some(h) => {
                let sink = config.dump_images.then_some(&mut dumps);
                run_flower_with_dumps(&mut scene, id, &global.hypotheses[h], config, sink)
            }
            None => {
                let mut r = StageReport::pending(seed, id);
                r.detected = StageOutcome::Failure {
                    reason: FailureReason::NotDetected,
                };
                r.metrics.true_stigma_pollen = scene.flowers[index].pollen.stigma;
                r
            }
        };
        reports.push(report);
    }
    Ok(SceneRun { reports, dumps })
}
