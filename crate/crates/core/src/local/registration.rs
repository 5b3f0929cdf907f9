use std::collections::BTreeMap;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::template::{FlowerTemplate, TEMPLATE_FRAME};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle, nearest_rotation, proper_rotation, rotation_angle, rotation_between, to_axis_angle, Point3, Pose6D};
use crate::raster::PointCloud;
use crate::rng;

const STREAM_RANSAC: u64 = 0x4A5C;
/// Extra applications of a consistent ICP update tried per iteration.
const EXTRAPOLATION_STEPS: usize = 4;
const MAX_EXTRAPOLATION: usize = 32;
/// Coarse results closer than this to a better one are not refined again.
const DUPLICATE_ANGLE: f64 = 0.05;
const DUPLICATE_SHIFT: f64 = 1.0;
/// Hypotheses whose mean truncated cost over the first few scoring points
/// exceeds this share of the truncation level are not scored further.
const PREEMPT_POINTS: usize = 16;
const PREEMPT_FRACTION: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegParams {
    /// Voxel edge for downsampling both clouds, mm.
    pub voxel: f64,
    /// Hypothesis count.
    pub iterations: usize,
    /// Distance below which a point counts as an inlier, mm.
    pub inlier_threshold: f64,
    /// Allowed mismatch of pairwise distances within a triplet, mm.
    pub pair_tolerance: f64,
    /// Smallest pairwise distance within a sampled cloud triplet, mm.
    pub min_triplet_spread: f64,
    /// Cloud points used to score hypotheses.
    pub score_points: usize,
    /// Best-scoring RANSAC hypotheses given a short ICP on the scoring
    /// subset, alongside the structured ones.
    pub coarse_candidates: usize,
    pub coarse_iterations: usize,
    /// Best coarse results refined by full ICP.
    pub top_k: usize,
    /// Spins tried about the cloud's fitted plane normal, per orientation.
    pub spin_steps: usize,
    pub icp_iterations: usize,
    /// Pairs farther apart than this are ignored by ICP, mm.
    pub icp_max_distance: f64,
    /// ICP stops when rotation (rad) plus translation (mm) change drops below this.
    pub icp_tolerance: f64,
    /// Registration succeeds when the pair mse is below this, mm².
    pub mse_threshold: f64,
    pub seed: u64,
}

impl Default for RegParams {
    fn default() -> Self {
        Self {
            voxel: 1.0,
            iterations: 2000,
            inlier_threshold: 1.5,
            pair_tolerance: 1.5,
            min_triplet_spread: 3.0,
            score_points: 96,
            coarse_candidates: 32,
            coarse_iterations: 10,
            top_k: 3,
            spin_steps: 24,
            icp_iterations: 50,
            icp_max_distance: 5.0,
            icp_tolerance: 1e-4,
            mse_threshold: 4.0,
            seed: 0,
        }
    }
}

impl RegParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.voxel, self.inlier_threshold, self.pair_tolerance, self.icp_max_distance, self.mse_threshold];
        if positive.iter().any(|v| !(*v > 0.0)) || self.icp_tolerance < 0.0 {
            return Err(Error::Config("registration: distances and thresholds must be positive".into()));
        }
        if self.score_points == 0 || self.top_k == 0 {
            return Err(Error::Config("registration: score_points and top_k must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Template → observed cloud frame.
    pub pose: Pose6D,
    /// Mean squared distance of the ICP pairs, mm².
    pub mse: f64,
    /// Share of downsampled cloud points within the inlier threshold.
    pub inlier_fraction: f64,
    pub converged: bool,
}

/// One point per occupied voxel: the member nearest the voxel centroid.
/// Output is ordered by voxel index.
pub fn voxel_downsample(points: &[Point3], voxel: f64) -> Vec<Point3> {
    let mut cells: BTreeMap<(i64, i64, i64), Vec<Point3>> = BTreeMap::new();
    for p in points {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        cells.entry(key).or_default().push(*p);
    }
    cells
        .into_values()
        .map(|members| {
            let c = members.iter().sum::<Vector3<f64>>() / members.len() as f64;
            members
                .into_iter()
                .min_by(|a, b| (a - c).norm_squared().total_cmp(&(b - c).norm_squared()))
                .expect("occupied voxel")
        })
        .collect()
}

/// Unit normal of the least-squares plane through `points`.
fn plane_normal(points: &[Point3]) -> Vector3<f64> {
    let c = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let cov: Matrix3<f64> = points.iter().map(|p| (p - c) * (p - c).transpose()).sum();
    let eig = cov.symmetric_eigen();
    eig.eigenvectors.column(eig.eigenvalues.imin()).normalize()
}

/// Least-squares rigid transform with `dst ≈ R·src + t`.
pub fn kabsch(src: &[Point3], dst: &[Point3]) -> (Matrix3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let cs: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
    let cd: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;
    let h: Matrix3<f64> = src.iter().zip(dst).map(|(s, d)| (s - cs) * (d - cd).transpose()).sum();
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let r = proper_rotation(v_t.transpose(), &svd.singular_values, u.transpose());
    (r, cd - r * cs)
}

struct Rigid {
    r: Matrix3<f64>,
    t: Vector3<f64>,
}

impl Rigid {
    /// Observed point mapped back into the template frame.
    fn to_template(&self, p: &Point3) -> Point3 {
        self.r.transpose() * (p - self.t)
    }
}

struct Matcher {
    tree: ImmutableKdTree<f64, u64, 3, 32>,
    template: Vec<Point3>,
    /// Generic rotation applied to tree coordinates; the tree builder
    /// misbehaves when many points share an axis value, as on a grid.
    skew: Matrix3<f64>,
}

impl Matcher {
    fn new(points: &[Point3]) -> Self {
        let mut template = points.to_vec();
        template.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));
        template.dedup();
        let skew = axis_angle(&Vector3::new(0.31, -0.57, 0.76), 0.913);
        let coords: Vec<[f64; 3]> = template
            .iter()
            .map(|p| {
                let q = skew * p;
                [q.x, q.y, q.z]
            })
            .collect();
        Self {
            tree: ImmutableKdTree::new_from_slice(&coords),
            template,
            skew,
        }
    }

    /// Squared distance and index of the template point nearest `q`.
    fn nearest(&self, q: &Point3) -> (f64, usize) {
        let q = self.skew * q;
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (nn.distance, nn.item as usize)
    }

    fn inliers(&self, h: &Rigid, cloud: &[Point3], threshold: f64) -> usize {
        let t2 = threshold * threshold;
        cloud.iter().filter(|c| self.nearest(&h.to_template(c)).0 <= t2).count()
    }

    /// Truncated squared residual summed over `cloud`; lower is better.
    fn cost(&self, h: &Rigid, cloud: &[Point3], threshold: f64) -> f64 {
        let t2 = threshold * threshold;
        cloud.iter().map(|c| self.nearest(&h.to_template(c)).0.min(t2)).sum()
    }

    /// Point-to-point ICP with extrapolation along consistent update
    /// directions. Returns the refined transform and the mse of the final
    /// pairs.
    fn icp(&self, start: Rigid, cloud: &[Point3], iterations: usize, params: &RegParams) -> (Rigid, f64) {
        let max2 = params.icp_max_distance * params.icp_max_distance;
        let mut src = Vec::with_capacity(cloud.len());
        let mut dst = Vec::with_capacity(cloud.len());
        // Fills the pairs for `h`; returns (truncated cost, pair mse).
        let pairs = |h: &Rigid, src: &mut Vec<Point3>, dst: &mut Vec<Point3>| {
            src.clear();
            dst.clear();
            let (mut sq, mut cost) = (0.0, 0.0);
            for c in cloud {
                let (d2, i) = self.nearest(&h.to_template(c));
                cost += d2.min(max2);
                if d2 <= max2 {
                    src.push(self.template[i]);
                    dst.push(*c);
                    sq += d2;
                }
            }
            let mse = if src.is_empty() { f64::INFINITY } else { sq / src.len() as f64 };
            (cost, mse)
        };
        let mut h = start;
        let (mut cost, mut mse) = pairs(&h, &mut src, &mut dst);
        let mut prev_step: Option<[f64; 6]> = None;
        let mut reach = EXTRAPOLATION_STEPS;
        for _ in 0..iterations {
            if src.len() < 3 {
                break;
            }
            let (r, t) = kabsch(&src, &dst);
            // Increment taking the current pose to the new one.
            let dr = r * h.r.transpose();
            let dt = t - dr * h.t;
            let (axis, angle) = to_axis_angle(&dr);
            let w = axis * angle;
            let step = [w.x, w.y, w.z, dt.x, dt.y, dt.z];
            let delta = angle + dt.norm();
            let mut next = Rigid { r, t };
            let (mut c_next, mut m_next) = pairs(&next, &mut src, &mut dst);
            if let Some(prev) = prev_step {
                let dot: f64 = prev.iter().zip(&step).map(|(a, b)| a * b).sum();
                let norms = prev.iter().map(|a| a * a).sum::<f64>().sqrt() * step.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norms > 0.0 && dot > 0.95 * norms {
                    let (mut er, mut et) = (next.r, next.t);
                    for _ in 0..reach {
                        er = dr * er;
                        et = dr * et + dt;
                    }
                    let ahead = Rigid { r: nearest_rotation(&er), t: et };
                    let mut s2 = Vec::with_capacity(cloud.len());
                    let mut d2 = Vec::with_capacity(cloud.len());
                    let (c_ahead, m_ahead) = pairs(&ahead, &mut s2, &mut d2);
                    if c_ahead < c_next {
                        next = ahead;
                        (c_next, m_next) = (c_ahead, m_ahead);
                        src = s2;
                        dst = d2;
                        reach = (reach * 2).min(MAX_EXTRAPOLATION);
                    } else {
                        reach = EXTRAPOLATION_STEPS;
                    }
                }
            }
            prev_step = Some(step);
            let improved = c_next <= cost;
            h = next;
            (cost, mse) = (c_next, m_next);
            if delta < params.icp_tolerance || !improved && delta < 10.0 * params.icp_tolerance {
                break;
            }
        }
        (h, mse)
    }
}

/// Index of a uniformly chosen element of `candidates`, if any.
fn pick(rng: &mut impl Rng, candidates: &[usize]) -> Option<usize> {
    (!candidates.is_empty()).then(|| candidates[rng.gen_range(0..candidates.len())])
}

/// Rigid pose of `template` within `cloud`. Hypotheses come from seeded
/// triplet RANSAC plus a spin sweep about the fitted plane, are ranked on
/// downsampled points, and the best few are refined by ICP against the
/// full template.
pub fn register_template(cloud: &PointCloud, template: &FlowerTemplate, params: &RegParams) -> Result<RegistrationResult> {
    params.validate()?;
    if cloud.len() < 3 {
        return Err(Error::Registration(format!("cloud has {} points, need ≥ 3", cloud.len())));
    }
    let tpl = voxel_downsample(&template.cloud.points, params.voxel);
    let obs = voxel_downsample(&cloud.points, params.voxel);
    if tpl.len() < 3 || obs.len() < 3 {
        return Err(Error::Registration("fewer than 3 points after downsampling".into()));
    }
    let matcher = Matcher::new(&tpl);
    let fine = Matcher::new(&template.cloud.points);
    let stride = obs.len().div_ceil(params.score_points).max(1);
    let subset: Vec<Point3> = obs.iter().step_by(stride).copied().collect();

    let centroid = |pts: &[Point3]| pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let (c_obs, c_tpl) = (centroid(&obs), centroid(&tpl));
    let mut hypotheses = vec![Rigid {
        r: Matrix3::identity(),
        t: c_obs - c_tpl,
    }];
    // Template normal onto either orientation of the cloud's best-fit
    // plane, at evenly spaced spins about it.
    let n = plane_normal(&obs);
    for normal in [n, -n] {
        let align = rotation_between(&template.normal, &normal);
        for k in 0..params.spin_steps {
            let spin = std::f64::consts::TAU * k as f64 / params.spin_steps as f64;
            let r = align * axis_angle(&template.normal, spin);
            hypotheses.push(Rigid { r, t: c_obs - r * c_tpl });
        }
    }
    let mut rng = rng::stream(params.seed, STREAM_RANSAC);
    let tol = params.pair_tolerance;
    let mut near2 = Vec::with_capacity(tpl.len());
    let mut near3 = Vec::with_capacity(tpl.len());
    for _ in 0..params.iterations {
        let (i, j, k) = (rng.gen_range(0..obs.len()), rng.gen_range(0..obs.len()), rng.gen_range(0..obs.len()));
        let (c1, c2, c3) = (obs[i], obs[j], obs[k]);
        let (d12, d13, d23) = ((c1 - c2).norm(), (c1 - c3).norm(), (c2 - c3).norm());
        if d12.min(d13).min(d23) < params.min_triplet_spread {
            continue;
        }
        let a = rng.gen_range(0..tpl.len());
        let t1 = tpl[a];
        // |‖x‖ − d| ≤ tol as a band on ‖x‖².
        let band = |d: f64| ((d - tol).max(0.0).powi(2), (d + tol).powi(2));
        let within = |x: f64, (lo, hi): (f64, f64)| lo <= x && x <= hi;
        let (b12, b13, b23) = (band(d12), band(d13), band(d23));
        near2.clear();
        near2.extend((0..tpl.len()).filter(|&b| within((tpl[b] - t1).norm_squared(), b12)));
        let Some(b) = pick(&mut rng, &near2) else { continue };
        let t2 = tpl[b];
        near3.clear();
        near3.extend(
            (0..tpl.len())
                .filter(|&c| within((tpl[c] - t1).norm_squared(), b13) && within((tpl[c] - t2).norm_squared(), b23)),
        );
        let Some(c) = pick(&mut rng, &near3) else { continue };
        let (r, t) = kabsch(&[t1, t2, tpl[c]], &[c1, c2, c3]);
        hypotheses.push(Rigid { r, t });
    }

    let structured = 1 + 2 * params.spin_steps;
    let probe = &subset[..subset.len().min(PREEMPT_POINTS)];
    let reject = PREEMPT_FRACTION * params.inlier_threshold.powi(2) * probe.len() as f64;
    let costs: Vec<f64> = hypotheses[structured..]
        .par_iter()
        .map(|h| {
            // Most random triplets are hopeless; a short probe settles them.
            if matcher.cost(h, probe, params.inlier_threshold) > reject {
                f64::INFINITY
            } else {
                matcher.cost(h, &subset, params.inlier_threshold)
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..costs.len()).collect();
    // Stable sort keeps the lowest index first among equal costs.
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut pool: Vec<usize> = (0..structured).collect();
    pool.extend(order.iter().take(params.coarse_candidates).map(|&i| i + structured));

    // Short ICP on the scoring subset before committing to full refinement.
    let coarse: Vec<(Rigid, f64)> = pool
        .par_iter()
        .map(|&idx| {
            let h = &hypotheses[idx];
            let (h, _) = fine.icp(Rigid { r: h.r, t: h.t }, &subset, params.coarse_iterations, params);
            let cost = fine.cost(&h, &obs, params.inlier_threshold);
            (h, cost)
        })
        .collect();
    let mut ranked: Vec<usize> = (0..coarse.len()).collect();
    ranked.sort_by(|&a, &b| coarse[a].1.total_cmp(&coarse[b].1));
    // Skip results that duplicate an already chosen pose.
    let mut order: Vec<usize> = Vec::with_capacity(params.top_k);
    for i in ranked {
        let h = &coarse[i].0;
        let duplicate = order.iter().any(|&j| {
            let g = &coarse[j].0;
            rotation_angle(&(h.r * g.r.transpose())) < DUPLICATE_ANGLE && (h.t - g.t).norm() < DUPLICATE_SHIFT
        });
        if !duplicate {
            order.push(i);
            if order.len() == params.top_k {
                break;
            }
        }
    }

    let refined: Vec<(Rigid, f64, f64)> = order
        .par_iter()
        .map(|&idx| {
            let h = &coarse[idx].0;
            let (h, mse) = fine.icp(Rigid { r: h.r, t: h.t }, &obs, params.icp_iterations, params);
            let cost = fine.cost(&h, &obs, params.inlier_threshold);
            (h, mse, cost)
        })
        .collect();
    let (best, mse, _) = refined
        .into_iter()
        .reduce(|a, b| if b.2 < a.2 { b } else { a })
        .expect("top_k ≥ 1");
    let inliers = fine.inliers(&best, &obs, params.inlier_threshold);

    let pose = Pose6D::from_approx(best.r, best.t, cloud.frame.clone(), TEMPLATE_FRAME);
    Ok(RegistrationResult {
        pose,
        mse,
        inlier_fraction: inliers as f64 / obs.len() as f64,
        converged: mse < params.mse_threshold,
    })
}

/// Outward normal of a converged registration, in the cloud frame.
pub fn flower_normal(reg: &RegistrationResult) -> Result<Vector3<f64>> {
    if !reg.converged {
        return Err(Error::Contract("flower_normal needs a converged registration".into()));
    }
    Ok(reg.pose.transform_vector(&Vector3::z()).normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_x, rot_z};

    #[test]
    fn kabsch_recovers_exact_transform() {
        let src = [Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0), Point3::new(0.0, 2.0, 1.0), Point3::new(1.0, 1.0, -1.0)];
        let r = rot_z(0.3) * rot_x(-0.2);
        let t = Vector3::new(1.0, -2.0, 0.5);
        let dst: Vec<Point3> = src.iter().map(|p| r * p + t).collect();
        let (re, te) = kabsch(&src, &dst);
        assert!((re - r).norm() < 1e-12 && (te - t).norm() < 1e-12);
    }

    #[test]
    fn self_registration_is_identity() {
        let t = FlowerTemplate::canonical();
        let res = register_template(&t.cloud, &t, &RegParams::default()).unwrap();
        assert!(res.pose.is_identity(1e-6), "{:?}", res.pose);
        assert!(res.mse < 1e-12 && res.converged);
        assert!((flower_normal(&res).unwrap() - Vector3::z()).norm() < 1e-9);
    }

    #[test]
    fn too_small_cloud_is_rejected() {
        let cloud = PointCloud::new(vec![Point3::zeros(); 2], "cam").unwrap();
        assert!(matches!(
            register_template(&cloud, &FlowerTemplate::canonical(), &RegParams::default()),
            Err(Error::Registration(_))
        ));
    }

    #[test]
    fn normal_needs_convergence() {
        let mut res = RegistrationResult {
            pose: Pose6D::new(rot_x(std::f64::consts::FRAC_PI_2), Vector3::zeros(), "cam", TEMPLATE_FRAME).unwrap(),
            mse: 0.0,
            inlier_fraction: 1.0,
            converged: true,
        };
        let n = flower_normal(&res).unwrap();
        assert!((n - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        res.converged = false;
        assert!(matches!(flower_normal(&res), Err(Error::Contract(_))));
    }
}

