//! Regularized Gauss-Newton fusion of the contour and interior energies
//! over a coarse-to-fine schedule.

use nalgebra::{Matrix2x3, Matrix3x6, Matrix6, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::contour::{contour_correspondences, contour_weight, ContourCorrespondence, DirectionTable, FanSearchParams};
use crate::error::{Error, Result};
use crate::flow::{interior_weight, InteriorCorrespondence};
use crate::geometry::{skew, CameraIntrinsics, Pose, Twist};
use crate::segmentation::ProbMap;
use crate::viewpoint::ViewpointModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Fan opening, degrees.
    pub a_reg: f64,
    /// Search line length, pixels.
    pub l_src: usize,
    /// Pixels; sets the width of the contour weight.
    pub sigma_sched: f64,
    pub gamma: f64,
    /// Share of the contour energy.
    pub lambda: f64,
    pub search_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSchedule {
    pub stages: Vec<Stage>,
    pub gn_iters_per_search: usize,
    pub b2: f64,
    pub lambda_r: f64,
    pub lambda_t: f64,
    /// Fewer valid contour correspondences than this in the last stage
    /// loses the track.
    pub min_valid_contours: usize,
}

impl Default for OptimizerSchedule {
    fn default() -> Self {
        let stage = |a_reg, l_src, sigma_sched, gamma, lambda, search_iters| Stage {
            a_reg,
            l_src,
            sigma_sched,
            gamma,
            lambda,
            search_iters,
        };
        Self {
            stages: vec![
                stage(60.0, 73, 8.0, 0.1, 0.4, 1),
                stage(40.0, 43, 4.0, 0.5, 0.6, 2),
                stage(20.0, 23, 2.0, 1.5, 0.8, 2),
                stage(0.0, 13, 1.0, 2.5, 0.9, 4),
            ],
            gn_iters_per_search: 3,
            b2: 0.2,
            lambda_r: 5000.0,
            lambda_t: 500_000.0,
            min_valid_contours: 10,
        }
    }
}

impl OptimizerSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.stages.is_empty() {
            return bad("schedule has no stages".into());
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.lambda)
                || !(s.sigma_sched > 0.0 && s.sigma_sched.is_finite())
                || !(s.gamma >= 0.0 && s.gamma.is_finite())
                || s.l_src % 2 == 0
            {
                return bad(format!("stage {i} has an invalid lambda, sigma, gamma or even line length"));
            }
        }
        for w in self.stages.windows(2) {
            if w[1].lambda < w[0].lambda || w[1].sigma_sched >= w[0].sigma_sched || w[1].l_src >= w[0].l_src {
                return bad("stages must tighten: lambda nondecreasing, sigma and line length decreasing".into());
            }
        }
        let finite = [self.lambda_r, self.lambda_t, self.b2].iter().all(|v| v.is_finite());
        if !(finite && self.lambda_r > 0.0 && self.lambda_t > 0.0 && self.b2 >= 0.0) {
            return bad("regularizers must be positive and b2 nonnegative, all finite".into());
        }
        Ok(())
    }

    pub fn total_gn_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.search_iters * self.gn_iters_per_search).sum()
    }
}

/// Derivative of a camera-frame point under a left twist update.
fn point_jacobian(xc: &Vector3<f64>) -> Matrix3x6<f64> {
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(xc)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&nalgebra::Matrix3::identity());
    j
}

fn image_jacobian(xm: &Vector3<f64>, pose: &Pose, k: &CameraIntrinsics) -> Result<(Vector3<f64>, nalgebra::Matrix2x6<f64>)> {
    let xc = pose.transform_point(xm);
    k.project_camera(&xc)?;
    let jp: Matrix2x3<f64> = k.projection_jacobian(&xc);
    Ok((xc, jp * point_jacobian(&xc)))
}

/// Residual of a contour correspondence at `pose`.
pub fn contour_residual_at(corr: &ContourCorrespondence, pose: &Pose, k: &CameraIntrinsics) -> Result<f64> {
    let x = k.project(pose, &corr.x_model)?;
    Ok(corr.n.dot(&x) - corr.mu)
}

/// Residual of an interior correspondence at `pose`.
pub fn interior_residual_at(corr: &InteriorCorrespondence, pose: &Pose, k: &CameraIntrinsics) -> Result<f64> {
    let x = k.project(pose, &corr.x_model)?;
    Ok((corr.x_in_prime - x).norm())
}

pub fn contour_jacobian(corr: &ContourCorrespondence, pose: &Pose, k: &CameraIntrinsics) -> Result<Vector6<f64>> {
    let (_, j) = image_jacobian(&corr.x_model, pose, k)?;
    Ok((corr.n.transpose() * j).transpose())
}

pub fn interior_jacobian(corr: &InteriorCorrespondence, pose: &Pose, k: &CameraIntrinsics) -> Result<Vector6<f64>> {
    let (xc, j) = image_jacobian(&corr.x_model, pose, k)?;
    let x = k.project_camera(&xc)?;
    let d: Vector2<f64> = corr.x_in_prime - x;
    let r = d.norm();
    if r == 0.0 {
        return Ok(Vector6::zeros());
    }
    Ok((-(d / r).transpose() * j).transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEquations {
    pub h: Matrix6<f64>,
    pub g: Vector6<f64>,
}

impl Default for NormalEquations {
    fn default() -> Self {
        Self { h: Matrix6::zeros(), g: Vector6::zeros() }
    }
}

impl NormalEquations {
    fn add(&mut self, j: &Vector6<f64>, r: f64, scale: f64) {
        self.g += j * (scale * r);
        self.h += j * j.transpose() * scale;
    }
}

/// Weights of both modalities at one pose; held fixed during a step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenWeights {
    pub contour: Vec<f64>,
    pub interior: Vec<f64>,
}

impl FrozenWeights {
    pub fn at(
        contours: &[ContourCorrespondence],
        interiors: &[InteriorCorrespondence],
        beta: f64,
        gamma: f64,
        pose: &Pose,
        k: &CameraIntrinsics,
    ) -> Self {
        let contour = contours
            .iter()
            .map(|c| match contour_residual_at(c, pose, k) {
                Ok(r) if c.valid => contour_weight(r, c.sigma_shp * c.sigma_noi, beta),
                _ => 0.0,
            })
            .collect();
        let interior = interiors
            .iter()
            .map(|c| interior_residual_at(c, pose, k).map_or(0.0, |r| interior_weight(r, c.c_in, gamma)))
            .collect();
        Self { contour, interior }
    }
}

/// Gradient and Gauss-Newton Hessian with the given weights.
pub fn accumulate_weighted(
    contours: &[ContourCorrespondence],
    interiors: &[InteriorCorrespondence],
    weights: &FrozenWeights,
    lambda: f64,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> NormalEquations {
    let mut ne = NormalEquations::default();
    if lambda > 0.0 {
        for (c, &w) in contours.iter().zip(&weights.contour) {
            if w == 0.0 {
                continue;
            }
            if let (Ok(r), Ok(j)) = (contour_residual_at(c, pose, k), contour_jacobian(c, pose, k)) {
                ne.add(&j, r, lambda * 0.5 * w);
            }
        }
    }
    if lambda < 1.0 {
        for (c, &w) in interiors.iter().zip(&weights.interior) {
            if w == 0.0 {
                continue;
            }
            if let (Ok(r), Ok(j)) = (interior_residual_at(c, pose, k), interior_jacobian(c, pose, k)) {
                ne.add(&j, r, (1.0 - lambda) * 0.5 * w);
            }
        }
    }
    ne
}

/// Normal equations with weights evaluated at the current residuals.
/// Invalid contour correspondences and points behind the camera add
/// nothing.
pub fn accumulate(
    contours: &[ContourCorrespondence],
    interiors: &[InteriorCorrespondence],
    lambda: f64,
    beta: f64,
    gamma: f64,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> NormalEquations {
    let weights = FrozenWeights::at(contours, interiors, beta, gamma, pose, k);
    accumulate_weighted(contours, interiors, &weights, lambda, pose, k)
}

/// Joint energy at `pose` with fixed weights: the function whose gradient
/// and Gauss-Newton Hessian `accumulate_weighted` returns.
pub fn joint_energy(
    contours: &[ContourCorrespondence],
    interiors: &[InteriorCorrespondence],
    weights: &FrozenWeights,
    lambda: f64,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> f64 {
    let mut e = 0.0;
    for (c, &w) in contours.iter().zip(&weights.contour) {
        if let (true, Ok(r)) = (w != 0.0, contour_residual_at(c, pose, k)) {
            e += lambda * 0.25 * w * r * r;
        }
    }
    for (c, &w) in interiors.iter().zip(&weights.interior) {
        if let (true, Ok(r)) = (w != 0.0, interior_residual_at(c, pose, k)) {
            e += (1.0 - lambda) * 0.25 * w * r * r;
        }
    }
    e
}

/// Solves `(H + diag(lr, lr, lr, lt, lt, lt)) dx = -g`.
pub fn gn_step(ne: &NormalEquations, lambda_r: f64, lambda_t: f64) -> Result<Twist> {
    gn_step_about(ne, lambda_r, lambda_t, &Vector3::zeros())
}

/// Like `gn_step`, but the translation damping acts on the displacement of
/// `center` (camera frame) rather than of the camera origin. With `center`
/// at the object origin a pure spin of the object costs only `lambda_r`.
pub fn gn_step_about(ne: &NormalEquations, lambda_r: f64, lambda_t: f64, center: &Vector3<f64>) -> Result<Twist> {
    // Displacement of the centre under a left twist: v - [c]x w.
    let mut a_map = Matrix6::identity();
    a_map.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(center)));
    let reg = Matrix6::from_diagonal(&Vector6::new(lambda_r, lambda_r, lambda_r, lambda_t, lambda_t, lambda_t));
    let a = ne.h + a_map.transpose() * reg * a_map;
    let chol = a.cholesky().ok_or(Error::SingularSystem)?;
    let dx = chol.solve(&(-ne.g));
    let twist = Twist::from_slice(&[dx[0], dx[1], dx[2], dx[3], dx[4], dx[5]]);
    if !twist.is_finite() {
        return Err(Error::SingularSystem);
    }
    Ok(twist)
}

/// What one frame needs besides the pose.
pub struct FrameInputs<'a> {
    pub k: &'a CameraIntrinsics,
    pub model: &'a ViewpointModel,
    pub prob: &'a ProbMap,
    /// Empty when the interior modality is off; the contour energy then
    /// carries the full weight.
    pub interior: &'a [InteriorCorrespondence],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub stage: usize,
    pub energy_before: f64,
    pub energy_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub pose: Pose,
    /// Valid contour correspondences of the last search.
    pub valid_contours: usize,
    pub steps: Vec<StepRecord>,
}

/// Runs the staged search and Gauss-Newton schedule from `init`.
pub fn optimize_pose(
    inputs: &FrameInputs,
    init: &Pose,
    schedule: &OptimizerSchedule,
    fan_base: &FanSearchParams,
) -> Result<OptimizeOutcome> {
    let table = DirectionTable::new();
    let k = inputs.k;
    let mut pose = *init;
    let mut steps = Vec::with_capacity(schedule.total_gn_iterations());
    let mut valid = 0;
    for (si, stage) in schedule.stages.iter().enumerate() {
        let beta = schedule.b2 / (stage.sigma_sched * stage.sigma_sched);
        let lambda = if inputs.interior.is_empty() { 1.0 } else { stage.lambda };
        let fan = FanSearchParams {
            a_reg: stage.a_reg,
            l_src: stage.l_src,
            ..*fan_base
        };
        for _ in 0..stage.search_iters {
            let view = &inputs.model.views[inputs.model.closest_view(&pose)];
            let mut contours = contour_correspondences(inputs.prob, view, &pose, k, &fan, &table);
            contours.retain(|c| c.valid);
            valid = contours.len();
            for _ in 0..schedule.gn_iters_per_search {
                let weights = FrozenWeights::at(&contours, inputs.interior, beta, stage.gamma, &pose, k);
                let ne = accumulate_weighted(&contours, inputs.interior, &weights, lambda, &pose, k);
                let delta = gn_step_about(&ne, schedule.lambda_r, schedule.lambda_t, &pose.translation)?;
                let next = delta.exp().compose(&pose);
                steps.push(StepRecord {
                    stage: si,
                    energy_before: joint_energy(&contours, inputs.interior, &weights, lambda, &pose, k),
                    energy_after: joint_energy(&contours, inputs.interior, &weights, lambda, &next, k),
                });
                pose = next;
            }
        }
    }
    if valid < schedule.min_valid_contours {
        return Err(Error::LostTrack { valid });
    }
    Ok(OptimizeOutcome { pose, valid_contours: valid, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 480.0, 320.0, 256.0).unwrap()
    }

    fn contour(xm: Vector3<f64>, n: Vector2<f64>, mu: f64) -> ContourCorrespondence {
        ContourCorrespondence {
            x_cnt: Vector2::zeros(),
            n: n.normalize(),
            mu,
            sigma_shp: 1.0,
            sigma_noi: 1.0,
            x_model: xm,
            valid: true,
        }
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        Pose::from_axis_angle(
            axis,
            rng.gen_range(-1.0..1.0),
            Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.4..1.0)),
        )
    }

    fn fd<F: Fn(&Pose) -> f64>(f: F, pose: &Pose) -> Vector6<f64> {
        let h = 1e-6;
        let mut out = Vector6::zeros();
        for i in 0..6 {
            let mut e = [0.0; 6];
            e[i] = h;
            let plus = f(&Twist::from_slice(&e).exp().compose(pose));
            e[i] = -h;
            let minus = f(&Twist::from_slice(&e).exp().compose(pose));
            out[i] = (plus - minus) / (2.0 * h);
        }
        out
    }

    #[test]
    fn contour_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = cam();
        for _ in 0..1000 {
            let pose = random_pose(&mut rng);
            let xm = Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            let n = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let c = contour(xm, n, rng.gen_range(0.0..300.0));
            let j = contour_jacobian(&c, &pose, &k).unwrap();
            let num = fd(|p| contour_residual_at(&c, p, &k).unwrap(), &pose);
            assert!((j - num).norm() <= 1e-3 * j.norm().max(1e-9), "{j} vs {num}");
        }
    }

    #[test]
    fn interior_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = cam();
        let mut checked = 0;
        while checked < 1000 {
            let pose = random_pose(&mut rng);
            let xm = Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            let x = k.project(&pose, &xm).unwrap();
            let off = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            if off.norm() <= 0.1 {
                continue;
            }
            let c = InteriorCorrespondence { x_in: x, x_in_prime: x + off, c_in: 1.0, x_model: xm };
            let j = interior_jacobian(&c, &pose, &k).unwrap();
            let num = fd(|p| interior_residual_at(&c, p, &k).unwrap(), &pose);
            assert!((j - num).norm() <= 1e-3 * j.norm(), "{j} vs {num}");
            checked += 1;
        }
    }

    #[test]
    fn jacobian_examples() {
        let k = cam();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 0.8));
        let c = contour(Vector3::zeros(), Vector2::x(), 0.0);
        let j = contour_jacobian(&c, &pose, &k).unwrap();
        assert!((j[3] - 500.0 / 0.8).abs() < 1e-9);
        assert_eq!(j[2], 0.0);
        assert_eq!(j[4], 0.0);

        let behind = Pose::from_translation(Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(contour_jacobian(&c, &behind, &k), Err(Error::BehindCamera { .. })));

        let x = k.project(&pose, &Vector3::zeros()).unwrap();
        let still = InteriorCorrespondence { x_in: x, x_in_prime: x, c_in: 1.0, x_model: Vector3::zeros() };
        assert_eq!(interior_jacobian(&still, &pose, &k).unwrap(), Vector6::zeros());

        let xm = Vector3::new(0.02, -0.01, 0.03);
        let k2 = CameraIntrinsics { fx: 1000.0, ..k };
        let corr = |k: &CameraIntrinsics| {
            let x = k.project(&pose, &xm).unwrap();
            InteriorCorrespondence { x_in: x, x_in_prime: x + Vector2::new(2.0, 1.0), c_in: 1.0, x_model: xm }
        };
        let a = interior_jacobian(&corr(&k), &pose, &k).unwrap();
        let b = interior_jacobian(&corr(&k2), &pose, &k2).unwrap();
        assert!((b[3] - 2.0 * a[3]).abs() < 1e-9 * a[3].abs());
    }

    #[test]
    fn accumulate_examples() {
        let k = cam();
        let pose = Pose::from_translation(Vector3::new(0.01, 0.0, 0.6));
        let xm = Vector3::new(0.03, 0.02, 0.0);
        let x = k.project(&pose, &xm).unwrap();
        let n = Vector2::new(0.6, 0.8);
        let c_zero = contour(xm, n, n.dot(&x));
        let i_zero = InteriorCorrespondence { x_in: x, x_in_prime: x, c_in: 0.9, x_model: xm };
        let ne = accumulate(std::slice::from_ref(&c_zero), &[i_zero], 0.5, 0.05, 0.5, &pose, &k);
        assert_eq!(ne.g, Vector6::zeros());

        let c = contour(xm, n, n.dot(&x) - 2.0);
        let i = InteriorCorrespondence { x_in: x, x_in_prime: x + Vector2::new(1.0, 0.0), c_in: 0.9, x_model: xm };
        let only_contour = accumulate(std::slice::from_ref(&c), std::slice::from_ref(&i), 1.0, 0.05, 0.5, &pose, &k);
        let j = contour_jacobian(&c, &pose, &k).unwrap();
        let w = contour_weight(2.0, 1.0, 0.05);
        assert!((only_contour.h - j * j.transpose() * (0.5 * w)).norm() < 1e-9 * only_contour.h.norm());
        assert!((only_contour.g - j * (0.5 * w * 2.0)).norm() < 1e-9 * only_contour.g.norm());

        let only_interior = accumulate(&[c], std::slice::from_ref(&i), 0.0, 0.05, 0.5, &pose, &k);
        let ji = interior_jacobian(&i, &pose, &k).unwrap();
        let wi = interior_weight(1.0, 0.9, 0.5);
        assert!((only_interior.h - ji * ji.transpose() * (0.5 * wi)).norm() < 1e-9 * only_interior.h.norm());

        let empty = accumulate(&[], &[], 0.5, 0.05, 0.5, &pose, &k);
        assert_eq!(empty, NormalEquations::default());
    }

    #[test]
    fn gn_step_examples() {
        let ne = NormalEquations { h: Matrix6::identity() * 3.0, g: Vector6::zeros() };
        assert_eq!(gn_step(&ne, 5000.0, 500000.0).unwrap(), Twist::zero());

        let mut g = Vector6::zeros();
        g[3] = 1e6;
        let ne = NormalEquations { h: Matrix6::identity() * 1e6, g };
        let dx = gn_step(&ne, 5000.0, 500000.0).unwrap().to_array();
        assert!((dx[3] + 1e6 / 1.5e6).abs() < 1e-12);
        assert!(dx.iter().enumerate().all(|(i, v)| i == 3 || *v == 0.0));

        let ne = NormalEquations { h: Matrix6::zeros(), g: Vector6::repeat(f64::NAN) };
        assert!(gn_step(&ne, 1.0, 1.0).is_err());
        let ne = NormalEquations { h: -Matrix6::identity() * 1e9, g: Vector6::zeros() };
        assert!(matches!(gn_step(&ne, 1.0, 1.0), Err(Error::SingularSystem)));
    }

    #[test]
    fn damping_about_the_object_centre() {
        let c = Vector3::new(0.02, -0.01, 0.5);
        let mut g = Vector6::zeros();
        g[1] = 50.0;
        let ne = NormalEquations { h: Matrix6::zeros(), g };
        // A pure rotational pull spins the object in place: the centre does
        // not move and only the rotation damping applies.
        let t = gn_step_about(&ne, 5000.0, 500000.0, &c).unwrap();
        assert!((t.omega - Vector3::new(0.0, -0.01, 0.0)).norm() < 1e-12);
        assert!((t.v - t.omega.cross(&c) * -1.0).norm() < 1e-12);
        let moved = t.exp().transform_point(&c) - c;
        assert!(moved.norm() < 1e-6);

        let ne = NormalEquations { h: Matrix6::identity() * 7.0, g: Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0) };
        assert_eq!(gn_step_about(&ne, 5.0, 9.0, &Vector3::zeros()).unwrap(), gn_step(&ne, 5.0, 9.0).unwrap());
    }

    #[test]
    fn default_schedule() {
        let s = OptimizerSchedule::default();
        s.validate().unwrap();
        assert_eq!(s.total_gn_iterations(), 27);
        let bad = OptimizerSchedule { stages: s.stages.iter().rev().copied().collect(), ..s.clone() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn hessian_is_symmetric_psd(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = cam();
            let pose = random_pose(&mut rng);
            let contours: Vec<_> = (0..20).map(|_| {
                let xm = Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                contour(xm, Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)), rng.gen_range(0.0..400.0))
            }).collect();
            let interiors: Vec<_> = (0..20).map(|_| {
                let xm = Vector3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                let x = k.project(&pose, &xm).unwrap();
                InteriorCorrespondence { x_in: x, x_in_prime: x + Vector2::new(rng.gen_range(-3.0..3.0), 1.0), c_in: rng.gen(), x_model: xm }
            }).collect();
            let ne = accumulate(&contours, &interiors, lambda, 0.0125, 0.5, &pose, &k);
            prop_assert!((ne.h - ne.h.transpose()).amax() <= 1e-9 * ne.h.amax().max(1.0));
            let eig = ne.h.symmetric_eigenvalues();
            prop_assert!(eig.min() >= -1e-9 * ne.h.amax().max(1.0));
        }
    }
}
