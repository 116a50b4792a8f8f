//! Rigid poses, twists and the pinhole camera.
//!
//! Poses map model coordinates into the camera frame (`X_C = R X_M + t`).
//! Twists use the layout `[omega, v]` and act by left multiplication, so a
//! pose update reads `T <- exp(xi) * T`.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SMALL_ANGLE: f64 = 1e-8;
const ORTHO_DRIFT: f64 = 1e-9;
const MIN_DEPTH: f64 = 1e-6;

/// Rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, projecting the rotation back onto SO(3) when it has
    /// drifted off the manifold.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: orthonormalize(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let n = axis.norm();
        let omega = if n > 0.0 { axis * (angle / n) } else { Vector3::zeros() };
        Self {
            rotation: so3_exp(&omega),
            translation,
        }
    }

    /// Camera at `eye` (model frame) looking at `target` with the image y axis
    /// pointing roughly along `-up`.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(&-up);
        if x.norm() < 1e-9 {
            // up is parallel to the viewing direction; pick any perpendicular
            let alt = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            x = z.cross(&alt);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        // Rows of R_CM are the camera axes expressed in the model frame.
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self { rotation, translation }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Position of this pose's camera centre in the model frame, assuming
    /// the pose is `T_CM`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Row-major rotation followed by translation.
    pub fn to_array(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
            t.x, t.y, t.z,
        ]
    }

    /// Inverse of [`Pose::to_array`]; the rotation is re-orthonormalized.
    pub fn from_array(a: &[f64; 12]) -> Self {
        let r = Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]);
        Pose::new(r, Vector3::new(a[9], a[10], a[11]))
    }

    /// Like [`Pose::from_array`] but keeps the rotation exactly as given.
    pub fn from_array_raw(a: &[f64; 12]) -> Self {
        Self {
            rotation: Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]),
            translation: Vector3::new(a[9], a[10], a[11]),
        }
    }

    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }
}

/// Element of se(3), `[omega, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_slice(xi: &[f64; 6]) -> Self {
        Self {
            omega: Vector3::new(xi[0], xi[1], xi[2]),
            v: Vector3::new(xi[3], xi[4], xi[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.omega.x, self.omega.y, self.omega.z, self.v.x, self.v.y, self.v.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Exponential map onto SE(3).
    pub fn exp(&self) -> Pose {
        exp_se3(self)
    }
}

impl std::ops::Neg for Twist {
    type Output = Twist;
    fn neg(self) -> Twist {
        Twist::new(-self.omega, -self.v)
    }
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b, _) = exp_coefficients(omega.norm());
    let w = skew(omega);
    Matrix3::identity() + w * a + w * w * b
}

/// Coefficients `(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)`, with
/// their series limits near zero.
fn exp_coefficients(theta: f64) -> (f64, f64, f64) {
    if theta < SMALL_ANGLE {
        (1.0, 0.5, 1.0 / 6.0)
    } else {
        let t2 = theta * theta;
        let (s, c) = theta.sin_cos();
        (s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta))
    }
}

pub fn exp_se3(xi: &Twist) -> Pose {
    let (a, b, c) = exp_coefficients(xi.omega.norm());
    let w = skew(&xi.omega);
    let w2 = w * w;
    let rotation = Matrix3::identity() + w * a + w2 * b;
    let v = Matrix3::identity() + w * b + w2 * c;
    Pose {
        rotation,
        translation: v * xi.v,
    }
}

/// `delta * prev`, the pose update applied after every solver step.
pub fn compose(delta: &Pose, prev: &Pose) -> Pose {
    delta.compose(prev)
}

/// Projects `r` onto SO(3) via the polar decomposition if it has drifted.
pub fn orthonormalize(r: Matrix3<f64>) -> Matrix3<f64> {
    let drift = (r.transpose() * r - Matrix3::identity()).amax();
    if drift <= ORTHO_DRIFT {
        return r;
    }
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * vt;
    }
    out
}

/// Pinhole intrinsics without distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidIntrinsics(format!(
                "fx = {fx}, fy = {fy}, cx = {cx}, cy = {cy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, xc: &Vector3<f64>) -> Result<Vector2<f64>> {
        if xc.z <= MIN_DEPTH {
            return Err(Error::BehindCamera { z: xc.z });
        }
        Ok(Vector2::new(
            self.fx * xc.x / xc.z + self.cx,
            self.fy * xc.y / xc.z + self.cy,
        ))
    }

    /// Projects a model point under `pose`.
    pub fn project(&self, pose: &Pose, xm: &Vector3<f64>) -> Result<Vector2<f64>> {
        self.project_camera(&pose.transform_point(xm))
    }

    /// Camera-frame point at depth `depth` seen at pixel `x`.
    pub fn backproject(&self, x: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
        if depth.is_nan() || depth <= 0.0 {
            return Err(Error::NonPositiveDepth(depth));
        }
        Ok(Vector3::new(
            (x.x - self.cx) / self.fx * depth,
            (x.y - self.cy) / self.fy * depth,
            depth,
        ))
    }

    /// Jacobian of the projection with respect to the camera-frame point.
    pub fn projection_jacobian(&self, xc: &Vector3<f64>) -> nalgebra::Matrix2x3<f64> {
        let iz = 1.0 / xc.z;
        let iz2 = iz * iz;
        nalgebra::Matrix2x3::new(
            self.fx * iz,
            0.0,
            -self.fx * xc.x * iz2,
            0.0,
            self.fy * iz,
            -self.fy * xc.y * iz2,
        )
    }
}

pub fn project(k: &CameraIntrinsics, pose: &Pose, xm: &Vector3<f64>) -> Result<Vector2<f64>> {
    k.project(pose, xm)
}

pub fn backproject(k: &CameraIntrinsics, x: &Vector2<f64>, depth: f64) -> Result<Vector3<f64>> {
    k.backproject(x, depth)
}

/// Translation and rotation error between an estimate and the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Meters.
    pub e_t: f64,
    /// Radians, in `[0, pi]`.
    pub e_r: f64,
}

pub fn pose_errors(pose: &Pose, gt: &Pose) -> PoseError {
    let e_t = (pose.translation - gt.translation).norm();
    let cos = (((pose.rotation.transpose() * gt.rotation).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    PoseError { e_t, e_r: cos.acos() }
}

/// Pose of a target relative to the tracked object, `(T_WC T_CM)^-1 T_WT`.
pub fn relative_target_pose(world_camera: &Pose, camera_model: &Pose, world_target: &Pose) -> Pose {
    world_camera.compose(camera_model).inverse().compose(world_target)
}
