use std::fmt;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// Tolerance used for orthonormality checks and drift correction.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Name of a coordinate frame ("base", "global_cam", "tool", ...).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frame(String);

impl Frame {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Frame {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for Frame {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Rigid transform mapping coordinates expressed in `child` into `parent`:
/// `x_parent = rotation * x_child + translation`. Lengths are millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose6D {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    parent: Frame,
    child: Frame,
}

impl Pose6D {
    /// Builds a pose, rejecting rotations that are not proper orthonormal
    /// matrices within [`ROTATION_TOLERANCE`].
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        parent: impl Into<Frame>,
        child: impl Into<Frame>,
    ) -> Result<Self> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("translation must be finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
            parent: parent.into(),
            child: child.into(),
        })
    }

    /// Builds a pose after projecting `rotation` onto the nearest rotation.
    pub fn from_approx(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        parent: impl Into<Frame>,
        child: impl Into<Frame>,
    ) -> Self {
        Self {
            rotation: nearest_rotation(&rotation),
            translation,
            parent: parent.into(),
            child: child.into(),
        }
    }

    pub fn identity(frame: impl Into<Frame>) -> Self {
        let frame = frame.into();
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            parent: frame.clone(),
            child: frame,
        }
    }

    pub fn from_translation(
        translation: Vector3<f64>,
        parent: impl Into<Frame>,
        child: impl Into<Frame>,
    ) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
            parent: parent.into(),
            child: child.into(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn parent(&self) -> &Frame {
        &self.parent
    }

    pub fn child(&self) -> &Frame {
        &self.child
    }

    /// Same transform with new frame labels.
    pub fn relabel(mut self, parent: impl Into<Frame>, child: impl Into<Frame>) -> Self {
        self.parent = parent.into();
        self.child = child.into();
        self
    }

    /// Re-checks the rotation; used on poses that arrive through deserialization.
    pub fn validate(&self) -> Result<()> {
        check_rotation(&self.rotation)?;
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("translation must be finite".into()));
        }
        Ok(())
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn with_rotation(mut self, rotation: Matrix3<f64>) -> Result<Self> {
        check_rotation(&rotation)?;
        self.rotation = rotation;
        Ok(self)
    }

    /// `self ∘ other`: maps `other.child` coordinates into `self.parent`.
    pub fn compose(&self, other: &Pose6D) -> Result<Pose6D> {
        if self.child != other.parent {
            return Err(Error::FrameMismatch {
                left: self.child.to_string(),
                right: other.parent.to_string(),
            });
        }
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_error(&rotation) > ROTATION_TOLERANCE {
            rotation = nearest_rotation(&rotation);
        }
        Ok(Pose6D {
            rotation,
            translation: self.rotation * other.translation + self.translation,
            parent: self.parent.clone(),
            child: other.child.clone(),
        })
    }

    pub fn inverse(&self) -> Pose6D {
        let rt = self.rotation.transpose();
        Pose6D {
            rotation: rt,
            translation: -(rt * self.translation),
            parent: self.child.clone(),
            child: self.parent.clone(),
        }
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle (radians) and translation distance (mm) between two
    /// poses with identical frame labels.
    pub fn distance_to(&self, other: &Pose6D) -> (f64, f64) {
        let rel = self.rotation.transpose() * other.rotation;
        (
            rotation_angle(&rel),
            (self.translation - other.translation).norm(),
        )
    }

    /// Largest deviation from identity of `compose(self, inverse(self))`.
    pub fn is_identity(&self, tol: f64) -> bool {
        (self.rotation - Matrix3::identity()).amax() <= tol && self.translation.amax() <= tol
    }
}

/// Free-function form used throughout the pipeline.
pub fn compose(a: &Pose6D, b: &Pose6D) -> Result<Pose6D> {
    a.compose(b)
}

pub fn invert(p: &Pose6D) -> Pose6D {
    p.inverse()
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    let ortho = (r * r.transpose() - Matrix3::identity()).amax();
    ortho.max((r.determinant() - 1.0).abs())
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entries".into()));
    }
    let err = orthonormality_error(r);
    if err > ROTATION_TOLERANCE {
        return Err(Error::InvalidRotation(format!(
            "orthonormality error {err:.3e} exceeds {ROTATION_TOLERANCE:.0e}"
        )));
    }
    Ok(())
}

/// Nearest proper rotation in the Frobenius sense (polar decomposition).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    proper_rotation(
        svd.u.expect("svd u"),
        &svd.singular_values,
        svd.v_t.expect("svd v_t"),
    )
}

/// `U·Vᵀ` with the sign of the weakest singular direction flipped when
/// needed so that the result has determinant +1.
pub(crate) fn proper_rotation(
    mut u: Matrix3<f64>,
    singular_values: &Vector3<f64>,
    v_t: Matrix3<f64>,
) -> Matrix3<f64> {
    let r = u * v_t;
    if r.determinant() >= 0.0 {
        return r;
    }
    let weakest = singular_values.imin();
    u.column_mut(weakest).neg_mut();
    u * v_t
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::x_axis(), angle).matrix()
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::y_axis(), angle).matrix()
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
}

/// Rotation about an arbitrary axis; a zero axis yields the identity.
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    match Unit::try_new(*axis, 1e-15) {
        Some(a) => *Rotation3::from_axis_angle(&a, angle).matrix(),
        None => Matrix3::identity(),
    }
}

/// Angle of a rotation matrix in radians, in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
}

/// Axis/angle decomposition of a rotation matrix.
pub fn to_axis_angle(r: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let rot = Rotation3::from_matrix_unchecked(*r);
    match rot.axis_angle() {
        Some((axis, angle)) => (axis.into_inner(), angle),
        None => (Vector3::z(), 0.0),
    }
}

/// Smallest rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let a = from.normalize();
    let b = to.normalize();
    let cross = a.cross(&b);
    let dot = a.dot(&b).clamp(-1.0, 1.0);
    if cross.norm() < 1e-12 {
        if dot > 0.0 {
            return Matrix3::identity();
        }
        // Antiparallel: rotate by π about any axis orthogonal to `a`.
        let helper = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        return axis_angle(&a.cross(&helper), std::f64::consts::PI);
    }
    axis_angle(&cross, dot.acos())
}

/// Rotation whose columns are the given orthonormal axes.
pub fn from_axes(x: &Vector3<f64>, y: &Vector3<f64>, z: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_columns(&[*x, *y, *z])
}
