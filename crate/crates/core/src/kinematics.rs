//! Geometric model of a revolute serial chain.
//!
//! Links follow the standard (distal) Denavit–Hartenberg convention: the
//! transform from frame `i-1` to frame `i` is
//! `Rz(theta + offset) * Tz(d) * Tx(a) * Rx(alpha)` and joint `i` rotates
//! about the z axis of frame `i-1`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{
    DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3,
};

use crate::error::{Error, Result};

/// Task-space Jacobian, `m` rows by `n` (chain DOF) columns.
pub type Jacobian = DMatrix<f64>;

/// Default forward-difference step of the manipulability Jacobian (rad).
pub const DEFAULT_MANIPULABILITY_STEP: f64 = 1e-6;

/// One revolute joint in standard DH form with its physical travel bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDef {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
    /// Lower physical bound (rad).
    pub q_min: f64,
    /// Upper physical bound (rad).
    pub q_max: f64,
}

impl JointDef {
    pub fn new(a: f64, alpha: f64, d: f64, theta_offset: f64, q_min: f64, q_max: f64) -> Self {
        Self {
            a,
            alpha,
            d,
            theta_offset,
            q_min,
            q_max,
        }
    }

    /// Unbounded joint (`±π` travel) with zero offset, handy for planar test chains.
    pub fn planar(a: f64) -> Self {
        Self::new(a, 0.0, 0.0, 0.0, -core::f64::consts::PI, core::f64::consts::PI)
    }

    fn validate(&self, index: usize) -> Result<()> {
        let fields = [self.a, self.alpha, self.d, self.theta_offset, self.q_min, self.q_max];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                format!("joint {}", index + 1),
                "all DH parameters and bounds must be finite",
            ));
        }
        if self.q_min >= self.q_max {
            return Err(Error::invalid(
                format!("joint {}", index + 1),
                format!("q_min ({}) must be below q_max ({})", self.q_min, self.q_max),
            ));
        }
        Ok(())
    }

    /// Link transform for joint angle `q`.
    pub fn transform(&self, q: f64) -> Isometry3<f64> {
        let theta = q + self.theta_offset;
        let rot_z = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta);
        let rot_x = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        // Rz(theta) Tz(d) Tx(a) Rx(alpha)
        let translation = rot_z * Vector3::new(self.a, 0.0, self.d);
        Isometry3::from_parts(Translation3::from(translation), rot_z * rot_x)
    }
}

/// Position and unit-quaternion orientation of a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Which rows of the 6×n geometric Jacobian a measure is computed on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSelector {
    /// Linear velocity rows (0, 1, 2).
    Position,
    /// Angular velocity rows (3, 4, 5).
    Orientation,
    /// All six rows.
    Full,
    /// Explicit row indices into the 6×n Jacobian.
    Rows(Vec<usize>),
}

impl RowSelector {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            RowSelector::Position => alloc::vec![0, 1, 2],
            RowSelector::Orientation => alloc::vec![3, 4, 5],
            RowSelector::Full => alloc::vec![0, 1, 2, 3, 4, 5],
            RowSelector::Rows(rows) => rows.clone(),
        }
    }

    fn validate(&self) -> Result<Vec<usize>> {
        let rows = self.indices();
        if rows.is_empty() {
            return Err(Error::config("row selector is empty"));
        }
        for (k, r) in rows.iter().enumerate() {
            if *r >= 6 {
                return Err(Error::config(format!("row index {r} outside the 6-row Jacobian")));
            }
            if rows[..k].contains(r) {
                return Err(Error::config(format!("row index {r} selected twice")));
            }
        }
        Ok(rows)
    }
}

/// An n-DOF revolute serial chain.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    joints: Vec<JointDef>,
    base: Isometry3<f64>,
    tool: Isometry3<f64>,
}

impl KinematicChain {
    pub fn new(joints: Vec<JointDef>, base_pose: Pose, tool_offset: Pose) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("chain", "at least one joint is required"));
        }
        for (i, j) in joints.iter().enumerate() {
            j.validate(i)?;
        }
        for (what, pose) in [("base_pose", &base_pose), ("tool_offset", &tool_offset)] {
            let finite = pose.position.iter().all(|v| v.is_finite())
                && pose.orientation.coords.iter().all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(what, "must be finite"));
            }
            if (pose.orientation.coords.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(what, "orientation must be a unit quaternion"));
            }
        }
        Ok(Self {
            joints,
            base: base_pose.to_isometry(),
            tool: tool_offset.to_isometry(),
        })
    }

    /// Chain with identity base and tool transforms.
    pub fn from_joints(joints: Vec<JointDef>) -> Result<Self> {
        Self::new(joints, Pose::identity(), Pose::identity())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointDef] {
        &self.joints
    }

    pub fn base_pose(&self) -> Pose {
        Pose::from_isometry(&self.base)
    }

    pub fn tool_offset(&self) -> Pose {
        Pose::from_isometry(&self.tool)
    }

    /// Same chain mounted on `base` instead of the current base pose.
    pub fn with_base(&self, base: Pose) -> Self {
        Self {
            base: base.to_isometry(),
            ..self.clone()
        }
    }

    fn check_q(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::config(format!(
                "joint vector has {} entries, chain has {} joints",
                q.len(),
                self.dof()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("joint vector contains non-finite entries"));
        }
        Ok(())
    }

    /// Frames 0..=n in the world (base-pose) frame, followed by the tool frame.
    fn frames(&self, q: &[f64]) -> Vec<Isometry3<f64>> {
        let mut frames = Vec::with_capacity(self.dof() + 2);
        let mut current = self.base;
        frames.push(current);
        for (joint, &qi) in self.joints.iter().zip(q) {
            current *= joint.transform(qi);
            frames.push(current);
        }
        frames.push(current * self.tool);
        frames
    }

    /// Tool pose in the world frame.
    pub fn forward_kinematics(&self, q: &[f64]) -> Result<Pose> {
        self.check_q(q)?;
        let frames = self.frames(q);
        Ok(Pose::from_isometry(frames.last().expect("tool frame")))
    }

    /// 6×n geometric Jacobian of the tool frame: linear rows first, then angular.
    pub fn geometric_jacobian(&self, q: &[f64]) -> Result<Jacobian> {
        self.check_q(q)?;
        let frames = self.frames(q);
        let n = self.dof();
        let tip = frames[n + 1].translation.vector;
        let mut jac = Jacobian::zeros(6, n);
        for (i, frame) in frames[..n].iter().enumerate() {
            let axis = frame.rotation * Vector3::z();
            let linear = axis.cross(&(tip - frame.translation.vector));
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&linear);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
        }
        Ok(jac)
    }

    /// Rows of the geometric Jacobian picked by `rows`.
    pub fn selected_jacobian(&self, q: &[f64], rows: &RowSelector) -> Result<Jacobian> {
        let idx = rows.validate()?;
        let full = self.geometric_jacobian(q)?;
        Ok(full.select_rows(idx.iter()))
    }

    /// Manipulability `sqrt(det(J Jᵀ))` of the selected rows, computed as the
    /// product of the singular values of `J`.
    pub fn manipulability(&self, q: &[f64], rows: &RowSelector) -> Result<f64> {
        let jac = self.selected_jacobian(q, rows)?;
        if jac.nrows() > jac.ncols() {
            return Err(Error::config(format!(
                "manipulability needs m <= n, got {} rows for {} joints",
                jac.nrows(),
                jac.ncols()
            )));
        }
        Ok(manipulability_of(&jac))
    }

    /// Forward-difference gradient of [`manipulability`](Self::manipulability),
    /// one perturbed evaluation per joint.
    pub fn manipulability_jacobian_numeric(
        &self,
        q: &[f64],
        rows: &RowSelector,
        delta_q: f64,
    ) -> Result<Jacobian> {
        if !(delta_q > 0.0 && delta_q.is_finite()) {
            return Err(Error::config(format!("delta_q must be positive, got {delta_q}")));
        }
        let w = self.manipulability(q, rows)?;
        let mut grad = Jacobian::zeros(1, self.dof());
        let mut q_inc: Vec<f64> = q.to_vec();
        for i in 0..self.dof() {
            q_inc[i] = q[i] + delta_q;
            let w_inc = self.manipulability(&q_inc, rows)?;
            grad[(0, i)] = (w_inc - w) / delta_q;
            q_inc[i] = q[i];
        }
        Ok(grad)
    }

    /// True when every joint lies inside its physical bounds.
    pub fn within_bounds(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q)
                .all(|(j, &v)| v >= j.q_min && v <= j.q_max)
    }
}

/// `sqrt(det(J Jᵀ))` for a matrix with no more rows than columns.
pub fn manipulability_of(jac: &DMatrix<f64>) -> f64 {
    if jac.nrows() == 0 {
        return 1.0;
    }
    let sv: DVector<f64> = jac.clone().svd(false, false).singular_values;
    let w: f64 = sv.iter().product();
    // Singular values are nonnegative; guard against -0.0 and rounding noise.
    if w.abs() < 1e-14 {
        0.0
    } else {
        w.max(0.0)
    }
}
