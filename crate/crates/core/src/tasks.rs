//! Task taxonomy, task evaluation and the set-based activation state machine.
//!
//! A set-based task is a scalar objective that only has to stay inside an
//! interval. Each side of the interval carries three nested thresholds: the
//! physical bound, the safety threshold the task regulates to while active,
//! and the activation threshold, offset from the safety one by `epsilon`
//! towards the interior.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DVector, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{Jacobian, KinematicChain, Pose, RowSelector, DEFAULT_MANIPULABILITY_STEP};

/// Rank offset given to optimization counterparts so that they sort after
/// every user-ranked task.
pub const OPTIMIZATION_RANK_BASE: u32 = 1_000_000;

/// Counterpart gain as a fraction of the source task gain when none is configured.
pub const DEFAULT_COUNTERPART_GAIN_RATIO: f64 = 0.1;

/// Default activation margin, in task units.
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    Equality,
    SetBased,
    Optimization,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Tool position, 3 rows.
    EndEffectorPosition,
    /// Tool position and orientation, 6 rows.
    EndEffectorPose,
    /// Value of one joint; `joint` is 1-based.
    JointValue { joint: usize },
    /// `sqrt(det(J Jᵀ))` over `rows`, differentiated numerically with step `step`.
    Manipulability { rows: RowSelector, step: f64 },
}

impl Objective {
    pub fn manipulability(rows: RowSelector) -> Self {
        Objective::Manipulability {
            rows,
            step: DEFAULT_MANIPULABILITY_STEP,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Objective::EndEffectorPosition => 3,
            Objective::EndEffectorPose => 6,
            Objective::JointValue { .. } | Objective::Manipulability { .. } => 1,
        }
    }

    fn check_chain(&self, chain: &KinematicChain) -> Result<()> {
        match self {
            Objective::JointValue { joint } if *joint == 0 || *joint > chain.dof() => Err(Error::config(
                format!("joint index {joint} outside 1..={}", chain.dof()),
            )),
            Objective::Manipulability { rows, step } => {
                if !(*step > 0.0 && step.is_finite()) {
                    return Err(Error::config(format!("manipulability step must be positive, got {step}")));
                }
                let m = rows.indices().len();
                if m > chain.dof() {
                    return Err(Error::config(format!(
                        "manipulability over {m} rows needs at least {m} joints"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Value of a task, shaped by its objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskValue {
    Scalar(f64),
    Position(Vector3<f64>),
    Pose(Pose),
}

impl TaskValue {
    pub fn dim(&self) -> usize {
        match self {
            TaskValue::Scalar(_) => 1,
            TaskValue::Position(_) => 3,
            TaskValue::Pose(_) => 6,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            TaskValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

/// Where a task takes its desired value from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// The scenario's end-effector path.
    Trajectory,
    Constant(TaskValue),
}

/// Positive diagonal gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Gain {
    Uniform(f64),
    Diagonal(Vec<f64>),
}

impl Gain {
    pub fn diagonal(&self, dim: usize) -> DVector<f64> {
        match self {
            Gain::Uniform(k) => DVector::from_element(dim, *k),
            Gain::Diagonal(d) => DVector::from_column_slice(d),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Gain::Uniform(k) => *k > 0.0 && k.is_finite(),
            Gain::Diagonal(d) => d.len() == dim && d.iter().all(|k| *k > 0.0 && k.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("gain", format!("must be {dim} positive finite entries")))
        }
    }

    pub fn scaled(&self, factor: f64) -> Gain {
        match self {
            Gain::Uniform(k) => Gain::Uniform(k * factor),
            Gain::Diagonal(d) => Gain::Diagonal(d.iter().map(|k| k * factor).collect()),
        }
    }
}

/// Physical bound and safety threshold on one side of a set-based task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSide {
    pub physical: f64,
    pub safety: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    lower: Option<ThresholdSide>,
    upper: Option<ThresholdSide>,
    epsilon: f64,
}

impl ThresholdSet {
    pub fn new(lower: Option<ThresholdSide>, upper: Option<ThresholdSide>, epsilon: f64) -> Result<Self> {
        let invalid = |reason: String| Err(Error::invalid("thresholds", reason));
        if lower.is_none() && upper.is_none() {
            return invalid("at least one side is required".into());
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
        for side in lower.iter().chain(upper.iter()) {
            if !(side.physical.is_finite() && side.safety.is_finite()) {
                return invalid("thresholds must be finite".into());
            }
        }
        if let Some(l) = lower {
            if l.physical >= l.safety {
                return invalid(format!(
                    "lower physical bound {} must be below lower safety threshold {}",
                    l.physical, l.safety
                ));
            }
        }
        if let Some(u) = upper {
            if u.safety >= u.physical {
                return invalid(format!(
                    "upper safety threshold {} must be below upper physical bound {}",
                    u.safety, u.physical
                ));
            }
        }
        if let (Some(l), Some(u)) = (lower, upper) {
            if l.safety >= u.safety {
                return invalid(format!(
                    "lower safety threshold {} must be below upper safety threshold {}",
                    l.safety, u.safety
                ));
            }
            if epsilon >= (u.safety - l.safety) / 2.0 {
                return invalid(format!(
                    "epsilon {epsilon} must be below half the safety band {}",
                    (u.safety - l.safety) / 2.0
                ));
            }
        }
        Ok(Self { lower, upper, epsilon })
    }

    pub fn two_sided(physical_min: f64, safety_lower: f64, safety_upper: f64, physical_max: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            Some(ThresholdSide { physical: physical_min, safety: safety_lower }),
            Some(ThresholdSide { physical: physical_max, safety: safety_upper }),
            epsilon,
        )
    }

    pub fn lower_only(physical_min: f64, safety_lower: f64, epsilon: f64) -> Result<Self> {
        Self::new(Some(ThresholdSide { physical: physical_min, safety: safety_lower }), None, epsilon)
    }

    pub fn upper_only(safety_upper: f64, physical_max: f64, epsilon: f64) -> Result<Self> {
        Self::new(None, Some(ThresholdSide { physical: physical_max, safety: safety_upper }), epsilon)
    }

    pub fn lower(&self) -> Option<ThresholdSide> {
        self.lower
    }

    pub fn upper(&self) -> Option<ThresholdSide> {
        self.upper
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn safety_lower(&self) -> Option<f64> {
        self.lower.map(|s| s.safety)
    }

    pub fn safety_upper(&self) -> Option<f64> {
        self.upper.map(|s| s.safety)
    }

    pub fn activation_lower(&self) -> Option<f64> {
        self.lower.map(|s| s.safety + self.epsilon)
    }

    pub fn activation_upper(&self) -> Option<f64> {
        self.upper.map(|s| s.safety - self.epsilon)
    }

    /// True when `value` lies outside the physical bounds.
    pub fn violates_physical(&self, value: f64) -> bool {
        self.lower.is_some_and(|l| value < l.physical) || self.upper.is_some_and(|u| value > u.physical)
    }

    /// Mode an inactive task switches to at `value`, if any.
    pub fn activation_for(&self, value: f64) -> Option<Mode> {
        if self.activation_upper().is_some_and(|a| value >= a) {
            Some(Mode::ActiveUpper)
        } else if self.activation_lower().is_some_and(|a| value <= a) {
            Some(Mode::ActiveLower)
        } else {
            None
        }
    }
}

/// Settings of the low-priority optimization mirror of a set-based task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterpartConfig {
    /// Whether [`Hierarchy::with_optimization_counterparts`] mirrors this task.
    pub enabled: bool,
    /// Constant target. Required for one-sided tasks; defaults to the
    /// safety-band midpoint for two-sided ones.
    pub desired: Option<f64>,
    /// Uniform gain; defaults to a tenth of the source gain.
    pub gain: Option<f64>,
}

impl Default for CounterpartConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            desired: None,
            gain: None,
        }
    }
}

/// One control objective in a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub kind: TaskKind,
    pub objective: Objective,
    pub gain: Gain,
    /// 1 is the highest priority.
    pub priority_rank: u32,
    pub thresholds: Option<ThresholdSet>,
    pub desired: Reference,
    /// Set-based tasks only: how to build the optimization counterpart.
    /// `None` means default settings.
    pub counterpart: Option<CounterpartConfig>,
}

impl TaskSpec {
    pub fn equality(id: impl Into<String>, objective: Objective, gain: f64, priority_rank: u32, desired: Reference) -> Self {
        Self {
            id: id.into(),
            kind: TaskKind::Equality,
            objective,
            gain: Gain::Uniform(gain),
            priority_rank,
            thresholds: None,
            desired,
            counterpart: None,
        }
    }

    pub fn set_based(id: impl Into<String>, objective: Objective, gain: f64, priority_rank: u32, thresholds: ThresholdSet) -> Self {
        Self {
            id: id.into(),
            kind: TaskKind::SetBased,
            objective,
            gain: Gain::Uniform(gain),
            priority_rank,
            thresholds: Some(thresholds),
            desired: Reference::Constant(TaskValue::Scalar(0.0)),
            counterpart: None,
        }
    }

    pub fn with_counterpart(mut self, counterpart: CounterpartConfig) -> Self {
        self.counterpart = Some(counterpart);
        self
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn is_set_based(&self) -> bool {
        self.kind == TaskKind::SetBased
    }

    fn thresholds_or_logic(&self) -> Result<&ThresholdSet> {
        match (&self.kind, &self.thresholds) {
            (TaskKind::SetBased, Some(t)) => Ok(t),
            _ => Err(Error::logic(format!("task '{}' is not set-based", self.id))),
        }
    }

    /// Checks the task's own invariants and its compatibility with `chain`.
    pub fn validate(&self, chain: &KinematicChain) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Invalid { what, reason } => Error::invalid(format!("task '{}' {what}", self.id), reason),
            Error::Config(msg) => Error::config(format!("task '{}': {msg}", self.id)),
            other => other,
        };
        if self.id.is_empty() {
            return Err(Error::invalid("task", "id must not be empty"));
        }
        self.objective.check_chain(chain).map_err(wrap)?;
        self.gain.validate(self.dim()).map_err(wrap)?;
        if self.priority_rank == 0 {
            return Err(wrap(Error::invalid("priority", "ranks start at 1")));
        }
        match self.kind {
            TaskKind::SetBased => {
                if self.dim() != 1 {
                    return Err(wrap(Error::invalid("kind", "set-based tasks must be scalar")));
                }
                if self.thresholds.is_none() {
                    return Err(wrap(Error::invalid("kind", "set-based tasks need thresholds")));
                }
            }
            TaskKind::Equality | TaskKind::Optimization => {
                if self.thresholds.is_some() {
                    return Err(wrap(Error::invalid("thresholds", "only set-based tasks carry thresholds")));
                }
                if self.counterpart.is_some() {
                    return Err(wrap(Error::invalid("counterpart", "only set-based tasks have counterparts")));
                }
                match (&self.desired, self.kind) {
                    (Reference::Constant(v), _) => {
                        if !shape_matches(&self.objective, v) {
                            return Err(wrap(Error::invalid("desired", "shape does not match the objective")));
                        }
                    }
                    (Reference::Trajectory, TaskKind::Optimization) => {
                        return Err(wrap(Error::invalid("desired", "optimization tasks need a constant desired value")));
                    }
                    (Reference::Trajectory, _) => {
                        if !matches!(self.objective, Objective::EndEffectorPosition | Objective::EndEffectorPose) {
                            return Err(wrap(Error::invalid(
                                "desired",
                                "only end-effector tasks can follow the trajectory",
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Low-priority equality task mirroring this set-based task.
    ///
    /// Two-sided tasks target the middle of the safety band; one-sided tasks
    /// need an explicit target beyond the achievable range of the task.
    pub fn make_optimization_counterpart(&self) -> Result<TaskSpec> {
        let thresholds = self.thresholds_or_logic()?;
        let cfg = self.counterpart.unwrap_or_default();
        let desired = match (thresholds.safety_lower(), thresholds.safety_upper(), cfg.desired) {
            (_, _, Some(d)) => d,
            (Some(l), Some(u), None) => (l + u) / 2.0,
            (Some(_), None, None) => {
                return Err(Error::invalid(
                    format!("task '{}' counterpart", self.id),
                    "lower-only task needs a desired value above the achievable maximum",
                ))
            }
            (None, Some(_), None) => {
                return Err(Error::invalid(
                    format!("task '{}' counterpart", self.id),
                    "upper-only task needs a desired value below the achievable minimum",
                ))
            }
            (None, None, None) => unreachable!("threshold sets have at least one side"),
        };
        if !desired.is_finite() {
            return Err(Error::invalid(format!("task '{}' counterpart", self.id), "desired must be finite"));
        }
        if let (Some(l), Some(u)) = (thresholds.safety_lower(), thresholds.safety_upper()) {
            if desired < l || desired > u {
                return Err(Error::invalid(
                    format!("task '{}' counterpart", self.id),
                    format!("desired {desired} lies outside the safety band [{l}, {u}]"),
                ));
            }
        }
        let gain = match cfg.gain {
            Some(g) => Gain::Uniform(g),
            None => self.gain.scaled(DEFAULT_COUNTERPART_GAIN_RATIO),
        };
        Ok(TaskSpec {
            id: format!("{}_opt", self.id),
            kind: TaskKind::Optimization,
            objective: self.objective.clone(),
            gain,
            priority_rank: OPTIMIZATION_RANK_BASE.saturating_add(self.priority_rank),
            thresholds: None,
            desired: Reference::Constant(TaskValue::Scalar(desired)),
            counterpart: None,
        })
    }
}

fn shape_matches(objective: &Objective, value: &TaskValue) -> bool {
    matches!(
        (objective, value),
        (Objective::EndEffectorPosition, TaskValue::Position(_))
            | (Objective::EndEffectorPose, TaskValue::Pose(_))
            | (Objective::JointValue { .. }, TaskValue::Scalar(_))
            | (Objective::Manipulability { .. }, TaskValue::Scalar(_))
    )
}

/// Task value and Jacobian at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEvaluation {
    pub value: TaskValue,
    pub jacobian: Jacobian,
}

pub fn evaluate_task(spec: &TaskSpec, chain: &KinematicChain, q: &[f64]) -> Result<TaskEvaluation> {
    spec.objective.check_chain(chain)?;
    match &spec.objective {
        Objective::JointValue { joint } => {
            if q.len() != chain.dof() {
                return Err(Error::config(format!(
                    "joint vector has {} entries, chain has {} joints",
                    q.len(),
                    chain.dof()
                )));
            }
            let mut jacobian = Jacobian::zeros(1, chain.dof());
            jacobian[(0, joint - 1)] = 1.0;
            Ok(TaskEvaluation {
                value: TaskValue::Scalar(q[joint - 1]),
                jacobian,
            })
        }
        Objective::EndEffectorPosition => {
            let pose = chain.forward_kinematics(q)?;
            let jacobian = chain.selected_jacobian(q, &RowSelector::Position)?;
            Ok(TaskEvaluation {
                value: TaskValue::Position(pose.position),
                jacobian,
            })
        }
        Objective::EndEffectorPose => {
            let pose = chain.forward_kinematics(q)?;
            let jacobian = chain.geometric_jacobian(q)?;
            Ok(TaskEvaluation {
                value: TaskValue::Pose(pose),
                jacobian,
            })
        }
        Objective::Manipulability { rows, step } => {
            let w = chain.manipulability(q, rows)?;
            let jacobian = chain.manipulability_jacobian_numeric(q, rows, *step)?;
            Ok(TaskEvaluation {
                value: TaskValue::Scalar(w),
                jacobian,
            })
        }
    }
}

/// Task error `desired - value`. Pose errors stack the position error and
/// the vector part of `q_d * q⁻¹`, taken on the short rotation.
pub fn task_error(value: &TaskValue, desired: &TaskValue) -> Result<DVector<f64>> {
    match (value, desired) {
        (TaskValue::Scalar(v), TaskValue::Scalar(d)) => Ok(DVector::from_element(1, d - v)),
        (TaskValue::Position(v), TaskValue::Position(d)) => Ok(DVector::from_column_slice((d - v).as_slice())),
        (TaskValue::Pose(v), TaskValue::Pose(d)) => {
            let dp = d.position - v.position;
            let rel = d.orientation * v.orientation.inverse();
            let mut dq = rel.into_inner();
            if dq.w < 0.0 {
                dq = -dq;
            }
            let v = dq.imag();
            Ok(DVector::from_column_slice(&[dp.x, dp.y, dp.z, v.x, v.y, v.z]))
        }
        _ => Err(Error::config("task value and desired value have different shapes")),
    }
}

/// Activation mode of a set-based task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Inactive,
    ActiveLower,
    ActiveUpper,
}

impl Mode {
    /// Trace encoding: 0 inactive, 1 lower, 2 upper.
    pub fn code(self) -> u8 {
        match self {
            Mode::Inactive => 0,
            Mode::ActiveLower => 1,
            Mode::ActiveUpper => 2,
        }
    }

    pub fn is_active(self) -> bool {
        self != Mode::Inactive
    }
}

/// How an active task is allowed to leave the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeactivationRule {
    /// Upper side: `value >= activation_upper` and `J q̇ < 0`; lower side:
    /// `value <= activation_lower` and `J q̇ > 0`.
    #[default]
    Literal,
    /// Any value on the valid side of the safety threshold, with `J q̇`
    /// pointing into the valid set.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationConfig {
    pub rule: DeactivationRule,
    /// `|J q̇|` at or below this is treated as no motion, so the task stays active.
    pub sign_tolerance: f64,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            rule: DeactivationRule::Literal,
            sign_tolerance: 1e-9,
        }
    }
}

/// Activation record of one set-based task.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetBasedState {
    pub mode: Mode,
    pub last_transition_time: f64,
    pub transition_count: u32,
}

impl SetBasedState {
    /// Starting state: active when `value` already sits beyond an activation threshold.
    pub fn initial(spec: &TaskSpec, value: f64) -> Result<Self> {
        let thresholds = spec.thresholds_or_logic()?;
        Ok(Self {
            mode: thresholds.activation_for(value).unwrap_or(Mode::Inactive),
            last_transition_time: 0.0,
            transition_count: 0,
        })
    }

    /// Copy of the state moved to `mode` at time `t`; counts the change if any.
    pub fn moved_to(&self, mode: Mode, t: f64) -> Self {
        if mode == self.mode {
            *self
        } else {
            Self {
                mode,
                last_transition_time: t,
                transition_count: self.transition_count + 1,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationUpdate {
    pub state: SetBasedState,
    /// The value lies outside the physical bounds.
    pub physical_violation: bool,
}

/// One step of the activation state machine.
///
/// `directional` is `J_A q̇` where `q̇` solves the hierarchy without this task.
pub fn update_activation(
    spec: &TaskSpec,
    state: &SetBasedState,
    value: f64,
    directional: f64,
    t: f64,
    cfg: &ActivationConfig,
) -> Result<ActivationUpdate> {
    let th = spec.thresholds_or_logic()?;
    let physical_violation = th.violates_physical(value);
    if physical_violation {
        log::warn!("task '{}' value {value} outside its physical bounds at t={t}", spec.id);
    }
    let rising = directional > cfg.sign_tolerance;
    let falling = directional < -cfg.sign_tolerance;
    let next = match state.mode {
        Mode::Inactive => th.activation_for(value).unwrap_or(Mode::Inactive),
        Mode::ActiveUpper => {
            let a_u = th
                .activation_upper()
                .ok_or_else(|| Error::logic(format!("task '{}' active on a missing upper side", spec.id)))?;
            let beyond = match cfg.rule {
                DeactivationRule::Literal => value >= a_u,
                DeactivationRule::Relaxed => value <= a_u + th.epsilon(),
            };
            if beyond && falling {
                Mode::Inactive
            } else {
                Mode::ActiveUpper
            }
        }
        Mode::ActiveLower => {
            let a_l = th
                .activation_lower()
                .ok_or_else(|| Error::logic(format!("task '{}' active on a missing lower side", spec.id)))?;
            let beyond = match cfg.rule {
                DeactivationRule::Literal => value <= a_l,
                DeactivationRule::Relaxed => value >= a_l - th.epsilon(),
            };
            if beyond && rising {
                Mode::Inactive
            } else {
                Mode::ActiveLower
            }
        }
    };
    Ok(ActivationUpdate {
        state: state.moved_to(next, t),
        physical_violation,
    })
}

/// Desired value of an active set-based task: the safety threshold on its side.
pub fn active_desired(spec: &TaskSpec, state: &SetBasedState) -> Result<f64> {
    let th = spec.thresholds_or_logic()?;
    match state.mode {
        Mode::ActiveUpper => th
            .safety_upper()
            .ok_or_else(|| Error::logic(format!("task '{}' active on a missing upper side", spec.id))),
        Mode::ActiveLower => th
            .safety_lower()
            .ok_or_else(|| Error::logic(format!("task '{}' active on a missing lower side", spec.id))),
        Mode::Inactive => Err(Error::logic(format!("task '{}' is inactive and has no desired value", spec.id))),
    }
}

/// Validated, priority-ordered list of tasks for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    tasks: Vec<TaskSpec>,
}

impl Hierarchy {
    /// Validates every task against `chain` and orders them: set-based,
    /// then equality, then optimization, each group by ascending rank.
    pub fn new(mut tasks: Vec<TaskSpec>, chain: &KinematicChain) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for task in &tasks {
            task.validate(chain)?;
            if !seen.insert(task.id.clone()) {
                return Err(Error::invalid(format!("task '{}'", task.id), "duplicate id"));
            }
        }
        tasks.sort_by_key(|t| (category(t.kind), t.priority_rank));
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn set_based(&self) -> impl Iterator<Item = (usize, &TaskSpec)> {
        self.tasks.iter().enumerate().filter(|(_, t)| t.is_set_based())
    }

    pub fn find(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Hierarchy extended with the optimization counterpart of every
    /// set-based task.
    pub fn with_optimization_counterparts(&self, chain: &KinematicChain) -> Result<Self> {
        let mut tasks = self.tasks.clone();
        for (_, task) in self.set_based() {
            if !task.counterpart.unwrap_or_default().enabled {
                continue;
            }
            tasks.push(task.make_optimization_counterpart()?);
        }
        Self::new(tasks, chain)
    }
}

fn category(kind: TaskKind) -> u8 {
    match kind {
        TaskKind::SetBased => 0,
        TaskKind::Equality => 1,
        TaskKind::Optimization => 2,
    }
}
