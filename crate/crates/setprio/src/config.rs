//! JSON chain, hierarchy and scenario files.
//!
//! Angles are radians, lengths meters, quaternions `[w, x, y, z]`. Relative
//! paths inside a scenario file resolve against the scenario's directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use setprio_core::kinematics::{JointDef, KinematicChain, Pose, RowSelector, DEFAULT_MANIPULABILITY_STEP};
use setprio_core::sim::{Scenario, WaypointPath};
use setprio_core::solver::SolverConfig;
use setprio_core::tasks::{
    ActivationConfig, CounterpartConfig, DeactivationRule, Gain, Hierarchy, Objective, Reference, TaskKind, TaskSpec,
    TaskValue, ThresholdSet, ThresholdSide, DEFAULT_EPSILON,
};

use crate::error::AppError;

const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub position: [f64; 3],
    /// `[w, x, y, z]`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
}

impl PoseEntry {
    pub fn to_pose(&self) -> Result<Pose, String> {
        let orientation = match self.orientation {
            None => UnitQuaternion::identity(),
            Some([w, x, y, z]) => {
                let q = Quaternion::new(w, x, y, z);
                if !(q.norm() - 1.0).abs().le(&QUATERNION_NORM_TOLERANCE) {
                    return Err(format!("orientation [{w}, {x}, {y}, {z}] is not a unit quaternion"));
                }
                UnitQuaternion::from_quaternion(q)
            }
        };
        Ok(Pose::new(Vector3::from(self.position), orientation))
    }

    pub fn from_pose(pose: &Pose) -> Self {
        let q = pose.orientation.quaternion();
        Self {
            position: pose.position.into(),
            orientation: Some([q.w, q.i, q.j, q.k]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub name: String,
    pub joints: Vec<JointEntry>,
    #[serde(default)]
    pub base_pose: Option<PoseEntry>,
    #[serde(default)]
    pub tool_offset: Option<PoseEntry>,
}

impl ChainFile {
    pub fn to_chain(&self) -> Result<KinematicChain, String> {
        let joints = self
            .joints
            .iter()
            .map(|j| JointDef::new(j.a, j.alpha, j.d, j.theta_offset, j.q_min, j.q_max))
            .collect();
        let pose = |p: &Option<PoseEntry>, what: &str| match p {
            Some(p) => p.to_pose().map_err(|e| format!("{what}: {e}")),
            None => Ok(Pose::identity()),
        };
        KinematicChain::new(joints, pose(&self.base_pose, "base_pose")?, pose(&self.tool_offset, "tool_offset")?)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowsEntry {
    Named(String),
    Indices(Vec<usize>),
}

impl RowsEntry {
    pub fn to_selector(&self) -> Result<RowSelector, String> {
        match self {
            RowsEntry::Named(name) => match name.as_str() {
                "position" => Ok(RowSelector::Position),
                "orientation" => Ok(RowSelector::Orientation),
                "full" => Ok(RowSelector::Full),
                other => Err(format!("unknown row selector '{other}' (expected position, orientation, full or an index list)")),
            },
            RowsEntry::Indices(rows) => Ok(RowSelector::Rows(rows.clone())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveEntry {
    EndEffectorPosition,
    EndEffectorPose,
    /// `joint` is 1-based.
    JointValue { joint: usize },
    Manipulability {
        rows: RowsEntry,
        #[serde(default)]
        step: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindEntry {
    Equality,
    SetBased,
    Optimization,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainEntry {
    Uniform(f64),
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideEntry {
    /// Defaults to the joint bound for joint tasks and to 0 for the lower
    /// side of manipulability tasks.
    #[serde(default)]
    pub physical: Option<f64>,
    pub safety: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdEntry {
    #[serde(default)]
    pub lower: Option<SideEntry>,
    #[serde(default)]
    pub upper: Option<SideEntry>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

/// `"trajectory"`, a number, a position `[x, y, z]` or a pose object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesiredEntry {
    Keyword(String),
    Scalar(f64),
    Position([f64; 3]),
    Pose(PoseEntry),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterpartEntry {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default)]
    pub desired: Option<f64>,
    #[serde(default)]
    pub gain: Option<f64>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub id: String,
    pub kind: KindEntry,
    pub objective: ObjectiveEntry,
    pub gain: GainEntry,
    pub priority: u32,
    #[serde(default)]
    pub thresholds: Option<ThresholdEntry>,
    #[serde(default)]
    pub desired: Option<DesiredEntry>,
    #[serde(default)]
    pub counterpart: Option<CounterpartEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyFile {
    pub tasks: Vec<TaskEntry>,
}

impl TaskEntry {
    pub fn to_spec(&self, chain: &KinematicChain) -> Result<TaskSpec, String> {
        let ctx = |msg: String| format!("task '{}': {msg}", self.id);
        let objective = match &self.objective {
            ObjectiveEntry::EndEffectorPosition => Objective::EndEffectorPosition,
            ObjectiveEntry::EndEffectorPose => Objective::EndEffectorPose,
            ObjectiveEntry::JointValue { joint } => Objective::JointValue { joint: *joint },
            ObjectiveEntry::Manipulability { rows, step } => Objective::Manipulability {
                rows: rows.to_selector().map_err(ctx)?,
                step: step.unwrap_or(DEFAULT_MANIPULABILITY_STEP),
            },
        };
        let kind = match self.kind {
            KindEntry::Equality => TaskKind::Equality,
            KindEntry::SetBased => TaskKind::SetBased,
            KindEntry::Optimization => TaskKind::Optimization,
        };
        let gain = match &self.gain {
            GainEntry::Uniform(k) => Gain::Uniform(*k),
            GainEntry::Diagonal(d) => Gain::Diagonal(d.clone()),
        };
        let thresholds = match (&self.thresholds, kind) {
            (Some(th), TaskKind::SetBased) => Some(self.threshold_set(th, &objective, chain).map_err(ctx)?),
            (None, TaskKind::SetBased) => return Err(ctx("set-based tasks need thresholds".into())),
            (Some(_), _) => return Err(ctx("only set-based tasks carry thresholds".into())),
            (None, _) => None,
        };
        let desired = match (&self.desired, kind) {
            (_, TaskKind::SetBased) => {
                if self.desired.is_some() {
                    return Err(ctx("set-based tasks take their desired value from the thresholds".into()));
                }
                Reference::Constant(TaskValue::Scalar(0.0))
            }
            (None, _) => return Err(ctx("missing 'desired'".into())),
            (Some(DesiredEntry::Keyword(k)), _) if k == "trajectory" => Reference::Trajectory,
            (Some(DesiredEntry::Keyword(k)), _) => return Err(ctx(format!("unknown desired keyword '{k}'"))),
            (Some(DesiredEntry::Scalar(v)), _) => Reference::Constant(TaskValue::Scalar(*v)),
            (Some(DesiredEntry::Position(p)), _) => Reference::Constant(TaskValue::Position(Vector3::from(*p))),
            (Some(DesiredEntry::Pose(p)), _) => Reference::Constant(TaskValue::Pose(p.to_pose().map_err(ctx)?)),
        };
        let counterpart = match (&self.counterpart, kind) {
            (Some(c), TaskKind::SetBased) => Some(CounterpartConfig {
                enabled: c.enabled,
                desired: c.desired,
                gain: c.gain,
            }),
            (Some(_), _) => return Err(ctx("only set-based tasks have optimization counterparts".into())),
            (None, _) => None,
        };
        Ok(TaskSpec {
            id: self.id.clone(),
            kind,
            objective,
            gain,
            priority_rank: self.priority,
            thresholds,
            desired,
            counterpart,
        })
    }

    fn threshold_set(&self, th: &ThresholdEntry, objective: &Objective, chain: &KinematicChain) -> Result<ThresholdSet, String> {
        let joint_bounds = match objective {
            Objective::JointValue { joint } if *joint >= 1 && *joint <= chain.dof() => {
                let j = chain.joints()[joint - 1];
                Some((j.q_min, j.q_max))
            }
            _ => None,
        };
        let lower = match &th.lower {
            None => None,
            Some(side) => {
                let physical = side
                    .physical
                    .or(joint_bounds.map(|b| b.0))
                    .or(matches!(objective, Objective::Manipulability { .. }).then_some(0.0))
                    .ok_or("lower side needs a physical bound")?;
                Some(ThresholdSide { physical, safety: side.safety })
            }
        };
        let upper = match &th.upper {
            None => None,
            Some(side) => {
                let physical = side
                    .physical
                    .or(joint_bounds.map(|b| b.1))
                    .ok_or("upper side needs a physical bound")?;
                Some(ThresholdSide { physical, safety: side.safety })
            }
        };
        ThresholdSet::new(lower, upper, th.epsilon.unwrap_or(DEFAULT_EPSILON)).map_err(|e| e.to_string())
    }
}

impl HierarchyFile {
    pub fn to_hierarchy(&self, chain: &KinematicChain) -> Result<Hierarchy, String> {
        let specs = self
            .tasks
            .iter()
            .map(|t| t.to_spec(chain))
            .collect::<Result<Vec<_>, _>>()?;
        Hierarchy::new(specs, chain).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFrame {
    /// Waypoints are world poses.
    #[default]
    Absolute,
    /// Waypoint positions are offsets from the tool position at `q0`;
    /// orientations are applied on top of the tool orientation at `q0`.
    Relative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    #[serde(default)]
    pub frame: PathFrame,
    pub segment_speed: f64,
    #[serde(default = "default_true")]
    pub hold_orientation: bool,
    #[serde(default)]
    pub loop_back: bool,
    pub waypoints: Vec<PoseEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleEntry {
    #[default]
    Literal,
    Relaxed,
}

fn default_velocity_limit() -> Option<f64> {
    Some(SolverConfig::default().velocity_limit)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    #[serde(default)]
    pub damping_max: Option<f64>,
    #[serde(default)]
    pub sv_threshold: Option<f64>,
    /// rad/s; `null` disables the clamp.
    #[serde(default = "default_velocity_limit")]
    pub velocity_limit: Option<f64>,
    #[serde(default)]
    pub deactivation_rule: RuleEntry,
    #[serde(default)]
    pub deactivation_tolerance: Option<f64>,
    #[serde(default)]
    pub max_active_set_iterations: Option<usize>,
}

impl Default for SolverEntry {
    fn default() -> Self {
        Self {
            damping_max: None,
            sv_threshold: None,
            velocity_limit: default_velocity_limit(),
            deactivation_rule: RuleEntry::default(),
            deactivation_tolerance: None,
            max_active_set_iterations: None,
        }
    }
}

impl SolverEntry {
    pub fn to_config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            damping_max: self.damping_max.unwrap_or(d.damping_max),
            sv_threshold: self.sv_threshold.unwrap_or(d.sv_threshold),
            velocity_limit: self.velocity_limit.unwrap_or(f64::INFINITY),
            activation: ActivationConfig {
                rule: match self.deactivation_rule {
                    RuleEntry::Literal => DeactivationRule::Literal,
                    RuleEntry::Relaxed => DeactivationRule::Relaxed,
                },
                sign_tolerance: self.deactivation_tolerance.unwrap_or(d.activation.sign_tolerance),
            },
            max_active_set_iterations: self.max_active_set_iterations,
        }
    }
}

fn default_dt() -> f64 {
    0.005
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub chain: PathBuf,
    pub hierarchy: PathBuf,
    pub q0: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub with_optimization: bool,
    pub path: PathEntry,
    #[serde(default)]
    pub solver: SolverEntry,
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub with_optimization: Option<bool>,
    pub damping: Option<f64>,
}

/// Scenario ready to run, with the chain file name kept for reports.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub name: String,
    pub source: PathBuf,
    pub scenario: Scenario,
}

fn read(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, AppError> {
    serde_json::from_str(&read(path)?).map_err(|source| AppError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_chain(path: &Path) -> Result<KinematicChain, AppError> {
    let file: ChainFile = parse(path)?;
    file.to_chain().map_err(|m| AppError::validation(path, m))
}

pub fn load_hierarchy(path: &Path, chain: &KinematicChain) -> Result<Hierarchy, AppError> {
    let file: HierarchyFile = parse(path)?;
    file.to_hierarchy(chain).map_err(|m| AppError::validation(path, m))
}

pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<LoadedScenario, AppError> {
    let file: ScenarioFile = parse(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let chain = load_chain(&dir.join(&file.chain))?;
    let hierarchy = load_hierarchy(&dir.join(&file.hierarchy), &chain)?;
    let invalid = |m: String| AppError::validation(path, m);

    if file.q0.len() != chain.dof() {
        return Err(invalid(format!("q0 has {} entries, chain has {} joints", file.q0.len(), chain.dof())));
    }
    let mut waypoints = file
        .path
        .waypoints
        .iter()
        .enumerate()
        .map(|(i, w)| w.to_pose().map_err(|e| invalid(format!("path.waypoints[{i}]: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if file.path.frame == PathFrame::Relative {
        let home = chain.forward_kinematics(&file.q0).map_err(|e| invalid(e.to_string()))?;
        for w in &mut waypoints {
            *w = Pose::new(home.position + w.position, w.orientation * home.orientation);
        }
    }
    let path_model = WaypointPath::new(
        waypoints,
        file.path.segment_speed,
        file.path.hold_orientation,
        file.path.loop_back,
    )
    .map_err(|e| invalid(e.to_string()))?;

    let mut solver = file.solver.to_config();
    if let Some(damping) = overrides.damping {
        solver.damping_max = damping;
    }
    let scenario = Scenario {
        chain,
        hierarchy,
        path: path_model,
        q0: file.q0,
        dt: overrides.dt.unwrap_or(file.dt),
        duration: overrides.duration.unwrap_or(file.duration),
        with_optimization: overrides.with_optimization.unwrap_or(file.with_optimization),
        solver,
    };
    scenario.validate().map_err(|e| invalid(e.to_string()))?;
    // Surface counterpart problems (e.g. a one-sided task without a target)
    // at load time rather than only when optimization is switched on.
    scenario
        .hierarchy
        .with_optimization_counterparts(&scenario.chain)
        .map_err(|e| invalid(e.to_string()))?;
    Ok(LoadedScenario {
        name: file.name,
        source: path.to_path_buf(),
        scenario,
    })
}
