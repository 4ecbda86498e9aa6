//! Waypoint paths, Euler integration of the hierarchy solution and run metrics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{ComplexField, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::kinematics::{KinematicChain, Pose, RowSelector};
use crate::solver::{initial_states, resolve_cycle, SolverConfig, TrajectorySample};
use crate::tasks::{Hierarchy, Mode, Objective, TaskValue};

/// Piecewise-linear end-effector path traversed at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<Pose>,
    segment_speed: f64,
    hold_orientation: bool,
    loop_back: bool,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start_time: f64,
    duration: f64,
    from: Pose,
    to: Pose,
}

impl WaypointPath {
    /// `loop_back` appends the reversed path, so the reference returns to the
    /// first waypoint. With `hold_orientation` the first waypoint's orientation
    /// is kept throughout; otherwise orientation is slerped per segment.
    pub fn new(waypoints: Vec<Pose>, segment_speed: f64, hold_orientation: bool, loop_back: bool) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::invalid("path", "at least two waypoints are required"));
        }
        if !(segment_speed > 0.0 && segment_speed.is_finite()) {
            return Err(Error::invalid("path", format!("segment speed must be positive, got {segment_speed}")));
        }
        if waypoints
            .iter()
            .any(|w| w.position.iter().chain(w.orientation.coords.iter()).any(|v| !v.is_finite()))
        {
            return Err(Error::invalid("path", "waypoints must be finite"));
        }
        let mut sequence: Vec<Pose> = waypoints.clone();
        if loop_back {
            sequence.extend(waypoints.iter().rev().skip(1).copied());
        }
        if hold_orientation {
            let held = waypoints[0].orientation;
            for pose in &mut sequence {
                pose.orientation = held;
            }
        }
        let mut segments = Vec::with_capacity(sequence.len() - 1);
        let mut clock = 0.0;
        for pair in sequence.windows(2) {
            let duration = (pair[1].position - pair[0].position).norm() / segment_speed;
            segments.push(Segment {
                start_time: clock,
                duration,
                from: pair[0],
                to: pair[1],
            });
            clock += duration;
        }
        Ok(Self {
            waypoints,
            segment_speed,
            hold_orientation,
            loop_back,
            segments,
        })
    }

    pub fn waypoints(&self) -> &[Pose] {
        &self.waypoints
    }

    pub fn segment_speed(&self) -> f64 {
        self.segment_speed
    }

    pub fn hold_orientation(&self) -> bool {
        self.hold_orientation
    }

    pub fn loop_back(&self) -> bool {
        self.loop_back
    }

    /// Time at which the reference reaches its final pose.
    pub fn total_duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start_time + s.duration)
    }

    /// Reference pose and its velocity at time `t`. Segment boundaries belong
    /// to the segment that starts there; after the end the last pose is held.
    pub fn sample(&self, t: f64) -> TrajectorySample {
        let active = self
            .segments
            .iter()
            .find(|s| s.duration > 0.0 && t < s.start_time + s.duration && t >= s.start_time);
        match active {
            Some(seg) => {
                let s = ((t - seg.start_time) / seg.duration).clamp(0.0, 1.0);
                let delta = seg.to.position - seg.from.position;
                let position = seg.from.position + delta * s;
                let linear = delta / seg.duration;
                let (orientation, angular) = if self.hold_orientation {
                    (seg.from.orientation, Vector3::zeros())
                } else {
                    let rel = seg.to.orientation * seg.from.orientation.inverse();
                    let rotvec = rel.scaled_axis();
                    let orientation = UnitQuaternion::from_scaled_axis(rotvec * s) * seg.from.orientation;
                    (orientation, rotvec / seg.duration)
                };
                let mut velocity = Vector6::zeros();
                velocity.fixed_rows_mut::<3>(0).copy_from(&linear);
                velocity.fixed_rows_mut::<3>(3).copy_from(&angular);
                TrajectorySample {
                    pose: Pose::new(position, orientation),
                    velocity,
                }
            }
            None if t < 0.0 => TrajectorySample::at_rest(self.segments[0].from),
            None => TrajectorySample::at_rest(self.segments.last().expect("at least one segment").to),
        }
    }
}

/// Everything needed to replay one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub chain: KinematicChain,
    pub hierarchy: Hierarchy,
    pub path: WaypointPath,
    pub q0: Vec<f64>,
    pub dt: f64,
    pub duration: f64,
    pub with_optimization: bool,
    pub solver: SolverConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("scenario", format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration > self.dt && self.duration.is_finite()) {
            return Err(Error::invalid("scenario", format!("duration {} must exceed dt {}", self.duration, self.dt)));
        }
        if self.q0.len() != self.chain.dof() {
            return Err(Error::config(format!(
                "q0 has {} entries, chain has {} joints",
                self.q0.len(),
                self.chain.dof()
            )));
        }
        if !self.chain.within_bounds(&self.q0) {
            return Err(Error::invalid("scenario", "q0 lies outside the physical joint bounds"));
        }
        self.solver.validate()?;
        Ok(())
    }

    /// Hierarchy actually run: with counterparts when optimization is enabled.
    pub fn effective_hierarchy(&self) -> Result<Hierarchy> {
        if self.with_optimization {
            self.hierarchy.with_optimization_counterparts(&self.chain)
        } else {
            Ok(self.hierarchy.clone())
        }
    }

    pub fn cycles(&self) -> usize {
        // records at t = 0, dt, ..., duration
        (self.duration / self.dt + 1e-9).floor() as usize + 1
    }
}

/// Per-task sample in one trace record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskSample {
    pub value: TaskValue,
    pub mode: Mode,
    pub desired: Option<TaskValue>,
    pub physical_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub q: Vec<f64>,
    pub ee_pose: Pose,
    pub desired_pose: Pose,
    /// Parallel to [`Trace::task_ids`].
    pub tasks: Vec<TaskSample>,
    pub qdot: Vec<f64>,
    pub saturated: bool,
    /// Manipulability over [`Trace::manipulability_rows`], when defined.
    pub manipulability: Option<f64>,
}

impl TraceRecord {
    pub fn position_error(&self) -> f64 {
        (self.desired_pose.position - self.ee_pose.position).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub task_ids: Vec<String>,
    pub manipulability_rows: Option<RowSelector>,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioMetrics {
    pub tracking_rmse: f64,
    pub max_tracking_error: f64,
    /// Entries into an active mode, per set-based task.
    pub activation_count: BTreeMap<String, u32>,
    pub active_time_fraction: BTreeMap<String, f64>,
    pub min_manipulability: Option<f64>,
    pub physical_violation_count: usize,
    /// Joint-value set-based tasks that were active at least once.
    pub joints_reaching_limits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub hierarchy: Hierarchy,
    pub trace: Trace,
    pub metrics: ScenarioMetrics,
}

fn manipulability_rows(hierarchy: &Hierarchy, chain: &KinematicChain) -> Option<RowSelector> {
    let from_task = hierarchy.tasks().iter().find_map(|t| match &t.objective {
        Objective::Manipulability { rows, .. } => Some(rows.clone()),
        _ => None,
    });
    from_task.or(match chain.dof() {
        n if n >= 6 => Some(RowSelector::Full),
        n if n >= 3 => Some(RowSelector::Position),
        _ => None,
    })
}

/// Replays `scenario` with explicit Euler steps `q ← q + q̇ dt`.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    scenario.validate()?;
    let hierarchy = scenario.effective_hierarchy()?;
    let chain = &scenario.chain;
    let rows = manipulability_rows(&hierarchy, chain);
    let task_ids: Vec<String> = hierarchy.tasks().iter().map(|t| t.id.clone()).collect();
    let cycles = scenario.cycles();

    let mut q = scenario.q0.clone();
    let mut states = initial_states(&hierarchy, chain, &q)?;
    let mut records = Vec::with_capacity(cycles);
    for k in 0..cycles {
        let t = k as f64 * scenario.dt;
        let reference = scenario.path.sample(t);
        let outcome = resolve_cycle(&hierarchy, &states, chain, &q, t, &reference, &scenario.solver)?;
        let ee_pose = chain.forward_kinematics(&q)?;
        let manipulability = match &rows {
            Some(r) => Some(chain.manipulability(&q, r)?),
            None => None,
        };
        let qdot: Vec<f64> = outcome.solution.qdot.iter().copied().collect();
        if qdot.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalAbort {
                cycle: k,
                reason: String::from("joint velocity is not finite"),
            });
        }
        records.push(TraceRecord {
            t,
            q: q.clone(),
            ee_pose,
            desired_pose: reference.pose,
            tasks: outcome
                .tasks
                .iter()
                .map(|s| TaskSample {
                    value: s.value,
                    mode: s.mode,
                    desired: s.desired,
                    physical_violation: s.physical_violation,
                })
                .collect(),
            qdot: qdot.clone(),
            saturated: outcome.solution.saturated,
            manipulability,
        });
        for (qi, vi) in q.iter_mut().zip(&qdot) {
            *qi += vi * scenario.dt;
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalAbort {
                cycle: k,
                reason: String::from("joint state is not finite after integration"),
            });
        }
        states = outcome.states;
    }
    let trace = Trace {
        task_ids,
        manipulability_rows: rows,
        records,
    };
    let metrics = compute_metrics(&trace, &hierarchy)?;
    Ok(ScenarioRun { hierarchy, trace, metrics })
}

/// Summary statistics of a trace.
pub fn compute_metrics(trace: &Trace, hierarchy: &Hierarchy) -> Result<ScenarioMetrics> {
    if trace.records.is_empty() {
        return Err(Error::invalid("trace", "no records"));
    }
    let count = trace.records.len() as f64;
    let mut sq_sum = 0.0;
    let mut max_err: f64 = 0.0;
    for r in &trace.records {
        let e = r.position_error();
        sq_sum += e * e;
        max_err = max_err.max(e);
    }

    let mut activation_count = BTreeMap::new();
    let mut active_time_fraction = BTreeMap::new();
    let mut joints_reaching_limits = 0;
    for (i, id) in trace.task_ids.iter().enumerate() {
        let spec = hierarchy
            .find(id)
            .ok_or_else(|| Error::config(format!("trace task '{id}' is not in the hierarchy")))?;
        if !spec.is_set_based() {
            continue;
        }
        let mut previous = Mode::Inactive;
        let mut entries = 0u32;
        let mut active = 0usize;
        for r in &trace.records {
            let mode = r
                .tasks
                .get(i)
                .ok_or_else(|| Error::config("trace record is missing task samples"))?
                .mode;
            if mode.is_active() {
                active += 1;
                if mode != previous {
                    entries += 1;
                }
            }
            previous = mode;
        }
        if entries > 0 && matches!(spec.objective, Objective::JointValue { .. }) {
            joints_reaching_limits += 1;
        }
        activation_count.insert(id.clone(), entries);
        active_time_fraction.insert(id.clone(), active as f64 / count);
    }

    let min_manipulability = trace
        .records
        .iter()
        .filter_map(|r| r.manipulability)
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.min(w))));
    let physical_violation_count = trace
        .records
        .iter()
        .map(|r| r.tasks.iter().filter(|s| s.physical_violation).count())
        .sum();

    Ok(ScenarioMetrics {
        tracking_rmse: ComplexField::sqrt(sq_sum / count),
        max_tracking_error: max_err,
        activation_count,
        active_time_fraction,
        min_manipulability,
        physical_violation_count,
        joints_reaching_limits,
    })
}
