//! Per-cycle resolution of a task hierarchy.
//!
//! Each level contributes the closed-loop inverse kinematics velocity
//! `J†(σ̇_d + K σ̃)`, projected into the null space of the augmented Jacobian
//! of every level above it. Set-based tasks enter and leave the hierarchy
//! through a small fixed-point loop over the active set.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Vector6};

use crate::error::{Error, Result};
use crate::kinematics::{Jacobian, KinematicChain, Pose};
use crate::tasks::{
    active_desired, evaluate_task, task_error, update_activation, ActivationConfig, Hierarchy, Mode, Objective,
    Reference, SetBasedState, TaskEvaluation, TaskKind, TaskSpec, TaskValue,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Largest damping factor, reached when a singular value hits zero.
    pub damping_max: f64,
    /// Singular values below this are damped.
    pub sv_threshold: f64,
    /// Per-joint speed limit (rad/s); `f64::INFINITY` disables the clamp.
    pub velocity_limit: f64,
    pub activation: ActivationConfig,
    /// Cap on active-set iterations per cycle; `None` uses twice the number
    /// of set-based tasks plus one.
    pub max_active_set_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping_max: 0.05,
            sv_threshold: 1e-4,
            velocity_limit: 0.6,
            activation: ActivationConfig::default(),
            max_active_set_iterations: None,
        }
    }
}

impl SolverConfig {
    /// Configuration without damping or velocity clamp. Singular values below
    /// the threshold are truncated, so the pseudoinverse is exact for
    /// well-conditioned matrices.
    pub fn undamped() -> Self {
        Self {
            damping_max: 0.0,
            velocity_limit: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::invalid("solver", format!("{what} must be positive, got {v}")));
        if !(self.damping_max >= 0.0 && self.damping_max.is_finite()) {
            return bad("damping_max", self.damping_max);
        }
        if !(self.sv_threshold > 0.0 && self.sv_threshold.is_finite()) {
            return bad("sv_threshold", self.sv_threshold);
        }
        if self.velocity_limit.is_nan() || self.velocity_limit <= 0.0 {
            return bad("velocity_limit", self.velocity_limit);
        }
        if !(self.activation.sign_tolerance >= 0.0 && self.activation.sign_tolerance.is_finite()) {
            return bad("deactivation sign tolerance", self.activation.sign_tolerance);
        }
        if self.max_active_set_iterations == Some(0) {
            return Err(Error::invalid("solver", "max_active_set_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Inverse of one singular value. Values below the threshold are damped
    /// with `λ² = (1 - (s / s_min)²) λ_max²`, so the inverse stays bounded by
    /// `1 / (2λ)` and vanishes at `s = 0`.
    fn inverse_singular_value(&self, s: f64) -> f64 {
        if s >= self.sv_threshold {
            return 1.0 / s;
        }
        if self.damping_max == 0.0 {
            // undamped: truncate
            return 0.0;
        }
        let ratio = s / self.sv_threshold;
        let lambda_sq = (1.0 - ratio * ratio) * self.damping_max * self.damping_max;
        s / (s * s + lambda_sq)
    }
}

struct Decomposition {
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
}

fn decompose(jac: &DMatrix<f64>) -> Decomposition {
    let svd = jac.clone().svd(true, true);
    Decomposition {
        u: svd.u.expect("requested U"),
        singular: svd.singular_values,
        v_t: svd.v_t.expect("requested Vᵀ"),
    }
}

/// Damped Moore–Penrose pseudoinverse (n×m) of an m×n matrix via SVD.
pub fn damped_pseudoinverse(jac: &DMatrix<f64>, cfg: &SolverConfig) -> DMatrix<f64> {
    let (m, n) = jac.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let d = decompose(jac);
    let inv = d.singular.map(|s| cfg.inverse_singular_value(s));
    // V diag(inv) Uᵀ
    let mut v = d.v_t.transpose();
    for (k, mut col) in v.column_iter_mut().enumerate() {
        col *= inv[k];
    }
    v * d.u.transpose()
}

/// `I - J†J` using the damped pseudoinverse.
pub fn null_space_projector(jac: &DMatrix<f64>, cfg: &SolverConfig) -> DMatrix<f64> {
    projector_with_rank(jac, cfg).0
}

fn projector_with_rank(jac: &DMatrix<f64>, cfg: &SolverConfig) -> (DMatrix<f64>, usize) {
    let (m, n) = jac.shape();
    if m == 0 {
        return (DMatrix::identity(n, n), n);
    }
    let d = decompose(jac);
    let mut projector = DMatrix::identity(n, n);
    let mut rank = 0;
    for (k, &s) in d.singular.iter().enumerate() {
        // J†J = V diag(s · s⁺) Vᵀ
        let weight = s * cfg.inverse_singular_value(s);
        if s >= cfg.sv_threshold {
            rank += 1;
        }
        if weight != 0.0 {
            let row = d.v_t.row(k);
            projector -= weight * row.transpose() * row;
        }
    }
    (projector, n - rank)
}

/// Inputs of one hierarchy level: Jacobian, error, feedforward and gain.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLevel {
    pub id: String,
    pub jacobian: Jacobian,
    /// `σ̃ = σ_d - σ`.
    pub error: DVector<f64>,
    /// `σ̇_d`.
    pub feedforward: DVector<f64>,
    /// Diagonal of `K`.
    pub gain: DVector<f64>,
}

impl HierarchyLevel {
    pub fn new(id: impl Into<String>, jacobian: Jacobian, error: DVector<f64>, feedforward: DVector<f64>, gain: DVector<f64>) -> Self {
        Self {
            id: id.into(),
            jacobian,
            error,
            feedforward,
            gain,
        }
    }

    /// Level with zero feedforward and uniform gain.
    pub fn regulation(id: impl Into<String>, jacobian: Jacobian, error: DVector<f64>, gain: f64) -> Self {
        let m = jacobian.nrows();
        Self::new(id, jacobian, error, DVector::zeros(m), DVector::from_element(m, gain))
    }

    fn check(&self, n: usize) -> Result<()> {
        let m = self.jacobian.nrows();
        if self.jacobian.ncols() != n {
            return Err(Error::config(format!(
                "level '{}' Jacobian has {} columns, expected {n}",
                self.id,
                self.jacobian.ncols()
            )));
        }
        if self.error.len() != m || self.feedforward.len() != m || self.gain.len() != m {
            return Err(Error::config(format!("level '{}' vectors do not match its {m} rows", self.id)));
        }
        Ok(())
    }
}

/// `q̇ = J†(σ̇_d + K σ̃)` for one level.
pub fn clik_velocity(level: &HierarchyLevel, cfg: &SolverConfig) -> DVector<f64> {
    let command = &level.feedforward + level.gain.component_mul(&level.error);
    damped_pseudoinverse(&level.jacobian, cfg) * command
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    pub id: String,
    pub error: DVector<f64>,
    /// Projected contribution `N_{i-1}^A q̇_i` of this level.
    pub contribution: DVector<f64>,
    /// `n - rank(J_i^A)` after stacking this level.
    pub projector_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySolution {
    pub qdot: DVector<f64>,
    pub levels: Vec<LevelDiagnostics>,
    /// Set-based tasks in the final hierarchy and their modes.
    pub active_set: Vec<(String, Mode)>,
    /// The velocity clamp scaled the command down.
    pub saturated: bool,
}

/// Null-space-based composition `q̇ = Σ N_{i-1}^A q̇_i` with `N_0^A = I`,
/// followed by the uniform velocity clamp.
pub fn nsb_compose(levels: &[HierarchyLevel], cfg: &SolverConfig) -> Result<HierarchySolution> {
    let first = levels.first().ok_or_else(|| Error::logic("cannot compose an empty hierarchy"))?;
    let n = first.jacobian.ncols();
    for level in levels {
        level.check(n)?;
    }
    let mut qdot = DVector::zeros(n);
    let mut projector = DMatrix::identity(n, n);
    let mut augmented = DMatrix::zeros(0, n);
    let mut diagnostics = Vec::with_capacity(levels.len());
    let last = levels.len() - 1;
    for (i, level) in levels.iter().enumerate() {
        let contribution = &projector * clik_velocity(level, cfg);
        qdot += &contribution;
        augmented = stack_rows(&augmented, &level.jacobian);
        let projector_rank = if i < last {
            let (next, rank) = projector_with_rank(&augmented, cfg);
            projector = next;
            rank
        } else {
            projector_with_rank(&augmented, cfg).1
        };
        diagnostics.push(LevelDiagnostics {
            id: level.id.clone(),
            error: level.error.clone(),
            contribution,
            projector_rank,
        });
    }
    let saturated = clamp_uniform(&mut qdot, cfg.velocity_limit);
    Ok(HierarchySolution {
        qdot,
        levels: diagnostics,
        active_set: Vec::new(),
        saturated,
    })
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let n = top.ncols();
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), n);
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Scales `qdot` uniformly so that no entry exceeds `limit`. Returns whether
/// scaling was applied.
fn clamp_uniform(qdot: &mut DVector<f64>, limit: f64) -> bool {
    let peak = qdot.amax();
    if peak > limit {
        *qdot *= limit / peak;
        true
    } else {
        false
    }
}

/// Desired end-effector pose and its 6-D velocity (linear, angular) at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub pose: Pose,
    pub velocity: Vector6<f64>,
}

impl TrajectorySample {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            velocity: Vector6::zeros(),
        }
    }
}

/// Per-task record of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSnapshot {
    pub id: String,
    pub value: TaskValue,
    /// `None` for inactive set-based tasks.
    pub desired: Option<TaskValue>,
    pub mode: Mode,
    pub physical_violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    pub solution: HierarchySolution,
    /// Updated activation states, parallel to the hierarchy's task list.
    pub states: Vec<SetBasedState>,
    pub tasks: Vec<TaskSnapshot>,
    pub iterations: usize,
    /// False when the active-set loop hit its cap and fell back to the
    /// conservative set.
    pub converged: bool,
}

/// Activation states for the start of a run: every set-based task whose
/// value already sits beyond an activation threshold starts active.
pub fn initial_states(hierarchy: &Hierarchy, chain: &KinematicChain, q: &[f64]) -> Result<Vec<SetBasedState>> {
    hierarchy
        .tasks()
        .iter()
        .map(|task| {
            if task.is_set_based() {
                let value = scalar_value(task, &evaluate_task(task, chain, q)?)?;
                SetBasedState::initial(task, value)
            } else {
                Ok(SetBasedState::default())
            }
        })
        .collect()
}

fn scalar_value(task: &TaskSpec, eval: &TaskEvaluation) -> Result<f64> {
    eval.value
        .as_scalar()
        .ok_or_else(|| Error::logic(format!("set-based task '{}' is not scalar", task.id)))
}

fn trajectory_target(objective: &Objective, reference: &TrajectorySample) -> Result<(TaskValue, DVector<f64>)> {
    match objective {
        Objective::EndEffectorPosition => Ok((
            TaskValue::Position(reference.pose.position),
            DVector::from_column_slice(reference.velocity.fixed_rows::<3>(0).as_slice()),
        )),
        Objective::EndEffectorPose => Ok((
            TaskValue::Pose(reference.pose),
            DVector::from_column_slice(reference.velocity.as_slice()),
        )),
        _ => Err(Error::config("only end-effector tasks follow the trajectory")),
    }
}

struct Prepared<'a> {
    spec: &'a TaskSpec,
    eval: TaskEvaluation,
    /// Target and feedforward for tasks that are always in the hierarchy.
    fixed_target: Option<(TaskValue, DVector<f64>)>,
}

impl Prepared<'_> {
    fn level(&self, mode: Mode, state: &SetBasedState) -> Result<Option<HierarchyLevel>> {
        let (desired, feedforward) = match (&self.fixed_target, self.spec.kind) {
            (Some((d, ff)), _) => (*d, ff.clone()),
            (None, TaskKind::SetBased) => {
                if !mode.is_active() {
                    return Ok(None);
                }
                let st = SetBasedState { mode, ..*state };
                (TaskValue::Scalar(active_desired(self.spec, &st)?), DVector::zeros(1))
            }
            (None, _) => unreachable!("non set-based tasks always carry a target"),
        };
        let error = task_error(&self.eval.value, &desired)?;
        Ok(Some(HierarchyLevel::new(
            self.spec.id.clone(),
            self.eval.jacobian.clone(),
            error,
            feedforward,
            self.spec.gain.diagonal(self.spec.dim()),
        )))
    }
}

fn build_levels(
    prepared: &[Prepared<'_>],
    modes: &[Mode],
    states: &[SetBasedState],
    skip: Option<usize>,
) -> Result<Vec<HierarchyLevel>> {
    let mut levels = Vec::with_capacity(prepared.len());
    for (i, p) in prepared.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if let Some(level) = p.level(modes[i], &states[i])? {
            levels.push(level);
        }
    }
    Ok(levels)
}

fn solve_or_rest(levels: &[HierarchyLevel], n: usize, cfg: &SolverConfig) -> Result<HierarchySolution> {
    if levels.is_empty() {
        Ok(HierarchySolution {
            qdot: DVector::zeros(n),
            levels: Vec::new(),
            active_set: Vec::new(),
            saturated: false,
        })
    } else {
        nsb_compose(levels, cfg)
    }
}

/// One control cycle: evaluates every task at `q`, settles the set of
/// active set-based tasks and returns the joint velocity of the final
/// hierarchy.
///
/// Inactive tasks beyond an activation threshold are inserted; each active
/// task is then tested, highest priority first, against the solution of
/// the hierarchy without it. The first task released restarts the loop. A
/// task released during a cycle is not re-inserted in the same cycle by
/// the activation check; once the set settles, a released task that the
/// final velocity would still push outward is reinstated and kept for the
/// rest of the cycle.
pub fn resolve_cycle(
    hierarchy: &Hierarchy,
    states: &[SetBasedState],
    chain: &KinematicChain,
    q: &[f64],
    t: f64,
    reference: &TrajectorySample,
    cfg: &SolverConfig,
) -> Result<CycleOutcome> {
    let tasks = hierarchy.tasks();
    if states.len() != tasks.len() {
        return Err(Error::config(format!(
            "{} activation states for {} tasks",
            states.len(),
            tasks.len()
        )));
    }
    let n = chain.dof();
    let mut prepared = Vec::with_capacity(tasks.len());
    for spec in tasks {
        let eval = evaluate_task(spec, chain, q)?;
        let fixed_target = match (spec.kind, &spec.desired) {
            (TaskKind::SetBased, _) => None,
            (_, Reference::Trajectory) => Some(trajectory_target(&spec.objective, reference)?),
            (_, Reference::Constant(v)) => Some((*v, DVector::zeros(spec.dim()))),
        };
        prepared.push(Prepared { spec, eval, fixed_target });
    }

    let set_based: Vec<usize> = hierarchy.set_based().map(|(i, _)| i).collect();
    let mut violations = vec![false; tasks.len()];
    for &i in &set_based {
        let value = scalar_value(&tasks[i], &prepared[i].eval)?;
        let th = tasks[i].thresholds.as_ref().expect("set-based tasks carry thresholds");
        if th.violates_physical(value) {
            violations[i] = true;
            log::warn!("task '{}' value {value} outside its physical bounds at t={t}", tasks[i].id);
        }
    }

    let mut modes: Vec<Mode> = states.iter().map(|s| s.mode).collect();
    let mut released: Vec<Option<Mode>> = vec![None; tasks.len()];
    let mut pinned = vec![false; tasks.len()];
    let mut ever_active: Vec<Mode> = modes.clone();
    let max_iterations = cfg.max_active_set_iterations.unwrap_or(2 * set_based.len() + 1);
    let mut iterations = 0;
    let mut settled = None;

    while iterations < max_iterations {
        iterations += 1;
        for &i in &set_based {
            if modes[i] == Mode::Inactive && released[i].is_none() {
                let value = scalar_value(&tasks[i], &prepared[i].eval)?;
                let st = SetBasedState { mode: modes[i], ..states[i] };
                modes[i] = update_activation(&tasks[i], &st, value, 0.0, t, &cfg.activation)?.state.mode;
                if modes[i].is_active() {
                    ever_active[i] = modes[i];
                }
            }
        }
        let solution = solve_or_rest(&build_levels(&prepared, &modes, states, None)?, n, cfg)?;

        let mut changed = false;
        for &i in &set_based {
            if !modes[i].is_active() || pinned[i] {
                continue;
            }
            let without = solve_or_rest(&build_levels(&prepared, &modes, states, Some(i))?, n, cfg)?;
            let directional = (&prepared[i].eval.jacobian * &without.qdot)[0];
            let value = scalar_value(&tasks[i], &prepared[i].eval)?;
            let st = SetBasedState { mode: modes[i], ..states[i] };
            let next = update_activation(&tasks[i], &st, value, directional, t, &cfg.activation)?.state.mode;
            if next == Mode::Inactive {
                released[i] = Some(modes[i]);
                modes[i] = Mode::Inactive;
                changed = true;
                break;
            }
        }
        if !changed {
            for &i in &set_based {
                let Some(previous) = released[i] else { continue };
                if modes[i].is_active() {
                    continue;
                }
                let directional = (&prepared[i].eval.jacobian * &solution.qdot)[0];
                let value = scalar_value(&tasks[i], &prepared[i].eval)?;
                let st = SetBasedState { mode: previous, ..states[i] };
                if update_activation(&tasks[i], &st, value, directional, t, &cfg.activation)?.state.mode.is_active() {
                    modes[i] = previous;
                    released[i] = None;
                    pinned[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            settled = Some(solution);
            break;
        }
    }

    let converged = settled.is_some();
    let solution = match settled {
        Some(s) => s,
        None => {
            log::warn!("active set did not settle within {max_iterations} iterations at t={t}; keeping every candidate active");
            modes = ever_active;
            solve_or_rest(&build_levels(&prepared, &modes, states, None)?, n, cfg)?
        }
    };

    let new_states: Vec<SetBasedState> = states
        .iter()
        .zip(&modes)
        .map(|(s, &m)| s.moved_to(m, t))
        .collect();
    let mut snapshots = Vec::with_capacity(tasks.len());
    for (i, p) in prepared.iter().enumerate() {
        let desired = match (&p.fixed_target, modes[i]) {
            (Some((d, _)), _) => Some(*d),
            (None, Mode::Inactive) => None,
            (None, mode) => Some(TaskValue::Scalar(active_desired(p.spec, &SetBasedState { mode, ..states[i] })?)),
        };
        snapshots.push(TaskSnapshot {
            id: p.spec.id.clone(),
            value: p.eval.value,
            desired,
            mode: modes[i],
            physical_violation: violations[i],
        });
    }
    let mut solution = solution;
    solution.active_set = set_based
        .iter()
        .filter(|&&i| modes[i].is_active())
        .map(|&i| (tasks[i].id.clone(), modes[i]))
        .collect();

    Ok(CycleOutcome {
        solution,
        states: new_states,
        tasks: snapshots,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::JointDef;
    use crate::tasks::{TaskSpec, ThresholdSet};
    use approx::assert_relative_eq;

    fn row(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, values.len(), values)
    }

    #[test]
    fn pseudoinverse_of_identity_and_unit_row() {
        let cfg = SolverConfig::default();
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_relative_eq!(damped_pseudoinverse(&eye, &cfg), eye, epsilon = 1e-12);
        let j = row(&[1.0, 0.0]);
        let pinv = damped_pseudoinverse(&j, &cfg);
        assert_relative_eq!(pinv, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), epsilon = 1e-12);
        assert_relative_eq!((&j * &pinv)[(0, 0)], 1.0, epsilon = 1e-12);
        assert_eq!(damped_pseudoinverse(&DMatrix::zeros(0, 3), &cfg).shape(), (3, 0));
    }

    #[test]
    fn damping_bounds_the_gain() {
        let cfg = SolverConfig {
            damping_max: 0.01,
            ..SolverConfig::default()
        };
        let s = 1e-8;
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s]);
        let pinv = damped_pseudoinverse(&j, &cfg);
        let ratio: f64 = s / cfg.sv_threshold;
        let lambda_sq = (1.0 - ratio * ratio) * 0.01 * 0.01;
        let gain = pinv[(1, 1)];
        assert_relative_eq!(gain, s / (s * s + lambda_sq), max_relative = 1e-9);
        assert!(gain <= 1.0 / (2.0 * lambda_sq.sqrt()));
        // the well-conditioned direction is inverted exactly
        assert_relative_eq!(pinv[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_when_well_conditioned() {
        let j = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -0.3, 0.7, 1.1]);
        let exact = j.transpose() * (&j * j.transpose()).try_inverse().unwrap();
        assert_relative_eq!(damped_pseudoinverse(&j, &SolverConfig::default()), exact, epsilon = 1e-10);
    }

    #[test]
    fn projector_examples() {
        let cfg = SolverConfig::default();
        let n = null_space_projector(&row(&[1.0, 0.0]), &cfg);
        assert_relative_eq!(n, DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])), epsilon = 1e-12);
        let square = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        assert!(null_space_projector(&square, &SolverConfig::undamped()).amax() < 1e-10);
        assert_eq!(null_space_projector(&DMatrix::zeros(0, 3), &cfg), DMatrix::identity(3, 3));
    }

    #[test]
    fn clik_examples() {
        let cfg = SolverConfig::default();
        let level = HierarchyLevel::regulation("a", row(&[1.0, 0.0]), DVector::from_element(1, 0.0), 1.0);
        assert_eq!(clik_velocity(&level, &cfg), DVector::zeros(2));
        let level = HierarchyLevel::regulation("a", row(&[1.0, 0.0]), DVector::from_element(1, 0.5), 1.0);
        assert_relative_eq!(clik_velocity(&level, &cfg), DVector::from_vec(vec![0.5, 0.0]), epsilon = 1e-12);
        let j = row(&[3.0, 4.0]);
        let level = HierarchyLevel::new("a", j.clone(), DVector::zeros(1), DVector::from_element(1, 2.0), DVector::from_element(1, 1.0));
        assert_relative_eq!(clik_velocity(&level, &cfg), damped_pseudoinverse(&j, &cfg) * DVector::from_element(1, 2.0), epsilon = 1e-12);
    }

    #[test]
    fn compose_examples() {
        let cfg = SolverConfig::undamped();
        let one = HierarchyLevel::regulation("x", row(&[1.0, 0.0]), DVector::from_element(1, 1.0), 1.0);
        let two = HierarchyLevel::regulation("y", row(&[0.0, 1.0]), DVector::from_element(1, 1.0), 1.0);
        let single = nsb_compose(core::slice::from_ref(&one), &cfg).unwrap();
        assert_eq!(single.qdot, clik_velocity(&one, &cfg));
        let both = nsb_compose(&[one.clone(), two], &cfg).unwrap();
        assert_relative_eq!(both.qdot, DVector::from_vec(vec![1.0, 1.0]), epsilon = 1e-12);
        assert_eq!(both.levels[0].projector_rank, 1);
        assert_eq!(both.levels[1].projector_rank, 0);

        let conflicting = HierarchyLevel::regulation("x2", row(&[1.0, 0.0]), DVector::from_element(1, -3.0), 1.0);
        let sol = nsb_compose(&[one.clone(), conflicting], &cfg).unwrap();
        assert_relative_eq!(sol.qdot, clik_velocity(&one, &cfg), epsilon = 1e-12);
        assert!(sol.levels[1].contribution.amax() < 1e-12);

        assert!(matches!(nsb_compose(&[], &cfg), Err(Error::Logic(_))));
        let wrong = HierarchyLevel::regulation("z", row(&[1.0]), DVector::from_element(1, 1.0), 1.0);
        assert!(nsb_compose(&[one, wrong], &cfg).is_err());
    }

    #[test]
    fn clamp_preserves_direction() {
        let cfg = SolverConfig {
            velocity_limit: 0.5,
            ..SolverConfig::default()
        };
        let level = HierarchyLevel::regulation(
            "p",
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![2.0, -1.0]),
            1.0,
        );
        let sol = nsb_compose(&[level], &cfg).unwrap();
        assert!(sol.saturated);
        assert_relative_eq!(sol.qdot, DVector::from_vec(vec![0.5, -0.25]), epsilon = 1e-12);
    }

    fn chain3() -> KinematicChain {
        KinematicChain::from_joints(vec![JointDef::planar(1.0), JointDef::planar(1.0), JointDef::planar(1.0)]).unwrap()
    }

    #[test]
    fn joint_limit_holds_against_a_pushing_task() {
        // Joint 1 sits at its lower activation threshold while an equality task
        // drives it further down.
        let chain = chain3();
        let th = ThresholdSet::two_sided(-1.0, -0.5, 0.5, 1.0, 0.05).unwrap();
        let limit = TaskSpec::set_based("jl", Objective::JointValue { joint: 1 }, 2.0, 1, th);
        let push = TaskSpec::equality(
            "push",
            Objective::JointValue { joint: 1 },
            1.0,
            2,
            Reference::Constant(TaskValue::Scalar(-2.0)),
        );
        let hierarchy = Hierarchy::new(vec![limit, push], &chain).unwrap();
        let q = [-0.45, 0.3, 0.1];
        let states = vec![SetBasedState::default(); 2];
        let reference = TrajectorySample::at_rest(Pose::identity());
        let cfg = SolverConfig::undamped();
        let out = resolve_cycle(&hierarchy, &states, &chain, &q, 0.0, &reference, &cfg).unwrap();
        assert_eq!(out.states[0].mode, Mode::ActiveLower);
        assert!(out.converged);
        // top priority: q̇_1 = 2 (−0.5 − (−0.45)) = −0.1, the push task is annihilated
        assert_relative_eq!(out.solution.qdot[0], -0.1, epsilon = 1e-12);
        assert_eq!(out.solution.active_set, vec![(String::from("jl"), Mode::ActiveLower)]);
        assert_eq!(out.tasks[0].desired, Some(TaskValue::Scalar(-0.5)));
    }

    #[test]
    fn favourable_motion_releases_the_task() {
        let chain = chain3();
        let th = ThresholdSet::two_sided(-1.0, -0.5, 0.5, 1.0, 0.05).unwrap();
        let limit = TaskSpec::set_based("jl", Objective::JointValue { joint: 1 }, 2.0, 1, th);
        let pull = TaskSpec::equality(
            "pull",
            Objective::JointValue { joint: 1 },
            1.0,
            2,
            Reference::Constant(TaskValue::Scalar(0.0)),
        );
        let hierarchy = Hierarchy::new(vec![limit, pull], &chain).unwrap();
        let q = [-0.5, 0.0, 0.0];
        let states = vec![
            SetBasedState {
                mode: Mode::ActiveLower,
                last_transition_time: 0.0,
                transition_count: 1,
            },
            SetBasedState::default(),
        ];
        let reference = TrajectorySample::at_rest(Pose::identity());
        let cfg = SolverConfig::undamped();
        let out = resolve_cycle(&hierarchy, &states, &chain, &q, 0.5, &reference, &cfg).unwrap();
        assert_eq!(out.states[0].mode, Mode::Inactive);
        assert_eq!(out.states[0].transition_count, 2);
        assert_eq!(out.states[0].last_transition_time, 0.5);
        assert!(out.solution.active_set.is_empty());
        assert_relative_eq!(out.solution.qdot[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iteration_cap_keeps_candidates_active() {
        let chain = chain3();
        let th = ThresholdSet::two_sided(-1.0, -0.5, 0.5, 1.0, 0.05).unwrap();
        let limit = TaskSpec::set_based("jl", Objective::JointValue { joint: 1 }, 2.0, 1, th);
        let pull = TaskSpec::equality("pull", Objective::JointValue { joint: 1 }, 1.0, 2, Reference::Constant(TaskValue::Scalar(0.0)));
        let hierarchy = Hierarchy::new(vec![limit, pull], &chain).unwrap();
        let states = vec![SetBasedState::default(); 2];
        let reference = TrajectorySample::at_rest(Pose::identity());
        let cfg = SolverConfig {
            max_active_set_iterations: Some(1),
            ..SolverConfig::undamped()
        };
        let out = resolve_cycle(&hierarchy, &states, &chain, &[-0.5, 0.0, 0.0], 0.0, &reference, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.states[0].mode, Mode::ActiveLower);
    }

    #[test]
    fn state_length_must_match() {
        let chain = chain3();
        let pull = TaskSpec::equality("pull", Objective::JointValue { joint: 1 }, 1.0, 2, Reference::Constant(TaskValue::Scalar(0.0)));
        let hierarchy = Hierarchy::new(vec![pull], &chain).unwrap();
        let reference = TrajectorySample::at_rest(Pose::identity());
        assert!(resolve_cycle(&hierarchy, &[], &chain, &[0.0; 3], 0.0, &reference, &SolverConfig::default()).is_err());
    }
}
