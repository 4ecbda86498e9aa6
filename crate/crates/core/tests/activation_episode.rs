mod common;

use nalgebra::{UnitQuaternion, Vector3};

use common::planar;
use setprio_core::kinematics::{KinematicChain, Pose};
use setprio_core::sim::{run_scenario, Scenario, WaypointPath};
use setprio_core::solver::{initial_states, resolve_cycle, SolverConfig, TrajectorySample};
use setprio_core::tasks::{
    update_activation, ActivationConfig, DeactivationRule, Hierarchy, Mode, Objective, Reference, SetBasedState,
    TaskSpec, TaskValue, ThresholdSet,
};

const PHYS_MIN: f64 = -2.0;
const SAFE_LOW: f64 = -0.5;
const SAFE_HIGH: f64 = 0.8;
const PHYS_MAX: f64 = 2.0;
const EPS: f64 = 0.05;

fn limit_task() -> TaskSpec {
    let th = ThresholdSet::two_sided(PHYS_MIN, SAFE_LOW, SAFE_HIGH, PHYS_MAX, EPS).unwrap();
    TaskSpec::set_based("jl", Objective::JointValue { joint: 1 }, 2.0, 1, th)
}

/// Transition table written out case by case.
fn expected_mode(mode: Mode, value: f64, directional: f64, rule: DeactivationRule, tol: f64) -> Mode {
    let a_l = SAFE_LOW + EPS;
    let a_u = SAFE_HIGH - EPS;
    match mode {
        Mode::Inactive if value <= a_l => Mode::ActiveLower,
        Mode::Inactive if value >= a_u => Mode::ActiveUpper,
        Mode::Inactive => Mode::Inactive,
        Mode::ActiveLower => {
            let on_side = match rule {
                DeactivationRule::Literal => value <= a_l,
                DeactivationRule::Relaxed => value >= SAFE_LOW,
            };
            if on_side && directional > tol {
                Mode::Inactive
            } else {
                Mode::ActiveLower
            }
        }
        Mode::ActiveUpper => {
            let on_side = match rule {
                DeactivationRule::Literal => value >= a_u,
                DeactivationRule::Relaxed => value <= SAFE_HIGH,
            };
            if on_side && directional < -tol {
                Mode::Inactive
            } else {
                Mode::ActiveUpper
            }
        }
    }
}

#[test]
fn transition_table_is_exhaustive() {
    let spec = limit_task();
    let values = [-2.5, -0.6, -0.5, -0.47, -0.45, -0.44, 0.0, 0.5, 0.74, 0.75, 0.76, 0.8, 0.9, 2.5];
    let tol = 1e-9;
    let directions = [-1.0, -2e-9, -tol, -5e-10, 0.0, 5e-10, tol, 2e-9, 1.0];
    let mut cases = 0;
    for rule in [DeactivationRule::Literal, DeactivationRule::Relaxed] {
        let cfg = ActivationConfig { rule, sign_tolerance: tol };
        for mode in [Mode::Inactive, Mode::ActiveLower, Mode::ActiveUpper] {
            let state = SetBasedState { mode, last_transition_time: 0.0, transition_count: 3 };
            for &v in &values {
                for &d in &directions {
                    let out = update_activation(&spec, &state, v, d, 1.5, &cfg).unwrap();
                    let want = expected_mode(mode, v, d, rule, tol);
                    assert_eq!(out.state.mode, want, "{rule:?} {mode:?} value {v} J q̇ {d}");
                    if want == mode {
                        assert_eq!(out.state, state);
                    } else {
                        assert_eq!(out.state.transition_count, 4);
                        assert_eq!(out.state.last_transition_time, 1.5);
                    }
                    assert_eq!(out.physical_violation, !(PHYS_MIN..=PHYS_MAX).contains(&v));
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 2 * 3 * 14 * 9);
}

#[derive(Debug, Default)]
struct Episode {
    activated_at: Option<(usize, f64)>,
    released_at: Option<(usize, f64)>,
    activations: u32,
    min_value: f64,
    value_before_release: f64,
}

/// Joint 1 is pushed below its lower safety threshold by a lower-priority
/// joint target, which later flips to a target inside the valid set.
fn pushed_joint_episode(chain: &KinematicChain, cfg: &SolverConfig) -> Episode {
    let dt = 0.005;
    let switch = 4.0;
    let mut q = vec![0.3, 0.4, -0.2];
    let mut episode = Episode { min_value: f64::INFINITY, ..Episode::default() };
    let hierarchy_for = |target: f64| {
        let push = TaskSpec::equality(
            "push",
            Objective::JointValue { joint: 1 },
            1.5,
            2,
            Reference::Constant(TaskValue::Scalar(target)),
        );
        Hierarchy::new(vec![limit_task(), push], chain).unwrap()
    };
    let mut states = initial_states(&hierarchy_for(-1.2), chain, &q).unwrap();
    let rest = TrajectorySample::at_rest(Pose::identity());
    for k in 0..1600 {
        let t = k as f64 * dt;
        let hierarchy = hierarchy_for(if t < switch { -1.2 } else { 0.3 });
        let out = resolve_cycle(&hierarchy, &states, chain, &q, t, &rest, cfg).unwrap();
        let before = states[0].mode;
        let after = out.states[0].mode;
        if !before.is_active() && after.is_active() {
            episode.activations += 1;
            episode.activated_at.get_or_insert((k, q[0]));
        }
        if before.is_active() && !after.is_active() {
            episode.released_at.get_or_insert((k, q[0]));
        }
        if t < switch {
            episode.value_before_release = q[0];
        }
        episode.min_value = episode.min_value.min(q[0]);
        for (qi, v) in q.iter_mut().zip(out.solution.qdot.iter()) {
            *qi += v * dt;
        }
        states = out.states;
    }
    episode
}

#[test]
fn pushed_joint_activates_regulates_and_releases() {
    let chain = planar(&[0.4, 0.3, 0.2]);
    let ep = pushed_joint_episode(&chain, &SolverConfig::default());
    let (k_on, v_on) = ep.activated_at.expect("task never activated");
    // the task switches on the first cycle the value reaches the activation threshold
    assert!(v_on <= SAFE_LOW + EPS && v_on > SAFE_LOW + EPS - 0.01, "activated at {v_on}");
    assert!(k_on > 0);
    // it then holds the safety threshold against the push
    assert!((ep.value_before_release - SAFE_LOW).abs() < 1e-3, "held at {}", ep.value_before_release);
    assert!(ep.min_value > SAFE_LOW - 1e-3, "dipped to {}", ep.min_value);
    // and lets go once the lower task pulls back into the valid set
    let (k_off, v_off) = ep.released_at.expect("task never released");
    assert!(k_off as f64 * 0.005 >= 4.0 && (k_off as f64) * 0.005 < 4.0 + 0.011, "released at cycle {k_off}");
    assert!((v_off - SAFE_LOW).abs() < 1e-3);
    assert_eq!(ep.activations, 1);
}

fn tracking_scenario(dt: f64) -> Scenario {
    let chain = planar(&[0.5, 0.4, 0.3]);
    let q0 = vec![0.2, 0.6, 0.5];
    let start = chain.forward_kinematics(&q0).unwrap();
    let end = Pose::new(start.position + Vector3::new(-0.15, 0.1, 0.0), UnitQuaternion::identity());
    let path = WaypointPath::new(vec![start, end], 0.1, true, false).unwrap();
    let task = TaskSpec::equality("ee", Objective::EndEffectorPosition, 3.0, 1, Reference::Trajectory);
    let hierarchy = Hierarchy::new(vec![task], &chain).unwrap();
    Scenario {
        chain,
        hierarchy,
        path,
        q0,
        dt,
        duration: 1.0,
        with_optimization: false,
        solver: SolverConfig { velocity_limit: f64::INFINITY, ..SolverConfig::default() },
    }
}

#[test]
fn euler_integration_is_first_order() {
    let final_q = |dt: f64| run_scenario(&tracking_scenario(dt)).unwrap().trace.records.last().unwrap().q.clone();
    let (a, b, c) = (final_q(0.01), final_q(0.005), final_q(0.0025));
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let ratio = gap(&a, &b) / gap(&b, &c);
    assert!((ratio - 2.0).abs() < 0.2, "successive differences shrink by {ratio}");
}
