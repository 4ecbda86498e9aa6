#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix4, Vector3};
use rand::Rng;
use setprio_core::kinematics::{JointDef, KinematicChain, Pose};

/// Same geometry as `scenarios/arm7.json`.
pub const ARM7_DH: [(f64, f64, f64, f64); 7] = [
    // (alpha, d, q_min, q_max) with a = 0
    (-FRAC_PI_2, 0.34, -2.96, 2.96),
    (FRAC_PI_2, 0.0, -2.09, 2.09),
    (FRAC_PI_2, 0.40, -2.96, 2.96),
    (-FRAC_PI_2, 0.0, -2.09, 2.09),
    (-FRAC_PI_2, 0.40, -2.96, 2.96),
    (FRAC_PI_2, 0.0, -2.09, 2.09),
    (0.0, 0.126, -3.05, 3.05),
];
pub const ARM7_TOOL: [f64; 3] = [0.0, 0.08, 0.05];

pub fn arm7() -> KinematicChain {
    let joints = ARM7_DH
        .iter()
        .map(|&(alpha, d, lo, hi)| JointDef::new(0.0, alpha, d, 0.0, lo, hi))
        .collect();
    KinematicChain::new(joints, Pose::identity(), Pose::from_position(Vector3::from(ARM7_TOOL))).unwrap()
}

pub fn planar(lengths: &[f64]) -> KinematicChain {
    KinematicChain::from_joints(lengths.iter().map(|&l| JointDef::planar(l)).collect()).unwrap()
}

/// Textbook DH link matrix written out element by element.
pub fn dh_matrix(a: f64, alpha: f64, d: f64, theta: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Matrix4::new(
        ct, -st * ca, st * sa, a * ct, //
        st, ct * ca, -ct * sa, a * st, //
        0.0, sa, ca, d, //
        0.0, 0.0, 0.0, 1.0,
    )
}

pub fn random_q(chain: &KinematicChain, rng: &mut impl Rng) -> Vec<f64> {
    chain.joints().iter().map(|j| rng.random_range(j.q_min..j.q_max)).collect()
}
