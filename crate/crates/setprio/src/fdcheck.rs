//! Forward-difference manipulability gradient against a central-difference oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use setprio_core::kinematics::{KinematicChain, RowSelector, DEFAULT_MANIPULABILITY_STEP};

pub const ORACLE_STEP: f64 = 1e-7;
pub const PASS_THRESHOLD: f64 = 1e-3;
/// Denominator floor so near-stationary configurations do not dominate.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FdCheckOptions {
    pub samples: usize,
    pub delta_q: f64,
    pub rows: RowSelector,
    pub seed: u64,
}

impl FdCheckOptions {
    pub fn for_chain(chain: &KinematicChain) -> Self {
        Self {
            samples: 100,
            delta_q: DEFAULT_MANIPULABILITY_STEP,
            rows: default_rows(chain),
            seed: 0,
        }
    }
}

/// Full Jacobian for 6+ joints, position rows for 3..5, planar rows below.
pub fn default_rows(chain: &KinematicChain) -> RowSelector {
    match chain.dof() {
        n if n >= 6 => RowSelector::Full,
        n if n >= 3 => RowSelector::Position,
        2 => RowSelector::Rows(vec![0, 1]),
        _ => RowSelector::Rows(vec![0]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdCheckReport {
    pub samples: usize,
    pub max_relative_error: f64,
    pub worst_configuration: Vec<f64>,
}

impl FdCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < PASS_THRESHOLD
    }
}

pub fn central_difference(chain: &KinematicChain, q: &[f64], rows: &RowSelector, h: f64) -> setprio_core::Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(q.len());
    let mut probe = q.to_vec();
    for i in 0..q.len() {
        probe[i] = q[i] + h;
        let plus = chain.manipulability(&probe, rows)?;
        probe[i] = q[i] - h;
        let minus = chain.manipulability(&probe, rows)?;
        probe[i] = q[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

pub fn relative_error(numeric: &[f64], oracle: &[f64]) -> f64 {
    let diff = numeric.iter().zip(oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = oracle.iter().map(|b| b.abs()).fold(0.0, f64::max);
    diff / scale.max(RELATIVE_FLOOR)
}

/// Samples configurations uniformly inside the joint bounds.
pub fn random_configuration(chain: &KinematicChain, rng: &mut impl Rng) -> Vec<f64> {
    chain
        .joints()
        .iter()
        .map(|j| if j.q_max > j.q_min { rng.random_range(j.q_min..j.q_max) } else { j.q_min })
        .collect()
}

pub fn run_fd_check(chain: &KinematicChain, opts: &FdCheckOptions) -> setprio_core::Result<FdCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = (0.0, Vec::new());
    for _ in 0..opts.samples {
        let q = random_configuration(chain, &mut rng);
        let numeric = chain.manipulability_jacobian_numeric(&q, &opts.rows, opts.delta_q)?;
        let oracle = central_difference(chain, &q, &opts.rows, ORACLE_STEP)?;
        let err = relative_error(numeric.as_slice(), &oracle);
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, q);
        }
    }
    Ok(FdCheckReport {
        samples: opts.samples,
        max_relative_error: worst.0,
        worst_configuration: worst.1,
    })
}
