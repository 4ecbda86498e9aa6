//! Trace CSV, metrics JSON and the A/B comparison report.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use setprio_core::sim::{ScenarioMetrics, ScenarioRun, Trace};
use setprio_core::tasks::TaskValue;

use crate::error::AppError;

/// Trace column names. Scalar tasks get a `<id>_value,<id>_mode,<id>_desired`
/// triple; vector tasks are covered by the end-effector columns.
pub fn trace_header(trace: &Trace, dof: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=dof).map(|i| format!("q_{i}")));
    for c in ["ee_x", "ee_y", "ee_z", "ee_qw", "ee_qx", "ee_qy", "ee_qz", "des_x", "des_y", "des_z", "err_norm"] {
        header.push(c.to_string());
    }
    for i in scalar_columns(trace) {
        let id = &trace.task_ids[i];
        header.push(format!("{id}_value"));
        header.push(format!("{id}_mode"));
        header.push(format!("{id}_desired"));
    }
    header
}

fn scalar_columns(trace: &Trace) -> Vec<usize> {
    let Some(first) = trace.records.first() else {
        return Vec::new();
    };
    first
        .tasks
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s.value, TaskValue::Scalar(_)))
        .map(|(i, _)| i)
        .collect()
}

pub fn write_trace<W: Write>(trace: &Trace, dof: usize, out: W) -> Result<(), AppError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(trace_header(trace, dof))?;
    let scalars = scalar_columns(trace);
    let mut row: Vec<String> = Vec::new();
    for r in &trace.records {
        row.clear();
        row.push(r.t.to_string());
        row.extend(r.q.iter().map(f64::to_string));
        let p = r.ee_pose.position;
        let o = r.ee_pose.orientation.quaternion();
        let d = r.desired_pose.position;
        for v in [p.x, p.y, p.z, o.w, o.i, o.j, o.k, d.x, d.y, d.z, r.position_error()] {
            row.push(v.to_string());
        }
        for &i in &scalars {
            let s = &r.tasks[i];
            row.push(s.value.as_scalar().unwrap_or(f64::NAN).to_string());
            row.push(s.mode.code().to_string());
            row.push(s.desired.and_then(|d| d.as_scalar()).unwrap_or(f64::NAN).to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| AppError::Csv(e.into()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub with_optimization: bool,
    pub cycles: usize,
    pub saturated_cycles: usize,
    pub tracking_rmse: f64,
    pub max_tracking_error: f64,
    pub activation_count: BTreeMap<String, u32>,
    pub active_time_fraction: BTreeMap<String, f64>,
    pub min_manipulability: Option<f64>,
    pub physical_violation_count: usize,
    pub joints_reaching_limits: usize,
}

impl MetricsReport {
    pub fn new(scenario: &str, with_optimization: bool, run: &ScenarioRun) -> Self {
        let m: &ScenarioMetrics = &run.metrics;
        Self {
            scenario: scenario.to_string(),
            with_optimization,
            cycles: run.trace.records.len(),
            saturated_cycles: run.trace.records.iter().filter(|r| r.saturated).count(),
            tracking_rmse: m.tracking_rmse,
            max_tracking_error: m.max_tracking_error,
            activation_count: m.activation_count.clone(),
            active_time_fraction: m.active_time_fraction.clone(),
            min_manipulability: m.min_manipulability,
            physical_violation_count: m.physical_violation_count,
            joints_reaching_limits: m.joints_reaching_limits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta<T> {
    pub without: T,
    pub with: T,
    pub delta: T,
}

impl Delta<f64> {
    fn of(without: f64, with: f64) -> Self {
        Self { without, with, delta: with - without }
    }
}

impl Delta<i64> {
    fn of(without: i64, with: i64) -> Self {
        Self { without, with, delta: with - without }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub rmse: Delta<f64>,
    pub activations: BTreeMap<String, Delta<i64>>,
    pub active_time: BTreeMap<String, Delta<f64>>,
    pub joints_reaching_limits: Delta<i64>,
    pub min_manipulability: Option<Delta<f64>>,
}

impl Comparison {
    /// Per-task entries cover the set-based tasks of the run without
    /// optimization; counterparts only exist in the other leg.
    pub fn new(without: &ScenarioMetrics, with: &ScenarioMetrics) -> Self {
        let activations = without
            .activation_count
            .iter()
            .map(|(id, &a)| {
                let b = with.activation_count.get(id).copied().unwrap_or(0);
                (id.clone(), Delta::<i64>::of(a.into(), b.into()))
            })
            .collect();
        let active_time = without
            .active_time_fraction
            .iter()
            .map(|(id, &a)| {
                let b = with.active_time_fraction.get(id).copied().unwrap_or(0.0);
                (id.clone(), Delta::<f64>::of(a, b))
            })
            .collect();
        Self {
            rmse: Delta::<f64>::of(without.tracking_rmse, with.tracking_rmse),
            activations,
            active_time,
            joints_reaching_limits: Delta::<i64>::of(
                without.joints_reaching_limits as i64,
                with.joints_reaching_limits as i64,
            ),
            min_manipulability: match (without.min_manipulability, with.min_manipulability) {
                (Some(a), Some(b)) => Some(Delta::<f64>::of(a, b)),
                _ => None,
            },
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Writes `trace.csv` and `metrics.json` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, report: &MetricsReport, run: &ScenarioRun, dof: usize) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let trace_path = dir.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(|e| AppError::io(&trace_path, e))?;
    write_trace(&run.trace, dof, std::io::BufWriter::new(file))?;
    write_json(report, &dir.join("metrics.json"))
}
