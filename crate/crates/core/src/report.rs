//! Run traces shared by the virtual-queue solver, the dual subgradient
//! baseline and the decentralized flow simulation, plus their CSV forms.

use std::io::{Read, Write};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::program::ConvexProgram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Virtual-queue proximal algorithm.
    VirtualQueue,
    /// Dual subgradient with primal averaging.
    DualSubgradient,
    /// Virtual-queue algorithm run as per-link / per-source agents.
    Decentralized,
}

impl Algorithm {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::VirtualQueue => "vq",
            Algorithm::DualSubgradient => "dsg",
            Algorithm::Decentralized => "vq-decentralized",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    Inequality,
    Equality,
}

impl ConstraintMode {
    pub fn all_inequality(m: usize) -> Vec<ConstraintMode> {
        vec![ConstraintMode::Inequality; m]
    }
}

/// Lyapunov drift of one step: `L = ½‖Q(t)‖²`, `delta = L(t+1) − L(t)`,
/// and the upper bound `Q(t)ᵀg(x(t)) + ‖g(x(t))‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRecord {
    pub t: usize,
    pub lyapunov: f64,
    pub delta: f64,
    pub bound: f64,
}

impl DriftRecord {
    pub fn virtual_queue(t: usize, q_before: &[f64], q_after: &[f64], g: &[f64]) -> Self {
        let before = 0.5 * linalg::dot(q_before, q_before);
        let after = 0.5 * linalg::dot(q_after, q_after);
        DriftRecord {
            t,
            lyapunov: before,
            delta: after - before,
            bound: linalg::dot(q_before, g) + linalg::dot(g, g),
        }
    }
}

/// Snapshot taken after `t` iterations (`t ≥ 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// Latest iterate `x(t−1)`.
    pub x: Vec<f64>,
    /// Queues `Q(t)` (multipliers `λ(t)` for the baseline).
    pub q: Vec<f64>,
    pub f_x: f64,
    /// `g(x(t−1))`
    pub g_x: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub f_xbar: f64,
    pub g_xbar: Vec<f64>,
    /// `Σ_{τ<t} g(x(τ))`
    pub g_sum: Vec<f64>,
    /// Drift of the step that produced this row, i.e. from `t−1` to `t`.
    pub drift: DriftRecord,
}

impl TraceRow {
    pub fn queue_norm(&self) -> f64 {
        linalg::norm(&self.q)
    }

    pub fn max_constraint(&self) -> f64 {
        self.g_xbar
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub problem: String,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub iterations: usize,
    pub record_every: usize,
    pub modes: Vec<ConstraintMode>,
    pub oracle: String,
    /// `x(−1)`
    pub x_init: Vec<f64>,
    /// `g(x(−1))`
    pub g_init: Vec<f64>,
    /// `Q(0)`
    pub q_init: Vec<f64>,
    pub rows: Vec<TraceRow>,
    pub wall_time: Duration,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn row_at(&self, t: usize) -> Option<&TraceRow> {
        self.rows
            .binary_search_by_key(&t, |r| r.t)
            .ok()
            .map(|i| &self.rows[i])
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.last().map(|r| r.f_xbar)
    }

    /// One CSV row per recorded iteration; bound residual columns are
    /// filled when `bounds` is given.
    pub fn csv_rows(&self, bounds: Option<&crate::solver::BoundReport>) -> Vec<TraceCsvRow> {
        self.rows
            .iter()
            .map(|r| {
                let b = bounds.and_then(|b| b.row_at(r.t));
                TraceCsvRow {
                    t: r.t,
                    f_xbar: r.f_xbar,
                    max_violation: r.max_constraint(),
                    queue_norm: r.queue_norm(),
                    drift: r.drift.delta,
                    drift_bound: r.drift.bound,
                    obj_bound_residual: b.map(|b| b.objective.residual),
                    cons_bound_residual: b.and_then(|b| b.constraint.map(|c| c.residual)),
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(
        &self,
        out: W,
        bounds: Option<&crate::solver::BoundReport>,
    ) -> Result<()> {
        write_trace_csv(out, &self.csv_rows(bounds))
    }

    /// Sidecar with full vectors: `t, x_0.., q_0..`.
    pub fn write_full_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.x_init.len();
        let m = self.q_init.len();
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x_{i}")));
        header.extend((0..m).map(|k| format!("q_{k}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.t.to_string()];
            rec.extend(r.x.iter().map(f64::to_string));
            rec.extend(r.q.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The scalar columns of `trace.csv`. `max_violation` is
/// `max_k g_k(x̄(t))`, negative when the average is strictly feasible.
/// Residual columns are `value − bound` and stay empty without a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub t: usize,
    pub f_xbar: f64,
    pub max_violation: f64,
    pub queue_norm: f64,
    pub drift: f64,
    pub drift_bound: f64,
    pub obj_bound_residual: Option<f64>,
    pub cons_bound_residual: Option<f64>,
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[TraceCsvRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceCsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Stride used when the caller does not pick one: every iteration up to
/// 10³, else `⌈T/10³⌉`.
pub fn default_stride(iterations: usize) -> usize {
    if iterations <= 1000 {
        1
    } else {
        iterations.div_ceil(1000)
    }
}

/// Collects trace rows at the configured stride, always including `t = 1`
/// and `t = T`.
pub(crate) struct Recorder<'p> {
    program: &'p ConvexProgram,
    stride: usize,
    total: usize,
    rows: Vec<TraceRow>,
}

pub(crate) struct Snapshot<'a> {
    pub t: usize,
    pub x: &'a [f64],
    pub q: &'a [f64],
    pub g_x: &'a [f64],
    pub x_bar: &'a [f64],
    pub g_sum: &'a [f64],
    pub drift: DriftRecord,
}

impl<'p> Recorder<'p> {
    pub fn new(program: &'p ConvexProgram, total: usize, stride: usize) -> Self {
        let stride = stride.max(1);
        Recorder {
            program,
            stride,
            total,
            rows: Vec::with_capacity(total / stride + 2),
        }
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn wants(&self, t: usize) -> bool {
        t == 1 || t == self.total || t % self.stride == 0
    }

    pub fn record(&mut self, s: Snapshot<'_>) {
        let g_xbar = self.program.constraint_values(s.x_bar);
        self.rows.push(TraceRow {
            t: s.t,
            x: s.x.to_vec(),
            q: s.q.to_vec(),
            f_x: self.program.objective_value(s.x),
            g_x: s.g_x.to_vec(),
            x_bar: s.x_bar.to_vec(),
            f_xbar: self.program.objective_value(s.x_bar),
            g_xbar,
            g_sum: s.g_sum.to_vec(),
            drift: s.drift,
        });
    }

    pub fn into_rows(self) -> Vec<TraceRow> {
        self.rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stride_defaults() {
        assert_eq!(default_stride(1), 1);
        assert_eq!(default_stride(1000), 1);
        assert_eq!(default_stride(1001), 2);
        assert_eq!(default_stride(100_000), 100);
    }

    #[test]
    fn drift_record_arithmetic() {
        let d = DriftRecord::virtual_queue(3, &[1.0, 2.0], &[2.0, 2.0], &[1.0, 0.5]);
        assert_eq!(d.t, 3);
        assert_eq!(d.lyapunov, 2.5);
        assert_eq!(d.delta, 1.5);
        assert_eq!(d.bound, 1.0 + 1.0 + 1.25);
    }

    fn opt_f64() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), (-1e6f64..1e6).prop_map(Some)]
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(
            (1usize..1_000_000, -1e6f64..1e6, -1e3f64..1e3, 0.0f64..1e3, -1e3f64..1e3, -1e3f64..1e3, opt_f64(), opt_f64()),
            0..20,
        )) {
            let rows: Vec<TraceCsvRow> = rows.into_iter().map(|(t, f, v, q, d, b, o, c)| TraceCsvRow {
                t, f_xbar: f, max_violation: v, queue_norm: q, drift: d, drift_bound: b,
                obj_bound_residual: o, cons_bound_residual: c,
            }).collect();
            let mut buf = Vec::new();
            write_trace_csv(&mut buf, &rows).unwrap();
            let back = read_trace_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, rows);
        }
    }

    #[test]
    fn csv_header_matches_schema() {
        let mut buf = Vec::new();
        write_trace_csv(
            &mut buf,
            &[TraceCsvRow {
                t: 1,
                f_xbar: 0.5,
                max_violation: -1.0,
                queue_norm: 2.0,
                drift: 0.1,
                drift_bound: 0.2,
                obj_bound_residual: None,
                cons_bound_residual: Some(-3.0),
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,f_xbar,max_violation,queue_norm,drift,drift_bound,obj_bound_residual,cons_bound_residual"
        );
        assert_eq!(lines.next().unwrap(), "1,0.5,-1.0,2.0,0.1,0.2,,-3.0");
    }
}
