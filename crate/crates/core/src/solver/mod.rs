//! The virtual-queue proximal iteration.
//!
//! Each step solves
//!
//! ```text
//! x(t) = argmin_{x ∈ box} f(x) + [Q(t) + g(x(t−1))]ᵀ g(x) + α‖x − x(t−1)‖²
//! ```
//!
//! then updates the queues with `Q_k(t+1) = max{−g_k(x(t)), Q_k(t) + g_k(x(t))}`
//! and folds `x(t)` into the running average `x̄`.

mod bounds;

pub use bounds::{
    verify_bounds, BoundCheck, BoundKind, BoundReference, BoundReport, BoundRow, BoundViolation,
};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg;
use crate::oracles::{PrimalOracle, Subproblem};
use crate::program::ConvexProgram;
use crate::report::{
    default_stride, Algorithm, ConstraintMode, DriftRecord, Recorder, RunReport, Snapshot,
};

/// Absolute slack for the runtime invariant assertions.
pub const INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: usize,
    /// `x(t−1)`
    pub x_prev: Vec<f64>,
    /// `g(x(t−1))`, cached so the subproblem weights and the queue update
    /// see the same values.
    pub g_prev: Vec<f64>,
    /// `Q(t)`
    pub q: Vec<f64>,
    /// `x̄(t)`; meaningless while `t == 0`.
    pub x_bar: Vec<f64>,
    /// `Σ_{τ<t} g(x(τ))`
    pub g_sum: Vec<f64>,
    pub alpha: f64,
    pub modes: Vec<ConstraintMode>,
}

/// What one call to [`SolverState::step`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub drift: DriftRecord,
}

/// `max{−g, Q + g}` for inequalities, `Q + g` for equalities.
pub fn queue_update_scalar(q: f64, g: f64, mode: ConstraintMode) -> f64 {
    match mode {
        ConstraintMode::Inequality => (-g).max(q + g),
        ConstraintMode::Equality => q + g,
    }
}

pub fn queue_update(q: &[f64], g_now: &[f64], modes: &[ConstraintMode]) -> Vec<f64> {
    q.iter()
        .zip(g_now)
        .zip(modes)
        .map(|((&q, &g), &mode)| queue_update_scalar(q, g, mode))
        .collect()
}

fn validate_modes(program: &ConvexProgram, modes: &[ConstraintMode]) -> Result<()> {
    if modes.len() != program.m() {
        return Err(Error::dim("constraint modes", program.m(), modes.len()));
    }
    // An equality weight may go negative, which only keeps the subproblem
    // convex when the constraint is affine.
    if let crate::program::Constraints::Separable(rows) = program.constraints() {
        for (k, mode) in modes.iter().enumerate() {
            if *mode == ConstraintMode::Equality
                && rows[k].terms.iter().any(|(_, h)| !h.is_affine())
            {
                return Err(Error::Config(format!(
                    "constraint {k} is nonlinear and cannot run in equality mode"
                )));
            }
        }
    }
    if matches!(
        program.constraints(),
        crate::program::Constraints::General(_)
    ) && modes.contains(&ConstraintMode::Equality)
    {
        return Err(Error::Config(
            "equality mode needs linear or separable affine constraints".into(),
        ));
    }
    Ok(())
}

/// Warnings about `α` relative to the Lipschitz modulus of `g`.
fn alpha_warnings(program: &ConvexProgram, alpha: f64) -> Vec<String> {
    let mut warnings = Vec::new();
    match program.beta() {
        Ok(beta) if alpha < 0.5 * beta * beta => warnings.push(format!(
            "alpha = {alpha} is below beta^2/2 = {} (beta = {beta}); convergence guarantees do not apply",
            0.5 * beta * beta
        )),
        Ok(_) => {}
        Err(_) if program.m() > 0 => warnings.push(format!(
            "Lipschitz modulus of g unknown; cannot check alpha = {alpha} against beta^2/2"
        )),
        Err(_) => {}
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    warnings
}

impl SolverState {
    /// Starts from `x(−1) = x_init` with `Q_k(0) = max{0, −g_k(x_init)}`
    /// (or 0 for equality-mode constraints).
    pub fn init(
        program: &ConvexProgram,
        x_init: &[f64],
        alpha: f64,
        modes: Vec<ConstraintMode>,
    ) -> Result<Self> {
        if x_init.len() != program.n() {
            return Err(Error::dim("x_init", program.n(), x_init.len()));
        }
        if !program.bounds().contains(x_init) {
            return Err(Error::InvalidArgument("x_init lies outside the box".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        validate_modes(program, &modes)?;
        let g_prev = program.constraint_values(x_init);
        let q = g_prev
            .iter()
            .zip(&modes)
            .map(|(&g, mode)| match mode {
                ConstraintMode::Inequality => (-g).max(0.0),
                ConstraintMode::Equality => 0.0,
            })
            .collect();
        Ok(SolverState {
            t: 0,
            x_prev: x_init.to_vec(),
            g_sum: vec![0.0; g_prev.len()],
            g_prev,
            q,
            x_bar: vec![0.0; program.n()],
            alpha,
            modes,
        })
    }

    /// Subproblem weights `W = Q(t) + g(x(t−1))`.
    pub fn weights(&self) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.g_prev)
            .map(|(q, g)| q + g)
            .collect()
    }

    pub fn step(&mut self, program: &ConvexProgram, oracle: &PrimalOracle) -> Result<StepOutcome> {
        let weights = self.weights();
        for (k, (w, mode)) in weights.iter().zip(&self.modes).enumerate() {
            if *mode == ConstraintMode::Inequality && *w < -INVARIANT_TOL {
                return Err(Error::Invariant {
                    t: self.t,
                    detail: format!("negative weight W_{k} = {w}"),
                });
            }
        }
        let sub = Subproblem::new(program, &weights, &self.x_prev, self.alpha)?;
        let x = oracle.solve(&sub).map_err(|e| Error::Oracle {
            iteration: self.t,
            source: Box::new(e),
        })?;
        let g = program.constraint_values(&x);
        let q_next = queue_update(&self.q, &g, &self.modes);
        let drift = DriftRecord::virtual_queue(self.t, &self.q, &q_next, &g);

        let t = self.t as f64;
        for (avg, xi) in self.x_bar.iter_mut().zip(&x) {
            *avg = *avg * (t / (t + 1.0)) + xi / (t + 1.0);
        }
        for (s, gi) in self.g_sum.iter_mut().zip(&g) {
            *s += gi;
        }
        self.q = q_next;
        self.x_prev.clone_from(&x);
        self.g_prev.clone_from(&g);
        self.t += 1;
        Ok(StepOutcome { x, g, drift })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub alpha: f64,
    pub iterations: usize,
    /// Defaults to all inequality.
    pub modes: Option<Vec<ConstraintMode>>,
    /// Defaults to [`default_stride`].
    pub record_every: Option<usize>,
    pub oracle: PrimalOracle,
}

impl RunConfig {
    pub fn new(alpha: f64, iterations: usize) -> Self {
        RunConfig {
            alpha,
            iterations,
            modes: None,
            record_every: None,
            oracle: PrimalOracle::default(),
        }
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = Some(stride);
        self
    }

    pub fn modes(mut self, modes: Vec<ConstraintMode>) -> Self {
        self.modes = Some(modes);
        self
    }

    pub fn oracle(mut self, oracle: PrimalOracle) -> Self {
        self.oracle = oracle;
        self
    }
}

/// A run that stopped early. `partial` holds the rows recorded so far.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    #[source]
    pub error: Error,
    pub partial: Option<Box<RunReport>>,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure {
            error,
            partial: None,
        }
    }
}

/// Runs `T` iterations from `x(−1) = x_init`.
pub fn run(
    program: &ConvexProgram,
    x_init: &[f64],
    config: &RunConfig,
) -> Result<RunReport, RunFailure> {
    if config.iterations == 0 {
        return Err(Error::InvalidArgument("iteration count must be at least 1".into()).into());
    }
    let started = Instant::now();
    let modes = config
        .modes
        .clone()
        .unwrap_or_else(|| ConstraintMode::all_inequality(program.m()));
    let mut state = SolverState::init(program, x_init, config.alpha, modes.clone())?;
    let warnings = alpha_warnings(program, config.alpha);
    let stride = config
        .record_every
        .unwrap_or_else(|| default_stride(config.iterations));
    let mut recorder = Recorder::new(program, config.iterations, stride);

    let mut report = RunReport {
        algorithm: Algorithm::VirtualQueue,
        problem: program.name().to_string(),
        alpha: Some(config.alpha),
        gamma: None,
        iterations: config.iterations,
        record_every: recorder.stride(),
        modes,
        oracle: config.oracle.id(),
        x_init: x_init.to_vec(),
        g_init: state.g_prev.clone(),
        q_init: state.q.clone(),
        rows: Vec::new(),
        wall_time: Default::default(),
        warnings,
    };

    for _ in 0..config.iterations {
        let out = match state.step(program, &config.oracle) {
            Ok(out) => out,
            Err(error) => {
                report.rows = recorder.into_rows();
                report.wall_time = started.elapsed();
                return Err(RunFailure {
                    error,
                    partial: Some(Box::new(report)),
                });
            }
        };
        if recorder.wants(state.t) {
            recorder.record(Snapshot {
                t: state.t,
                x: &out.x,
                q: &state.q,
                g_x: &out.g,
                x_bar: &state.x_bar,
                g_sum: &state.g_sum,
                drift: out.drift,
            });
        }
    }
    report.rows = recorder.into_rows();
    report.wall_time = started.elapsed();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    QueueNonnegative,
    WeightNonnegative,
    QueueNormInitial,
    QueueNormLower,
    DriftBound,
    QueueLowerBound,
    IterateInBox,
    AverageInBox,
    AveragingIdentity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantViolation {
    pub t: usize,
    pub invariant: Invariant,
    pub detail: String,
}

/// Checks the queue, drift and averaging invariants on every recorded row.
/// Only inequality-mode constraints take part in the queue checks. The
/// averaging identity is checked when the trace was recorded at stride 1.
pub fn check_invariants(program: &ConvexProgram, report: &RunReport) -> Vec<InvariantViolation> {
    let tol = INVARIANT_TOL;
    let mut out = Vec::new();
    let mut flag = |t: usize, invariant: Invariant, detail: String| {
        out.push(InvariantViolation {
            t,
            invariant,
            detail,
        })
    };
    let ineq: Vec<usize> = report
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| **m == ConstraintMode::Inequality)
        .map(|(k, _)| k)
        .collect();
    let sub_norm = |v: &[f64]| ineq.iter().map(|&k| v[k] * v[k]).sum::<f64>().sqrt();

    if sub_norm(&report.q_init) > sub_norm(&report.g_init) + tol {
        flag(
            0,
            Invariant::QueueNormInitial,
            format!(
                "‖Q(0)‖ = {} > ‖g(x(-1))‖ = {}",
                sub_norm(&report.q_init),
                sub_norm(&report.g_init)
            ),
        );
    }
    let bounds = program.bounds();
    let mut running = vec![0.0; program.n()];
    let mut contiguous = true;

    for (idx, row) in report.rows.iter().enumerate() {
        let t = row.t;
        for &k in &ineq {
            if row.q[k] < 0.0 {
                flag(
                    t,
                    Invariant::QueueNonnegative,
                    format!("Q_{k} = {}", row.q[k]),
                );
            }
            if row.q[k] + row.g_x[k] < -tol {
                flag(
                    t,
                    Invariant::WeightNonnegative,
                    format!("Q_{k} + g_{k} = {}", row.q[k] + row.g_x[k]),
                );
            }
            let slack = t as f64 * 1e-12;
            if row.q[k] < row.g_sum[k] - slack {
                flag(
                    t,
                    Invariant::QueueLowerBound,
                    format!("Q_{k} = {} < Σg = {}", row.q[k], row.g_sum[k]),
                );
            }
        }
        if sub_norm(&row.q) < sub_norm(&row.g_x) - tol {
            flag(
                t,
                Invariant::QueueNormLower,
                format!(
                    "‖Q‖ = {} < ‖g(x(t-1))‖ = {}",
                    sub_norm(&row.q),
                    sub_norm(&row.g_x)
                ),
            );
        }
        if report.algorithm != Algorithm::DualSubgradient && row.drift.delta > row.drift.bound + tol
        {
            flag(
                t,
                Invariant::DriftBound,
                format!("Δ = {} > {}", row.drift.delta, row.drift.bound),
            );
        }
        if !bounds.contains(&row.x) {
            flag(t, Invariant::IterateInBox, "x(t-1) outside box".into());
        }
        let outside = row
            .x_bar
            .iter()
            .zip(bounds.lo.iter().zip(&bounds.hi))
            .any(|(v, (l, h))| *v < l - 1e-12 || *v > h + 1e-12);
        if outside {
            flag(t, Invariant::AverageInBox, "x̄ outside box".into());
        }

        contiguous &= t == idx + 1;
        if contiguous {
            for (s, xi) in running.iter_mut().zip(&row.x) {
                *s += xi;
            }
            let recomputed: Vec<f64> = running.iter().map(|s| s / t as f64).collect();
            let scale = linalg::norm(&recomputed).max(1.0);
            let diff = linalg::max_abs_diff(&recomputed, &row.x_bar);
            if diff > 1e-10 * scale {
                flag(
                    t,
                    Invariant::AveragingIdentity,
                    format!("incremental average off by {diff:e}"),
                );
            }
        }
    }
    out
}
