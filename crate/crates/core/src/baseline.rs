//! Dual subgradient method with primal averaging:
//!
//! ```text
//! x(t)   = argmin_{x ∈ box} f(x) + λ(t)ᵀ g(x)
//! λ(t+1) = max{λ(t) + γ g(x(t)), 0}
//! ```
//!
//! started from `λ(0) = 0`. Traces use the same [`RunReport`] schema as the
//! virtual-queue solver, with `q` holding `λ`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg;
use crate::oracles::{PrimalOracle, Subproblem};
use crate::program::ConvexProgram;
use crate::report::{
    default_stride, Algorithm, ConstraintMode, DriftRecord, Recorder, RunReport, Snapshot,
};
use crate::solver::RunFailure;

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub t: usize,
    pub lambda: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub g_sum: Vec<f64>,
    /// Step size `γ`.
    pub step: f64,
    /// Reference point handed to iterative oracles; the last iterate.
    pub x_ref: Vec<f64>,
}

impl DualState {
    pub fn new(program: &ConvexProgram, x_ref: &[f64], step: f64) -> Result<Self> {
        if !(step >= 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be nonnegative, got {step}"
            )));
        }
        if x_ref.len() != program.n() {
            return Err(Error::dim("x_init", program.n(), x_ref.len()));
        }
        Ok(DualState {
            t: 0,
            lambda: vec![0.0; program.m()],
            x_bar: vec![0.0; program.n()],
            g_sum: vec![0.0; program.m()],
            step,
            x_ref: x_ref.to_vec(),
        })
    }
}

/// `max{λ + γ g, 0}` componentwise.
pub fn dual_update(lambda: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(g)
        .map(|(l, gk)| (l + step * gk).max(0.0))
        .collect()
}

pub struct DualStepOutcome {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub drift: DriftRecord,
}

/// One dual step. The drift bound recorded is
/// `γλᵀg + ½γ²‖g‖²`, which holds by nonexpansiveness of the projection.
pub fn dual_step(
    state: &mut DualState,
    program: &ConvexProgram,
    oracle: &PrimalOracle,
) -> Result<DualStepOutcome> {
    let sub = Subproblem::lagrangian(program, &state.lambda, &state.x_ref)?;
    let x = oracle.solve(&sub).map_err(|e| Error::Oracle {
        iteration: state.t,
        source: Box::new(e),
    })?;
    let g = program.constraint_values(&x);
    let next = dual_update(&state.lambda, &g, state.step);

    let before = 0.5 * linalg::dot(&state.lambda, &state.lambda);
    let after = 0.5 * linalg::dot(&next, &next);
    let gg = linalg::dot(&g, &g);
    let drift = DriftRecord {
        t: state.t,
        lyapunov: before,
        delta: after - before,
        bound: state.step * linalg::dot(&state.lambda, &g) + 0.5 * state.step * state.step * gg,
    };

    let t = state.t as f64;
    for (avg, xi) in state.x_bar.iter_mut().zip(&x) {
        *avg = *avg * (t / (t + 1.0)) + xi / (t + 1.0);
    }
    for (s, gi) in state.g_sum.iter_mut().zip(&g) {
        *s += gi;
    }
    state.lambda = next;
    state.x_ref.clone_from(&x);
    state.t += 1;
    Ok(DualStepOutcome { x, g, drift })
}

/// Runs `iterations` dual steps. `x_init` only seeds iterative oracles.
pub fn dsg_run(
    program: &ConvexProgram,
    x_init: &[f64],
    gamma: f64,
    iterations: usize,
    record_every: Option<usize>,
    oracle: &PrimalOracle,
) -> Result<RunReport, RunFailure> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")).into());
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iteration count must be at least 1".into()).into());
    }
    let started = Instant::now();
    let mut state = DualState::new(program, x_init, gamma)?;
    let stride = record_every.unwrap_or_else(|| default_stride(iterations));
    let mut recorder = Recorder::new(program, iterations, stride);
    let mut report = RunReport {
        algorithm: Algorithm::DualSubgradient,
        problem: program.name().to_string(),
        alpha: None,
        gamma: Some(gamma),
        iterations,
        record_every: recorder.stride(),
        modes: ConstraintMode::all_inequality(program.m()),
        oracle: oracle.id(),
        x_init: x_init.to_vec(),
        g_init: program.constraint_values(x_init),
        q_init: state.lambda.clone(),
        rows: Vec::new(),
        wall_time: Default::default(),
        warnings: Vec::new(),
    };
    for _ in 0..iterations {
        let out = match dual_step(&mut state, program, oracle) {
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
                q: &state.lambda,
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{BoxSet, Constraints, Objective, SeparableRow, Univariate};

    /// f(x) = x, g(x) = x − 1 on [0, 2].
    fn one_d() -> ConvexProgram {
        ConvexProgram::new(
            Objective::Separable(vec![Univariate::linear(1.0)]),
            Constraints::Separable(vec![SeparableRow {
                terms: vec![(0, Univariate::linear(1.0))],
                offset: -1.0,
            }]),
            BoxSet::uniform(1, 0.0, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn one_d_step() {
        let p = one_d();
        let mut s = DualState::new(&p, &[1.0], 0.01).unwrap();
        let out = dual_step(&mut s, &p, &PrimalOracle::default()).unwrap();
        assert_eq!(out.x, vec![0.0]);
        assert_eq!(s.lambda, vec![0.0]);
        assert_eq!(s.x_bar, vec![0.0]);
    }

    #[test]
    fn projection_clips_at_zero() {
        assert_eq!(dual_update(&[5.0], &[-600.0], 0.01), vec![0.0]);
        assert_eq!(dual_update(&[5.0], &[100.0], 0.01), vec![6.0]);
    }

    #[test]
    fn single_iteration_average_is_first_iterate() {
        let p = one_d();
        let r = dsg_run(&p, &[1.0], 0.01, 1, None, &PrimalOracle::default()).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].x_bar, r.rows[0].x);
        assert_eq!(r.algorithm, Algorithm::DualSubgradient);
        assert_eq!(r.alpha, None);
    }

    #[test]
    fn multipliers_stay_nonnegative_and_drift_bound_holds() {
        // min x s.t. 1 − x ≤ 0: x* = 1, λ* = 1
        let p = ConvexProgram::new(
            Objective::Separable(vec![Univariate::linear(1.0)]),
            Constraints::Separable(vec![SeparableRow {
                terms: vec![(0, Univariate::linear(-1.0))],
                offset: 1.0,
            }]),
            BoxSet::uniform(1, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        let r = dsg_run(&p, &[1.0], 0.05, 2000, Some(1), &PrimalOracle::default()).unwrap();
        for row in &r.rows {
            assert!(row.q[0] >= 0.0);
            assert!(row.drift.delta <= row.drift.bound + 1e-12);
        }
        // λ hovers around 1 and x̄ approaches 1
        assert!((r.last().unwrap().x_bar[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn unconstrained_program_repeats_the_box_minimizer() {
        let p = ConvexProgram::new(
            Objective::Separable(vec![Univariate::quadratic(1.0, -1.0)]),
            Constraints::none(),
            BoxSet::uniform(1, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        let r = dsg_run(&p, &[0.0], 0.01, 10, Some(1), &PrimalOracle::default()).unwrap();
        assert!(r
            .rows
            .iter()
            .all(|row| row.x == vec![0.5] && row.q.is_empty()));
    }

    #[test]
    fn zero_step_keeps_the_primal_iterate_fixed() {
        let p = one_d();
        let mut s = DualState::new(&p, &[1.0], 0.0).unwrap();
        let oracle = PrimalOracle::default();
        let first = dual_step(&mut s, &p, &oracle).unwrap().x;
        for _ in 0..5 {
            assert_eq!(dual_step(&mut s, &p, &oracle).unwrap().x, first);
        }
    }

    #[test]
    fn rejects_bad_gamma() {
        let p = one_d();
        assert!(dsg_run(&p, &[1.0], 0.0, 5, None, &PrimalOracle::default()).is_err());
    }
}
