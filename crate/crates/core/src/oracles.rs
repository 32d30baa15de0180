//! Primal oracles for the penalized subproblem
//!
//! ```text
//! argmin_{x ∈ box}  f(x) + Wᵀ g(x) + α‖x − x_prev‖²
//! ```
//!
//! For separable programs the problem splits into one scalar problem per
//! coordinate, each a [`Univariate`]: closed form when the term is a
//! quadratic or a quadratic plus `−w·ln x`, bisection on the derivative
//! otherwise. Programs without exploitable structure fall back to
//! projected gradient with backtracking.

use crate::error::{Error, Result};
use crate::linalg;
use crate::program::{Constraints, ConvexProgram, Objective, Univariate, LOG_DOMAIN_FLOOR};

pub const DEFAULT_SCALAR_TOL: f64 = 1e-12;

/// One instance of the penalized primal problem.
#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    pub program: &'a ConvexProgram,
    /// `W = Q(t) + g(x(t−1))`, or the multipliers for a Lagrangian step.
    pub weights: &'a [f64],
    pub x_prev: &'a [f64],
    /// Prox weight. Zero gives the plain Lagrangian minimization used by
    /// the dual subgradient baseline.
    pub alpha: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(
        program: &'a ConvexProgram,
        weights: &'a [f64],
        x_prev: &'a [f64],
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prox weight must be positive and finite, got {alpha}"
            )));
        }
        Self::checked(program, weights, x_prev, alpha)
    }

    /// `argmin f(x) + λᵀg(x)` over the box, no prox term.
    pub fn lagrangian(
        program: &'a ConvexProgram,
        multipliers: &'a [f64],
        x_ref: &'a [f64],
    ) -> Result<Self> {
        Self::checked(program, multipliers, x_ref, 0.0)
    }

    fn checked(
        program: &'a ConvexProgram,
        weights: &'a [f64],
        x_prev: &'a [f64],
        alpha: f64,
    ) -> Result<Self> {
        if weights.len() != program.m() {
            return Err(Error::dim("subproblem weights", program.m(), weights.len()));
        }
        if x_prev.len() != program.n() {
            return Err(Error::dim("subproblem x_prev", program.n(), x_prev.len()));
        }
        Ok(Subproblem {
            program,
            weights,
            x_prev,
            alpha,
        })
    }

    /// Value of the penalized objective at `x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let g = self.program.constraint_values(x);
        let prox = if self.alpha > 0.0 {
            let d = linalg::dist(x, self.x_prev);
            self.alpha * d * d
        } else {
            0.0
        };
        self.program.objective_value(x) + linalg::dot(self.weights, &g) + prox
    }

    fn gradient(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.program.objective_subgradient(x, out);
        for (k, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            self.program.constraint_subgradient(k, x, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += w * s;
            }
        }
        if self.alpha > 0.0 {
            for ((o, xi), pi) in out.iter_mut().zip(x).zip(self.x_prev) {
                *o += 2.0 * self.alpha * (xi - pi);
            }
        }
    }

    /// The scalar problem for coordinate `i` of a separable program.
    /// `aw` must hold `AᵀW` when the constraints are linear.
    fn coordinate_term(&self, i: usize, objective: &[Univariate], aw: &[f64]) -> Univariate {
        let mut u = objective[i];
        match self.program.constraints() {
            Constraints::Linear { .. } => u.lin += aw[i],
            Constraints::Separable(_) => {
                for (k, h) in self.program.coord_terms(i) {
                    u.add_scaled(self.weights[*k], h);
                }
            }
            Constraints::General(_) => unreachable!("general constraints are not separable"),
        }
        if self.alpha > 0.0 {
            u.quad += self.alpha;
            u.lin -= 2.0 * self.alpha * self.x_prev[i];
        }
        u
    }
}

/// Exact minimizer of `a·x² + b·x` on `[lo, hi]`.
pub fn solve_separable_quadratic(a: f64, b: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadratic coefficient must be positive, got {a}"
        )));
    }
    Ok((-b / (2.0 * a)).max(lo).min(hi))
}

/// Minimizer of a linear function `b·x` on `[lo, hi]`; ties go to `lo`.
pub fn linear_endpoint(b: f64, lo: f64, hi: f64) -> f64 {
    if b < 0.0 {
        hi
    } else {
        lo
    }
}

/// Minimizes a convex scalar function given its (nondecreasing)
/// derivative, by bisection on the sign of the derivative.
pub fn solve_scalar_convex<F>(derivative: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "empty bracket [{lo}, {hi}]"
        )));
    }
    let eval = |x: f64| -> Result<f64> {
        let d = derivative(x);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::NumericalDomain(format!(
                "derivative is {d} at x = {x}"
            )))
        }
    };
    if eval(lo)? >= 0.0 {
        return Ok(lo);
    }
    if eval(hi)? <= 0.0 {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if eval(mid)? > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Minimizer of `q·x² + l·x − w·ln x` on `[lo, hi]` for `w > 0`, from the
/// positive root of `2q·x² + l·x − w = 0`.
pub fn solve_log_quadratic(q: f64, l: f64, w: f64, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(LOG_DOMAIN_FLOOR);
    let root = if q > 0.0 {
        let disc = (l * l + 8.0 * q * w).sqrt();
        if l <= 0.0 {
            (disc - l) / (4.0 * q)
        } else {
            // same root, written to avoid cancellation
            2.0 * w / (l + disc)
        }
    } else if l > 0.0 {
        w / l
    } else {
        hi
    };
    root.max(lo).min(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarMethod {
    /// Closed forms where available, bisection for the rest.
    ClosedForm,
    /// Bisection for every coordinate.
    Bisection,
}

/// Minimizes one [`Univariate`] over `[lo, hi]`.
pub fn minimize_univariate(
    u: &Univariate,
    lo: f64,
    hi: f64,
    method: ScalarMethod,
    tol: f64,
) -> Result<f64> {
    if !u.is_convex() {
        return Err(Error::NumericalDomain(format!(
            "scalar subproblem is not convex: {u:?}"
        )));
    }
    let lo = if u.neg_log != 0.0 {
        lo.max(LOG_DOMAIN_FLOOR)
    } else {
        lo
    };
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    if method == ScalarMethod::ClosedForm {
        if !u.has_log() {
            return if u.quad > 0.0 {
                solve_separable_quadratic(u.quad, u.lin, lo, hi)
            } else {
                Ok(linear_endpoint(u.lin, lo, hi))
            };
        }
        if u.neg_log1p == 0.0 {
            return Ok(solve_log_quadratic(u.quad, u.lin, u.neg_log, lo, hi));
        }
    }
    solve_scalar_convex(|x| u.derivative(x), lo, hi, tol)
}

/// Projected gradient with Armijo backtracking, started at `x_prev`.
///
/// The initial step is `1/(2α + L)` with `L = 2α + ‖W‖·β`; it is halved
/// whenever the quadratic upper model fails. Stops once the gradient
/// mapping norm drops below `tol`.
pub fn solve_projected_gradient(
    sub: &Subproblem<'_>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let program = sub.program;
    let n = program.n();
    let bounds = program.bounds();
    let lo: Vec<f64> = (0..n).map(|i| program.effective_lo(i)).collect();
    let project = |x: &mut [f64]| {
        for ((v, l), h) in x.iter_mut().zip(&lo).zip(&bounds.hi) {
            *v = v.max(*l).min(*h);
        }
    };

    let beta_g = program.beta().unwrap_or(0.0);
    let l_est = 2.0 * sub.alpha + linalg::norm(sub.weights) * beta_g;
    let mut step = 1.0 / (2.0 * sub.alpha + l_est).max(1e-12);

    let mut x = sub.x_prev.to_vec();
    project(&mut x);
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut fx = sub.objective(&x);
    let mut residual = f64::INFINITY;

    for _ in 0..max_iter {
        sub.gradient(&x, &mut grad, &mut scratch);
        let mut accepted = false;
        for _ in 0..80 {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi - step * gi;
            }
            project(&mut trial);
            let ft = sub.objective(&trial);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((t, xi), gi) in trial.iter().zip(&x).zip(&grad) {
                lin += gi * (t - xi);
                sq += (t - xi) * (t - xi);
            }
            let model = fx + lin + sq / (2.0 * step);
            if ft <= model + 1e-14 * fx.abs().max(1.0) {
                residual = sq.sqrt() / step;
                fx = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NumericalDomain(
                "backtracking line search failed".into(),
            ));
        }
        std::mem::swap(&mut x, &mut trial);
        if residual < tol {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
        last_iterate: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Per-coordinate solves when the structure allows, projected gradient otherwise.
    Auto,
    /// Per-coordinate solves; a configuration error for general programs.
    Separable,
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy)]
pub struct PrimalOracle {
    pub route: Route,
    pub scalar_method: ScalarMethod,
    pub scalar_tol: f64,
    pub pg_tol: f64,
    pub pg_max_iter: usize,
}

impl Default for PrimalOracle {
    fn default() -> Self {
        PrimalOracle {
            route: Route::Auto,
            scalar_method: ScalarMethod::ClosedForm,
            scalar_tol: DEFAULT_SCALAR_TOL,
            pg_tol: 1e-10,
            pg_max_iter: 200_000,
        }
    }
}

impl PrimalOracle {
    pub fn with_route(route: Route) -> Self {
        PrimalOracle {
            route,
            ..Self::default()
        }
    }

    pub fn bisection_only() -> Self {
        PrimalOracle {
            route: Route::Separable,
            scalar_method: ScalarMethod::Bisection,
            ..Self::default()
        }
    }

    /// Short label echoed into run reports.
    pub fn id(&self) -> String {
        let route = match self.route {
            Route::Auto => "auto",
            Route::Separable => "separable",
            Route::ProjectedGradient => "projected-gradient",
        };
        match self.scalar_method {
            ScalarMethod::ClosedForm => route.to_string(),
            ScalarMethod::Bisection => format!("{route}/bisection"),
        }
    }

    fn is_separable(program: &ConvexProgram) -> bool {
        matches!(program.objective(), Objective::Separable(_))
            && !matches!(program.constraints(), Constraints::General(_))
    }

    pub fn solve(&self, sub: &Subproblem<'_>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; sub.program.n()];
        self.solve_into(sub, &mut out)?;
        Ok(out)
    }

    pub fn solve_into(&self, sub: &Subproblem<'_>, out: &mut [f64]) -> Result<()> {
        let separable = Self::is_separable(sub.program);
        match self.route {
            Route::ProjectedGradient => {
                let x = solve_projected_gradient(sub, self.pg_tol, self.pg_max_iter)?;
                out.copy_from_slice(&x);
                Ok(())
            }
            Route::Separable if !separable => Err(Error::Config(format!(
                "program '{}' has no separable structure",
                sub.program.name()
            ))),
            Route::Auto if !separable => {
                let x = solve_projected_gradient(sub, self.pg_tol, self.pg_max_iter)?;
                out.copy_from_slice(&x);
                Ok(())
            }
            _ => self.solve_separable(sub, out),
        }
    }

    fn solve_separable(&self, sub: &Subproblem<'_>, out: &mut [f64]) -> Result<()> {
        let program = sub.program;
        let Objective::Separable(objective) = program.objective() else {
            unreachable!("checked by caller")
        };
        let aw = match program.constraints() {
            Constraints::Linear { a, .. } => a.tr_mul_vec(sub.weights),
            _ => Vec::new(),
        };
        let bounds = program.bounds();
        for (i, o) in out.iter_mut().enumerate() {
            let u = sub.coordinate_term(i, objective, &aw);
            *o = minimize_univariate(
                &u,
                bounds.lo[i],
                bounds.hi[i],
                self.scalar_method,
                self.scalar_tol,
            )?;
        }
        Ok(())
    }
}

/// Solves with the default oracle (structure-based routing).
pub fn dispatch(sub: &Subproblem<'_>) -> Result<Vec<f64>> {
    PrimalOracle::default().solve(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::program::{BoxSet, SeparableRow};
    use std::sync::Arc;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quadratic_path_update_arithmetic() {
        // x_prev = 0.5, ΣY = 1.0, Z = 0.2, α = 10: b = (1.0 − 0.2) − 2·10·0.5
        let b = (1.0 - 0.2) - 2.0 * 10.0 * 0.5;
        let x = solve_separable_quadratic(10.0, b, 0.0, 1.0).unwrap();
        assert!(close(x, 0.46, 1e-15));
    }

    #[test]
    fn quadratic_vertex_and_clamp() {
        assert!(close(
            solve_separable_quadratic(11.0, -2.0, 0.0, 1.0).unwrap(),
            1.0 / 11.0,
            1e-15
        ));
        assert_eq!(solve_separable_quadratic(1.0, 10.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            solve_separable_quadratic(0.0, 1.0, 0.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn scalar_log_root_matches_quadratic_formula() {
        // −ln y + 10(y − 1)² ⇒ 20y² − 20y − 1 = 0
        let expected = (20.0 + 480f64.sqrt()) / 40.0;
        let u = Univariate {
            quad: 10.0,
            lin: -20.0,
            neg_log: 1.0,
            neg_log1p: 0.0,
        };
        let bis = solve_scalar_convex(|y| u.derivative(y), 1e-12, 10.0, 1e-12).unwrap();
        let closed = minimize_univariate(&u, 0.0, 10.0, ScalarMethod::ClosedForm, 1e-12).unwrap();
        assert!(close(bis, expected, 1e-10), "{bis} vs {expected}");
        assert!(close(closed, expected, 1e-12));
        assert!(close(expected, 1.047722, 1e-6));
    }

    #[test]
    fn scalar_monotone_increasing_returns_lo() {
        assert_eq!(solve_scalar_convex(|_| 1.0, 0.0, 1.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn scalar_rejects_non_finite_derivative() {
        let err = solve_scalar_convex(|_| f64::NAN, 0.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NumericalDomain(_)));
    }

    #[test]
    fn power_link_update() {
        // 0.25 − 1/(1+p) + 20p = 0 on [0, 10], root of 20p² + 20.25p − 0.75.
        let oracle = (-20.25 + (20.25f64 * 20.25 + 4.0 * 20.0 * 0.75).sqrt()) / 40.0;
        let p =
            solve_scalar_convex(|p| 0.25 - 1.0 / (1.0 + p) + 20.0 * p, 0.0, 10.0, 1e-12).unwrap();
        assert!(close(p, oracle, 1e-9));
        assert!(close(p, 0.035773, 1e-6));
    }

    fn diag_qp(n: usize) -> ConvexProgram {
        let objective = (0..n)
            .map(|i| Univariate::quadratic(0.5 + i as f64, -1.0 + 0.7 * i as f64))
            .collect();
        let row = SeparableRow {
            terms: (0..n)
                .map(|i| (i, Univariate::quadratic(0.3, 0.2 - 0.4 * i as f64)))
                .collect(),
            offset: -0.5,
        };
        ConvexProgram::new(
            Objective::Separable(objective),
            Constraints::Separable(vec![row]),
            BoxSet::uniform(n, 0.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn projected_gradient_prox_of_zero_is_x_prev() {
        let p = ConvexProgram::new(
            Objective::Separable(vec![Univariate::ZERO; 3]),
            Constraints::none(),
            BoxSet::uniform(3, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        let x_prev = [0.2, 0.7, 1.0];
        let sub = Subproblem::new(&p, &[], &x_prev, 2.0).unwrap();
        let x = solve_projected_gradient(&sub, 1e-12, 100).unwrap();
        assert!(linalg::max_abs_diff(&x, &x_prev) < 1e-12);
    }

    #[test]
    fn projected_gradient_matches_closed_form_on_diag_qp() {
        let p = diag_qp(2);
        let w = [1.3];
        let x_prev = [0.1, 0.9];
        let sub = Subproblem::new(&p, &w, &x_prev, 3.0).unwrap();
        let pg = solve_projected_gradient(&sub, 1e-11, 100_000).unwrap();
        let cf = PrimalOracle::with_route(Route::Separable)
            .solve(&sub)
            .unwrap();
        // coordinate oracle: (p_i + W q_i + α) x² + (c_i + W d_i − 2α x_prev,i) x
        for i in 0..2 {
            let a = 0.5 + i as f64 + 1.3 * 0.3 + 3.0;
            let b = -1.0 + 0.7 * i as f64 + 1.3 * (0.2 - 0.4 * i as f64) - 6.0 * x_prev[i];
            let expected = (-b / (2.0 * a)).clamp(0.0, 1.0);
            assert!(close(cf[i], expected, 1e-15));
            assert!(close(pg[i], expected, 1e-8), "{} vs {}", pg[i], expected);
        }
    }

    #[test]
    fn projected_gradient_zero_tolerance_fails() {
        let p = diag_qp(2);
        let sub = Subproblem::new(&p, &[0.0], &[0.5, 0.5], 1.0).unwrap();
        let err = solve_projected_gradient(&sub, 0.0, 50).unwrap_err();
        match err {
            Error::NonConvergence {
                iterations,
                last_iterate,
                ..
            } => {
                assert_eq!(iterations, 50);
                assert_eq!(last_iterate.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[derive(Debug)]
    struct SumSquares;
    impl crate::program::ObjectiveFn for SumSquares {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
        }
        fn subgradient(&self, x: &[f64], out: &mut [f64]) {
            for (o, v) in out.iter_mut().zip(x) {
                *o = 2.0 * (v - 0.3);
            }
        }
    }

    #[test]
    fn general_program_routes_to_projected_gradient() {
        let p = ConvexProgram::new(
            Objective::General(Arc::new(SumSquares)),
            Constraints::Linear {
                a: Matrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
                b: vec![1.0],
            },
            BoxSet::uniform(2, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        let sub = Subproblem::new(&p, &[0.5], &[0.0, 0.0], 1.0).unwrap();
        // (x − 0.3)² + 0.5x + x²: 4x − 0.6 + 0.5 = 0
        let x = dispatch(&sub).unwrap();
        assert!(
            close(x[0], 0.025, 1e-9) && close(x[1], 0.025, 1e-9),
            "{x:?}"
        );
        let err = PrimalOracle::with_route(Route::Separable)
            .solve(&sub)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn lagrangian_linear_terms_are_bang_bang() {
        let p = ConvexProgram::new(
            Objective::Separable(vec![
                Univariate::linear(1.0),
                Univariate::linear(-1.0),
                Univariate::ZERO,
            ]),
            Constraints::none(),
            BoxSet::uniform(3, 0.0, 2.0).unwrap(),
        )
        .unwrap();
        let x_ref = [1.0; 3];
        let sub = Subproblem::lagrangian(&p, &[], &x_ref).unwrap();
        assert_eq!(dispatch(&sub).unwrap(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn subproblem_rejects_nonpositive_alpha() {
        let p = diag_qp(2);
        assert!(Subproblem::new(&p, &[0.0], &[0.0, 0.0], 0.0).is_err());
        assert!(Subproblem::new(&p, &[0.0, 1.0], &[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn optimality_certificate_on_random_perturbations() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(7);
        let mut unif =
            |a: f64, b: f64| a + (b - a) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64);
        let p = diag_qp(6);
        let alpha = 2.5;
        let w = [0.8];
        let x_prev: Vec<f64> = (0..6).map(|_| unif(0.0, 1.0)).collect();
        let sub = Subproblem::new(&p, &w, &x_prev, alpha).unwrap();
        let xs = dispatch(&sub).unwrap();
        let best = sub.objective(&xs);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| unif(0.0, 1.0)).collect();
            let d = linalg::dist(&x, &xs);
            assert!(sub.objective(&x) >= best + alpha * d * d - 1e-7);
        }
    }
}
