//! Convex programs `min f(x) s.t. g(x) ≤ 0, x ∈ box`.
//!
//! Objectives and constraints come in three flavours. Separable ones are
//! sums of [`Univariate`] terms, one per coordinate; this is what lets the
//! primal oracle split the penalized subproblem into independent scalar
//! problems. Linear constraints `Ax − b` carry their matrix. Anything else
//! goes through the [`ObjectiveFn`] / [`ConstraintFn`] traits and is solved
//! by projected gradient.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Lower end used in place of 0 for coordinates with a `−log x` term.
pub const LOG_DOMAIN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box hi", lo.len(), hi.len()));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "box bounds must be finite (coordinate {i})"
                )));
            }
            if l > h {
                return Err(Error::InvalidArgument(format!(
                    "box lo > hi at coordinate {i}: {l} > {h}"
                )));
            }
        }
        Ok(BoxSet { lo, hi })
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxSet::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clamp_in_place(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.max(*l).min(*h);
        }
    }
}

/// Componentwise `min(max(x_i, lo_i), hi_i)`.
pub fn clamp_to_box(x: &[f64], set: &BoxSet) -> Result<Vec<f64>> {
    if x.len() != set.dim() {
        return Err(Error::dim("clamp input", set.dim(), x.len()));
    }
    let mut out = x.to_vec();
    set.clamp_in_place(&mut out);
    Ok(out)
}

/// A convex scalar function of one coordinate:
/// `quad·x² + lin·x − neg_log·ln x − neg_log1p·ln(1 + x)`.
///
/// Nonnegative combinations stay in the family, which is how the
/// penalized subproblem for a separable program is assembled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Univariate {
    #[serde(default)]
    pub quad: f64,
    #[serde(default)]
    pub lin: f64,
    #[serde(default)]
    pub neg_log: f64,
    #[serde(default)]
    pub neg_log1p: f64,
}

impl Univariate {
    pub const ZERO: Univariate = Univariate {
        quad: 0.0,
        lin: 0.0,
        neg_log: 0.0,
        neg_log1p: 0.0,
    };

    pub fn linear(lin: f64) -> Self {
        Univariate { lin, ..Self::ZERO }
    }

    pub fn quadratic(quad: f64, lin: f64) -> Self {
        Univariate {
            quad,
            lin,
            ..Self::ZERO
        }
    }

    /// `−w·ln x`
    pub fn neg_log(w: f64) -> Self {
        Univariate {
            neg_log: w,
            ..Self::ZERO
        }
    }

    /// `−w·ln(1 + x)`
    pub fn neg_log1p(w: f64) -> Self {
        Univariate {
            neg_log1p: w,
            ..Self::ZERO
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut v = self.quad * x * x + self.lin * x;
        if self.neg_log != 0.0 {
            v -= self.neg_log * x.ln();
        }
        if self.neg_log1p != 0.0 {
            v -= self.neg_log1p * x.ln_1p();
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut d = 2.0 * self.quad * x + self.lin;
        if self.neg_log != 0.0 {
            d -= self.neg_log / x;
        }
        if self.neg_log1p != 0.0 {
            d -= self.neg_log1p / (1.0 + x);
        }
        d
    }

    pub fn is_affine(&self) -> bool {
        self.quad == 0.0 && self.neg_log == 0.0 && self.neg_log1p == 0.0
    }

    pub fn has_log(&self) -> bool {
        self.neg_log != 0.0 || self.neg_log1p != 0.0
    }

    pub fn is_convex(&self) -> bool {
        self.quad >= 0.0 && self.neg_log >= 0.0 && self.neg_log1p >= 0.0
    }

    /// `self += s·other`
    pub fn add_scaled(&mut self, s: f64, other: &Univariate) {
        self.quad += s * other.quad;
        self.lin += s * other.lin;
        self.neg_log += s * other.neg_log;
        self.neg_log1p += s * other.neg_log1p;
    }

    /// Largest |derivative| on `[lo, hi]`. The derivative of a convex
    /// function is monotone, so the endpoints suffice.
    pub fn max_abs_slope(&self, lo: f64, hi: f64) -> f64 {
        let lo = if self.neg_log != 0.0 {
            lo.max(LOG_DOMAIN_FLOOR)
        } else {
            lo
        };
        self.derivative(lo).abs().max(self.derivative(hi).abs())
    }
}

/// One separable constraint row `Σ_i h_i(x_i) + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableRow {
    pub terms: Vec<(usize, Univariate)>,
    pub offset: f64,
}

impl SeparableRow {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(i, h)| h.value(x[*i])).sum::<f64>() + self.offset
    }
}

pub trait ObjectiveFn: fmt::Debug + Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64], out: &mut [f64]);
}

pub trait ConstraintFn: fmt::Debug + Send + Sync {
    fn len(&self) -> usize;
    fn values(&self, x: &[f64], out: &mut [f64]);
    /// Writes a subgradient of constraint `k` at `x` into `out`.
    fn subgradient(&self, k: usize, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub enum Objective {
    /// One term per coordinate.
    Separable(Vec<Univariate>),
    General(Arc<dyn ObjectiveFn>),
}

#[derive(Debug, Clone)]
pub enum Constraints {
    /// `g(x) = A x − b`
    Linear {
        a: Matrix,
        b: Vec<f64>,
    },
    Separable(Vec<SeparableRow>),
    General(Arc<dyn ConstraintFn>),
}

impl Constraints {
    pub fn none() -> Self {
        Constraints::Separable(Vec::new())
    }

    pub fn len(&self) -> usize {
        match self {
            Constraints::Linear { b, .. } => b.len(),
            Constraints::Separable(rows) => rows.len(),
            Constraints::General(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Structure tag exposed to callers and used for oracle routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    General,
    LinearConstraints,
    SeparableQuadratic,
    /// Separable, but some coordinate carries a logarithmic term.
    Separable,
}

/// Whether the original problem was posed as a maximization. The program
/// itself always minimizes; this only affects how values are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ConvexProgram {
    n: usize,
    objective: Objective,
    constraints: Constraints,
    bounds: BoxSet,
    beta_hint: Option<f64>,
    sense: Sense,
    name: String,
    // separable constraint terms regrouped by coordinate: (row, term)
    coord_terms: Vec<Vec<(usize, Univariate)>>,
}

impl ConvexProgram {
    pub fn new(objective: Objective, constraints: Constraints, bounds: BoxSet) -> Result<Self> {
        let n = bounds.dim();
        if let Objective::Separable(terms) = &objective {
            if terms.len() != n {
                return Err(Error::dim("objective terms", n, terms.len()));
            }
            if let Some(i) = terms.iter().position(|t| !t.is_convex()) {
                return Err(Error::Config(format!(
                    "objective term at coordinate {i} is not convex"
                )));
            }
        }
        let mut coord_terms = vec![Vec::new(); n];
        match &constraints {
            Constraints::Linear { a, b } => {
                if a.cols() != n {
                    return Err(Error::dim("constraint matrix columns", n, a.cols()));
                }
                if a.rows() != b.len() {
                    return Err(Error::dim("constraint rhs", a.rows(), b.len()));
                }
                if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "constraint data must be finite".into(),
                    ));
                }
            }
            Constraints::Separable(rows) => {
                for (k, row) in rows.iter().enumerate() {
                    for (i, h) in &row.terms {
                        if *i >= n {
                            return Err(Error::Config(format!(
                                "constraint {k} references coordinate {i} but n = {n}"
                            )));
                        }
                        if !h.is_convex() {
                            return Err(Error::Config(format!(
                                "constraint {k} term on coordinate {i} is not convex"
                            )));
                        }
                        coord_terms[*i].push((k, *h));
                    }
                }
            }
            Constraints::General(_) => {}
        }
        Ok(ConvexProgram {
            n,
            objective,
            constraints,
            bounds,
            beta_hint: None,
            sense: Sense::Minimize,
            name: String::from("program"),
            coord_terms,
        })
    }

    pub fn with_beta_hint(mut self, beta: f64) -> Self {
        self.beta_hint = Some(beta);
        self
    }

    pub fn with_sense(mut self, sense: Sense) -> Self {
        self.sense = sense;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn beta_hint(&self) -> Option<f64> {
        self.beta_hint
    }

    /// Separable constraint terms touching coordinate `i`, as `(row, term)`.
    pub(crate) fn coord_terms(&self, i: usize) -> &[(usize, Univariate)] {
        &self.coord_terms[i]
    }

    /// Objective value in the sense the problem was posed in.
    pub fn reported_objective(&self, f: f64) -> f64 {
        match self.sense {
            Sense::Minimize => f,
            Sense::Maximize => -f,
        }
    }

    pub fn structure(&self) -> Structure {
        let obj_terms = match &self.objective {
            Objective::Separable(t) => t,
            Objective::General(_) => return Structure::General,
        };
        match &self.constraints {
            Constraints::General(_) => Structure::General,
            Constraints::Linear { .. } => Structure::LinearConstraints,
            Constraints::Separable(rows) => {
                let logs = obj_terms.iter().any(Univariate::has_log)
                    || rows.iter().flat_map(|r| &r.terms).any(|(_, h)| h.has_log());
                if logs {
                    Structure::Separable
                } else {
                    Structure::SeparableQuadratic
                }
            }
        }
    }

    /// Lower bounds with `−log` coordinates lifted off zero.
    pub fn effective_lo(&self, i: usize) -> f64 {
        let lo = self.bounds.lo[i];
        match &self.objective {
            Objective::Separable(t) if t[i].neg_log != 0.0 => lo.max(LOG_DOMAIN_FLOOR),
            _ => lo,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dim("point", self.n, x.len()));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Separable(terms) => terms.iter().zip(x).map(|(t, v)| t.value(*v)).sum(),
            Objective::General(f) => f.value(x),
        }
    }

    pub fn objective_subgradient(&self, x: &[f64], out: &mut [f64]) {
        match &self.objective {
            Objective::Separable(terms) => {
                for ((o, t), v) in out.iter_mut().zip(terms).zip(x) {
                    *o = t.derivative(*v);
                }
            }
            Objective::General(f) => f.subgradient(x, out),
        }
    }

    pub fn constraint_values_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.constraints {
            Constraints::Linear { a, b } => {
                a.mul_vec_into(x, out);
                for (o, bk) in out.iter_mut().zip(b) {
                    *o -= bk;
                }
            }
            Constraints::Separable(rows) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = row.value(x);
                }
            }
            Constraints::General(c) => c.values(x, out),
        }
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.m()];
        self.constraint_values_into(x, &mut g);
        g
    }

    pub fn constraint_subgradient(&self, k: usize, x: &[f64], out: &mut [f64]) {
        match &self.constraints {
            Constraints::Linear { a, .. } => out.copy_from_slice(a.row(k)),
            Constraints::Separable(rows) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (i, h) in &rows[k].terms {
                    out[*i] += h.derivative(x[*i]);
                }
            }
            Constraints::General(c) => c.subgradient(k, x, out),
        }
    }

    /// `(f(x), g(x))`; pure and deterministic.
    pub fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(x)?;
        Ok((self.objective_value(x), self.constraint_values(x)))
    }

    /// Lipschitz modulus of `g` on the box: the hint when present, the
    /// spectral norm for linear constraints, and for separable rows the
    /// spectral norm of the matrix of per-term slope bounds.
    pub fn beta(&self) -> Result<f64> {
        if let Some(b) = self.beta_hint {
            return Ok(b);
        }
        match &self.constraints {
            Constraints::Linear { a, .. } => Ok(spectral_norm(a)?.value),
            Constraints::Separable(_) => Ok(spectral_norm(&self.slope_bound_matrix())?.value),
            Constraints::General(_) => Err(Error::Config(
                "Lipschitz modulus of a general constraint map must be supplied".into(),
            )),
        }
    }

    /// `J_ki = max |∂ h_ki / ∂x_i|` over the box, for separable rows. `‖J‖₂`
    /// bounds the Lipschitz modulus of `g` by the mean value theorem.
    pub fn slope_bound_matrix(&self) -> Matrix {
        let mut j = Matrix::zeros(self.m(), self.n);
        if let Constraints::Separable(rows) = &self.constraints {
            for (k, row) in rows.iter().enumerate() {
                for (i, h) in &row.terms {
                    j[(k, *i)] += h.max_abs_slope(self.bounds.lo[*i], self.bounds.hi[*i]);
                }
            }
        }
        j
    }
}

/// Largest singular value by power iteration on `AᵀA`.
///
/// Starts from the normalized all-ones vector; stops once successive
/// Rayleigh quotients differ by less than `1e-12` or after 10 000 rounds.
pub fn spectral_norm(a: &Matrix) -> Result<SpectralEstimate> {
    spectral_norm_with(a, 1e-12, 10_000)
}

pub fn spectral_norm_with(a: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument(
            "matrix has non-finite entries".into(),
        ));
    }
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.nonzeros() == 0 {
        return Ok(SpectralEstimate {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut av = vec![0.0; a.rows()];
    let mut w = vec![0.0; n];
    let mut lambda_prev = f64::NAN;
    let mut residual = f64::INFINITY;
    let mut kick = 0usize;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        a.mul_vec_into(&v, &mut av);
        a.tr_mul_vec_into(&av, &mut w);
        let lambda = linalg::dot(&v, &w);
        let wn = linalg::norm(&w);
        if wn == 0.0 {
            // v lies in the null space; push it along the next basis vector.
            if kick >= n {
                break;
            }
            v[kick] += 1.0;
            kick += 1;
            let vn = linalg::norm(&v);
            v.iter_mut().for_each(|x| *x /= vn);
            continue;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        if lambda_prev.is_finite() {
            residual = (lambda - lambda_prev).abs();
            if residual < tol {
                lambda_prev = lambda;
                break;
            }
        }
        lambda_prev = lambda;
    }
    let value = if lambda_prev.is_finite() {
        lambda_prev.max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(SpectralEstimate {
        value,
        iterations,
        residual: if residual.is_finite() { residual } else { 0.0 },
    })
}

/// `‖A‖_F`, an upper bound on the spectral norm.
pub fn frobenius_bound(a: &Matrix) -> f64 {
    (0..a.rows())
        .flat_map(|i| a.row(i).iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// JSON problem files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "box")]
    pub bounds: BoxSet,
    pub linear: LinearSpec,
    pub objective: ObjectiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSpec {
    #[serde(rename = "A")]
    pub a: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    /// `cᵀx`
    Linear { c: Vec<f64> },
    /// `Σ p_i x_i² + c_i x_i`
    DiagQuadratic { p: Vec<f64>, c: Vec<f64> },
    /// `−Σ w_i ln x_i`
    NegLogUtility { weights: Vec<f64> },
}

impl ObjectiveSpec {
    fn terms(&self, n: usize) -> Result<Vec<Univariate>> {
        let terms: Vec<Univariate> = match self {
            ObjectiveSpec::Linear { c } => c.iter().map(|&c| Univariate::linear(c)).collect(),
            ObjectiveSpec::DiagQuadratic { p, c } => {
                if p.len() != c.len() {
                    return Err(Error::dim("diag-quadratic c", p.len(), c.len()));
                }
                p.iter()
                    .zip(c)
                    .map(|(&p, &c)| Univariate::quadratic(p, c))
                    .collect()
            }
            ObjectiveSpec::NegLogUtility { weights } => {
                weights.iter().map(|&w| Univariate::neg_log(w)).collect()
            }
        };
        if terms.len() != n {
            return Err(Error::dim("objective parameters", n, terms.len()));
        }
        Ok(terms)
    }
}

impl ProblemFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn into_program(self) -> Result<ConvexProgram> {
        if self.linear.a.rows() != self.m {
            return Err(Error::dim("rows of A", self.m, self.linear.a.rows()));
        }
        if self.bounds.dim() != self.n {
            return Err(Error::dim("box", self.n, self.bounds.dim()));
        }
        let bounds = BoxSet::new(self.bounds.lo, self.bounds.hi)?;
        let terms = self.objective.terms(self.n)?;
        let mut p = ConvexProgram::new(
            Objective::Separable(terms),
            Constraints::Linear {
                a: self.linear.a,
                b: self.linear.b,
            },
            bounds,
        )?
        .with_sense(self.sense)
        .with_name("problem-file");
        if let Some(b) = self.beta {
            p = p.with_beta_hint(b);
        }
        Ok(p)
    }
}
