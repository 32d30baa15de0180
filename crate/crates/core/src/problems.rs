//! Bundled instances: the 9-link / 7-path / 3-source network (fixed
//! capacities, and with power-controlled capacities), and a seeded random
//! quadratically constrained QP.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netflow::{self, NumProblem, Topology};
use crate::oracles;
use crate::program::{
    self, BoxSet, Constraints, ConvexProgram, Objective, Sense, SeparableRow, Univariate,
};
use crate::solver::BoundReference;

/// Optimal utility of the fixed-capacity network problem.
pub const FIG1_NUM_OPTIMUM: f64 = 1.65687;
/// Optimal value of the joint flow and power problem (utility minus power cost).
pub const FIG1_FLOW_POWER_OPTIMUM: f64 = -0.521318;
/// Published `σ_max` of the stacked constraint matrix.
pub const FIG1_BETA: f64 = 2.4307;
/// Published Lipschitz modulus of the flow-power constraints.
pub const FIG1_FLOW_POWER_BETA: f64 = 2.5229;
/// Penalty parameter used for both network experiments.
pub const FIG1_ALPHA: f64 = 10.0;

pub const FIG1_X_MAX: f64 = 2.0;
pub const FIG1_Y_MAX: f64 = 3.0;
pub const FLOW_POWER_P_MAX: f64 = 10.0;
pub const POWER_COST: f64 = 0.25;

/// Routing of the example network, 0-based: `(source, links)` per path.
pub fn fig1_topology() -> Topology {
    let paths = vec![
        (0, vec![0, 3]),
        (0, vec![1, 4]),
        (1, vec![2, 3]),
        (1, vec![4]),
        (1, vec![5, 6]),
        (2, vec![6, 7]),
        (2, vec![8]),
    ];
    Topology::new(vec![1.0; 9], paths).expect("fixed topology is valid")
}

/// Utilities `log y₁ + 2 log y₂ + 2 log y₃`.
pub fn fig1_problem() -> NumProblem {
    NumProblem::new(
        fig1_topology(),
        vec![1.0, 2.0, 2.0],
        vec![FIG1_X_MAX; 7],
        vec![FIG1_Y_MAX; 3],
    )
    .expect("fixed problem is valid")
}

pub fn fig1_num_program() -> ConvexProgram {
    netflow::build_num_program(&fig1_problem())
        .expect("fixed problem is valid")
        .with_name("fig1-num")
}

/// Closed-form optimum of the fixed-capacity problem on `z = (x, y)`.
///
/// Eliminating the active capacity rows leaves a two-variable concave
/// problem in `u = x₃ + x₄` and `v = x₅`, solved by `u = 1.2`, `v = 0.4`.
/// The split of `u` between paths 3 and 4 is free; this takes the symmetric
/// one. Multipliers are ordered links first, then sources.
pub fn fig1_num_reference() -> BoundReference {
    let x = [0.4, 0.4, 0.6, 0.6, 0.4, 0.6, 1.0];
    let y = [0.8f64, 1.6, 1.6];
    let mut lambda = vec![0.0; 12];
    for l in [3, 4, 6, 8] {
        lambda[l] = 1.25;
    }
    for s in 0..3 {
        lambda[9 + s] = 1.25;
    }
    let f_star = -(y[0].ln() + 2.0 * y[1].ln() + 2.0 * y[2].ln());
    let beta = program::spectral_norm(&fig1_topology().stacked_matrix())
        .expect("finite matrix")
        .value;
    BoundReference {
        f_star,
        x_star: x.iter().chain(&y).copied().collect(),
        lambda_star: lambda,
        beta,
    }
}

/// Joint flow and power control on `z = (x, y, p)`:
///
/// ```text
/// minimize   −Σ w_s log y_s + 0.25 Σ p_l
/// subject to Σ_{k∈D_l} x_k − log(1 + p_l) ≤ 0,   y_s − Σ_{k∈P_s} x_k ≤ 0
/// ```
///
/// `beta_hint` is the spectral norm of the slope-bound matrix, i.e. the
/// stacked incidence pattern with a unit entry for each `−log(1 + p_l)`.
pub fn build_flow_power_program(problem: &NumProblem, p_max: f64) -> Result<ConvexProgram> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "p_max must be positive, got {p_max}"
        )));
    }
    let topo = &problem.topology;
    let (nl, nk, ns) = (topo.links(), topo.paths(), topo.sources());
    let mut rows = Vec::with_capacity(nl + ns);
    for l in 0..nl {
        let mut terms: Vec<(usize, Univariate)> = topo
            .link_paths(l)
            .iter()
            .map(|&k| (k, Univariate::linear(1.0)))
            .collect();
        terms.push((nk + ns + l, Univariate::neg_log1p(1.0)));
        rows.push(SeparableRow { terms, offset: 0.0 });
    }
    for s in 0..ns {
        let mut terms: Vec<(usize, Univariate)> = topo
            .source_paths(s)
            .iter()
            .map(|&k| (k, Univariate::linear(-1.0)))
            .collect();
        terms.push((nk + s, Univariate::linear(1.0)));
        rows.push(SeparableRow { terms, offset: 0.0 });
    }
    let mut objective = vec![Univariate::ZERO; nk];
    objective.extend(problem.weights.iter().map(|&w| {
        if w == 0.0 {
            Univariate::ZERO
        } else {
            Univariate::neg_log(w)
        }
    }));
    objective.extend((0..nl).map(|_| Univariate::linear(POWER_COST)));
    let hi = [
        problem.x_max.as_slice(),
        problem.y_max.as_slice(),
        &vec![p_max; nl],
    ]
    .concat();
    let program = ConvexProgram::new(
        Objective::Separable(objective),
        Constraints::Separable(rows),
        BoxSet::new(vec![0.0; hi.len()], hi)?,
    )?;
    let beta = program::spectral_norm(&program.slope_bound_matrix())?.value;
    Ok(program
        .with_beta_hint(beta)
        .with_sense(Sense::Maximize)
        .with_name("flow-power"))
}

pub fn fig1_flow_power_program() -> ConvexProgram {
    build_flow_power_program(&fig1_problem(), FLOW_POWER_P_MAX)
        .expect("fixed problem is valid")
        .with_name("fig1-flow-power")
}

/// Random instance of
///
/// ```text
/// minimize xᵀPx + cᵀx  subject to xᵀQx + dᵀx ≤ e,  x ∈ [0, 1]ⁿ
/// ```
///
/// with diagonal `P ~ U[0,4]`, `c ~ U[−15,20]`, diagonal `Q ~ U[0,1]`,
/// `d ~ U[−1,1]`, `e ~ U[4,5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpInstance {
    pub seed: u64,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub qm: Vec<f64>,
    pub d: Vec<f64>,
    pub e: f64,
}

pub const QP_DIM: usize = 100;

/// Draws every parameter from one SplitMix64 stream seeded with `seed`, in
/// the order `P`, `c`, `Q`, `d`, `e`. A uniform draw on `[a, b)` is
/// `a + (b − a)·(u >> 11)·2⁻⁵³` for the next 64-bit output `u`.
pub fn generate_qp(seed: u64) -> QpInstance {
    generate_qp_with_dim(seed, QP_DIM)
}

pub fn generate_qp_with_dim(seed: u64, n: usize) -> QpInstance {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut draw = |a: f64, b: f64, count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| a + (b - a) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64))
            .collect()
    };
    let p = draw(0.0, 4.0, n);
    let c = draw(-15.0, 20.0, n);
    let qm = draw(0.0, 1.0, n);
    let d = draw(-1.0, 1.0, n);
    let e = draw(4.0, 5.0, 1)[0];
    QpInstance {
        seed,
        p,
        c,
        qm,
        d,
        e,
    }
}

impl QpInstance {
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn program(&self) -> ConvexProgram {
        let objective = self
            .p
            .iter()
            .zip(&self.c)
            .map(|(&p, &c)| Univariate::quadratic(p, c))
            .collect();
        let terms = self
            .qm
            .iter()
            .zip(&self.d)
            .enumerate()
            .map(|(i, (&q, &d))| (i, Univariate::quadratic(q, d)))
            .collect();
        ConvexProgram::new(
            Objective::Separable(objective),
            Constraints::Separable(vec![SeparableRow {
                terms,
                offset: -self.e,
            }]),
            BoxSet::uniform(self.dim(), 0.0, 1.0).expect("unit box"),
        )
        .expect("generated instance is convex")
        .with_name(format!("qp(seed={})", self.seed))
    }

    pub fn constraint(&self, x: &[f64]) -> f64 {
        self.qm
            .iter()
            .zip(&self.d)
            .zip(x)
            .map(|((q, d), x)| q * x * x + d * x)
            .sum::<f64>()
            - self.e
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.p
            .iter()
            .zip(&self.c)
            .zip(x)
            .map(|((p, c), x)| p * x * x + c * x)
            .sum()
    }

    fn lagrangian_argmin(&self, lambda: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let a = self.p[i] + lambda * self.qm[i];
                let b = self.c[i] + lambda * self.d[i];
                if a > 0.0 {
                    (-b / (2.0 * a)).clamp(0.0, 1.0)
                } else {
                    oracles::linear_endpoint(b, 0.0, 1.0)
                }
            })
            .collect()
    }

    /// Optimum by bisection on the single multiplier: `g(x(λ))` is
    /// nonincreasing in `λ`, where `x(λ)` minimizes the Lagrangian.
    pub fn reference_solution(&self) -> BoundReference {
        let mut lambda = 0.0;
        if self.constraint(&self.lagrangian_argmin(0.0)) > 0.0 {
            let mut hi = 1.0;
            while self.constraint(&self.lagrangian_argmin(hi)) > 0.0 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.constraint(&self.lagrangian_argmin(mid)) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lambda = hi;
        }
        let x = self.lagrangian_argmin(lambda);
        let program = self.program();
        BoundReference {
            f_star: self.objective(&x),
            x_star: x,
            lambda_star: vec![lambda],
            beta: program
                .beta()
                .expect("separable constraints have a slope bound"),
        }
    }
}

/// Coordinate `i` of the penalized QP subproblem: minimizes
/// `(P_ii + W·Q_ii + α)x² + (c_i + W·d_i − 2α·x_prev)x` over `[0, 1]`.
pub fn qp_coordinate_update(qp: &QpInstance, i: usize, w: f64, alpha: f64, x_prev: f64) -> f64 {
    let a = qp.p[i] + w * qp.qm[i] + alpha;
    let b = qp.c[i] + w * qp.d[i] - 2.0 * alpha * x_prev;
    if a > 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else {
        oracles::linear_endpoint(b, 0.0, 1.0)
    }
}

/// A random convex separable program for property tests: `n ≤ max_n`
/// coordinates on a box `[0, h]`, `1..=max_m` constraints built from
/// convex quadratics and occasional `−w·ln(1+x)` terms, and objective
/// terms that are convex quadratics plus an occasional `−w·ln x`.
/// Returns the program, a starting point inside the box and a penalty
/// parameter.
pub fn random_separable_program(
    seed: u64,
    max_n: usize,
    max_m: usize,
) -> (ConvexProgram, Vec<f64>, f64) {
    use rand::Rng;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n.max(1));
    let m = rng.random_range(1..=max_m.max(1));
    let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let objective = (0..n)
        .map(|_| {
            let mut u =
                Univariate::quadratic(rng.random_range(0.0..2.0), rng.random_range(-3.0..3.0));
            if rng.random_bool(0.2) {
                u.neg_log = rng.random_range(0.1..1.0);
            }
            u
        })
        .collect();
    let rows = (0..m)
        .map(|_| {
            let len = rng.random_range(1..=n.min(4));
            let mut coords: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(coords.as_mut_slice(), &mut rng);
            let terms = coords[..len]
                .iter()
                .map(|&i| {
                    let mut h = Univariate::quadratic(
                        rng.random_range(0.0..1.0),
                        rng.random_range(-2.0..2.0),
                    );
                    if rng.random_bool(0.2) {
                        h.neg_log1p = rng.random_range(0.0..1.0);
                    }
                    (i, h)
                })
                .collect();
            SeparableRow {
                terms,
                offset: rng.random_range(-2.0..0.5),
            }
        })
        .collect();
    let x_init = hi.iter().map(|&h| rng.random_range(0.0..=h)).collect();
    let alpha = rng.random_range(0.5..5.0);
    let program = ConvexProgram::new(
        Objective::Separable(objective),
        Constraints::Separable(rows),
        BoxSet::new(vec![0.0; n], hi).expect("positive widths"),
    )
    .expect("convex by construction")
    .with_name(format!("random(seed={seed})"));
    (program, x_init, alpha)
}

/// Names accepted by [`lookup`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Fig1Num,
    Fig1FlowPower,
    Qp { seed: u64 },
}

impl FromStr for ProblemId {
    type Err = Error;

    /// `fig1-num`, `fig1-flow-power`, `qp` (seed 1), `qp(seed=N)`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fig1-num" => Ok(ProblemId::Fig1Num),
            "fig1-flow-power" => Ok(ProblemId::Fig1FlowPower),
            "qp" => Ok(ProblemId::Qp { seed: 1 }),
            other => other
                .strip_prefix("qp(seed=")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.trim().parse().ok())
                .map(|seed| ProblemId::Qp { seed })
                .ok_or_else(|| Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemId::Fig1Num => f.write_str("fig1-num"),
            ProblemId::Fig1FlowPower => f.write_str("fig1-flow-power"),
            ProblemId::Qp { seed } => write!(f, "qp(seed={seed})"),
        }
    }
}

/// A ready-to-run instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: ProblemId,
    pub program: ConvexProgram,
    /// Default `x(−1)`: zeros.
    pub x_init: Vec<f64>,
    /// Known optimum in the problem's own sense, if any.
    pub known_optimum: Option<f64>,
    /// Reference solution usable for bound checks.
    pub reference: Option<BoundReference>,
    /// Underlying network problem, for the network instances.
    pub network: Option<NumProblem>,
}

pub fn lookup(id: ProblemId) -> Instance {
    match id {
        ProblemId::Fig1Num => {
            let program = fig1_num_program();
            Instance {
                id,
                x_init: vec![0.0; program.n()],
                program,
                known_optimum: Some(FIG1_NUM_OPTIMUM),
                reference: Some(fig1_num_reference()),
                network: Some(fig1_problem()),
            }
        }
        ProblemId::Fig1FlowPower => {
            let program = fig1_flow_power_program();
            Instance {
                id,
                x_init: vec![0.0; program.n()],
                program,
                known_optimum: Some(FIG1_FLOW_POWER_OPTIMUM),
                reference: None,
                network: Some(fig1_problem()),
            }
        }
        ProblemId::Qp { seed } => {
            let qp = generate_qp(seed);
            let reference = qp.reference_solution();
            let program = qp.program();
            Instance {
                id,
                x_init: vec![0.0; program.n()],
                program,
                known_optimum: Some(reference.f_star),
                reference: Some(reference),
                network: None,
            }
        }
    }
}
