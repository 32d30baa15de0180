//! Multipath network utility maximization
//!
//! ```text
//! maximize   Σ_s w_s log y_s
//! subject to Σ_{k∈D_l} x_k ≤ c_l        for every link l
//!            y_s ≤ Σ_{k∈P_s} x_k         for every source s
//!            0 ≤ x ≤ x_max, 0 ≤ y ≤ y_max
//! ```
//!
//! and a simulation of the virtual-queue method run by independent link
//! and source agents that only exchange prices and rates.

use std::path::Path;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::oracles::{self, ScalarMethod, DEFAULT_SCALAR_TOL};
use crate::program::{self, BoxSet, Constraints, ConvexProgram, Objective, Sense, Univariate};
use crate::report::{
    default_stride, Algorithm, ConstraintMode, DriftRecord, Recorder, RunReport, Snapshot,
};
use crate::solver::queue_update_scalar;

/// Links, paths and sources, all 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    cap: Vec<f64>,
    path_links: Vec<Vec<usize>>,
    path_source: Vec<usize>,
    link_paths: Vec<Vec<usize>>,
    source_paths: Vec<Vec<usize>>,
}

impl Topology {
    /// `paths[k] = (source, links used by path k)`.
    pub fn new(cap: Vec<f64>, paths: Vec<(usize, Vec<usize>)>) -> Result<Self> {
        let l_count = cap.len();
        if l_count == 0 || paths.is_empty() {
            return Err(Error::Config(
                "topology needs at least one link and one path".into(),
            ));
        }
        if let Some(l) = cap.iter().position(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("link {l} has capacity {}", cap[l])));
        }
        let s_count = paths.iter().map(|(s, _)| s + 1).max().unwrap_or(0);
        let mut link_paths = vec![Vec::new(); l_count];
        let mut source_paths = vec![Vec::new(); s_count];
        let mut path_links = Vec::with_capacity(paths.len());
        let mut path_source = Vec::with_capacity(paths.len());
        for (k, (s, mut links)) in paths.into_iter().enumerate() {
            links.sort_unstable();
            if links.is_empty() {
                return Err(Error::Config(format!("path {k} uses no links")));
            }
            if links.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!("path {k} lists a link twice")));
            }
            if let Some(&l) = links.iter().find(|&&l| l >= l_count) {
                return Err(Error::Config(format!(
                    "path {k} uses link {l} but there are {l_count} links"
                )));
            }
            for &l in &links {
                link_paths[l].push(k);
            }
            source_paths[s].push(k);
            path_links.push(links);
            path_source.push(s);
        }
        if let Some(s) = source_paths.iter().position(Vec::is_empty) {
            return Err(Error::Config(format!("source {s} has no paths")));
        }
        Ok(Topology {
            cap,
            path_links,
            path_source,
            link_paths,
            source_paths,
        })
    }

    pub fn links(&self) -> usize {
        self.cap.len()
    }

    pub fn paths(&self) -> usize {
        self.path_links.len()
    }

    pub fn sources(&self) -> usize {
        self.source_paths.len()
    }

    pub fn capacities(&self) -> &[f64] {
        &self.cap
    }

    /// `E_k`, sorted.
    pub fn path_links(&self, k: usize) -> &[usize] {
        &self.path_links[k]
    }

    /// `D_l`, sorted.
    pub fn link_paths(&self, l: usize) -> &[usize] {
        &self.link_paths[l]
    }

    /// `P_s`, sorted.
    pub fn source_paths(&self, s: usize) -> &[usize] {
        &self.source_paths[s]
    }

    pub fn path_source(&self, k: usize) -> usize {
        self.path_source[k]
    }

    /// `Σ_k |E_k|`, the total hop count.
    pub fn hops(&self) -> usize {
        self.path_links.iter().map(Vec::len).sum()
    }

    /// Link-path incidence `R` (L×K).
    pub fn routing_matrix(&self) -> Matrix {
        let mut r = Matrix::zeros(self.links(), self.paths());
        for (k, links) in self.path_links.iter().enumerate() {
            for &l in links {
                r[(l, k)] = 1.0;
            }
        }
        r
    }

    /// Source-path incidence `T` (S×K).
    pub fn source_matrix(&self) -> Matrix {
        let mut t = Matrix::zeros(self.sources(), self.paths());
        for (k, &s) in self.path_source.iter().enumerate() {
            t[(s, k)] = 1.0;
        }
        t
    }

    /// `A = [R 0; −T I]`, the constraint matrix on `z = (x, y)`.
    pub fn stacked_matrix(&self) -> Matrix {
        let r = self.routing_matrix();
        let t = self.source_matrix().scaled(-1.0);
        let zero = Matrix::zeros(self.links(), self.sources());
        let eye = Matrix::identity(self.sources());
        Matrix::block(&[&[&r, &zero], &[&t, &eye]]).expect("block shapes agree by construction")
    }
}

/// A NUM instance with weighted log utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct NumProblem {
    pub topology: Topology,
    /// `w_s` in `w_s log y_s`.
    pub weights: Vec<f64>,
    pub x_max: Vec<f64>,
    pub y_max: Vec<f64>,
}

impl NumProblem {
    pub fn new(
        topology: Topology,
        weights: Vec<f64>,
        x_max: Vec<f64>,
        y_max: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != topology.sources() {
            return Err(Error::dim(
                "utility weights",
                topology.sources(),
                weights.len(),
            ));
        }
        if x_max.len() != topology.paths() {
            return Err(Error::dim("x_max", topology.paths(), x_max.len()));
        }
        if y_max.len() != topology.sources() {
            return Err(Error::dim("y_max", topology.sources(), y_max.len()));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config(
                "utility weights must be finite and nonnegative".into(),
            ));
        }
        if x_max
            .iter()
            .chain(&y_max)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::Config(
                "rate limits must be finite and positive".into(),
            ));
        }
        Ok(NumProblem {
            topology,
            weights,
            x_max,
            y_max,
        })
    }

    /// Total utility `Σ w_s log y_s`.
    pub fn utility(&self, y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(y)
            .map(|(w, v)| if *w == 0.0 { 0.0 } else { w * v.ln() })
            .sum()
    }

    fn y_term(&self, s: usize) -> Univariate {
        if self.weights[s] == 0.0 {
            Univariate::ZERO
        } else {
            Univariate::neg_log(self.weights[s])
        }
    }
}

/// On-disk topology description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub capacities: Vec<f64>,
    pub paths: Vec<PathSpec>,
    pub x_max: Vec<f64>,
    pub y_max: Vec<f64>,
    pub utilities: Vec<UtilitySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub source: usize,
    pub links: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum UtilitySpec {
    Log { weight: f64 },
}

impl TopologyFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_problem(self) -> Result<NumProblem> {
        let paths = self
            .paths
            .into_iter()
            .map(|p| (p.source, p.links))
            .collect();
        let topology = Topology::new(self.capacities, paths)?;
        let weights = self
            .utilities
            .into_iter()
            .map(|u| match u {
                UtilitySpec::Log { weight } => weight,
            })
            .collect();
        NumProblem::new(topology, weights, self.x_max, self.y_max)
    }

    pub fn from_problem(p: &NumProblem) -> Self {
        let t = &p.topology;
        TopologyFile {
            capacities: t.cap.clone(),
            paths: (0..t.paths())
                .map(|k| PathSpec {
                    source: t.path_source[k],
                    links: t.path_links[k].clone(),
                })
                .collect(),
            x_max: p.x_max.clone(),
            y_max: p.y_max.clone(),
            utilities: p
                .weights
                .iter()
                .map(|&weight| UtilitySpec::Log { weight })
                .collect(),
        }
    }
}

/// The NUM problem as a linear-constraint program on `z = (x, y)`, posed as
/// minimizing `−Σ w_s log y_s` with `g(z) = Az − b`, `b = (c, 0)`.
pub fn build_num_program(problem: &NumProblem) -> Result<ConvexProgram> {
    let t = &problem.topology;
    let a = t.stacked_matrix();
    let mut b = t.cap.clone();
    b.resize(t.links() + t.sources(), 0.0);
    let mut objective = vec![Univariate::ZERO; t.paths()];
    objective.extend((0..t.sources()).map(|s| problem.y_term(s)));
    let lo = vec![0.0; t.paths() + t.sources()];
    let hi = [problem.x_max.as_slice(), problem.y_max.as_slice()].concat();
    let beta = program::spectral_norm(&a)?.value;
    Ok(ConvexProgram::new(
        Objective::Separable(objective),
        Constraints::Linear { a, b },
        BoxSet::new(lo, hi)?,
    )?
    .with_beta_hint(beta)
    .with_sense(Sense::Maximize)
    .with_name("num"))
}

/// Upper bounds on `σ_max(A)`: `√(S + K + Σ_k |E_k|)` from the nonzero count
/// and the topology-free `√((L+1)K + S)`.
pub fn beta_bounds(topology: &Topology) -> (f64, f64) {
    let (l, k, s) = (topology.links(), topology.paths(), topology.sources());
    let hop = ((s + k + topology.hops()) as f64).sqrt();
    let loose = (((l + 1) * k + s) as f64).sqrt();
    debug_assert!(hop <= loose);
    (hop, loose)
}

/// Order in which agents are visited within a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentOrder {
    Index,
    /// Fresh random permutation every phase, from this seed.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MessageCount {
    /// Link-to-source price messages, one per (link, path) incidence.
    pub prices: usize,
    /// Source-to-link rate messages, one per (path, link) incidence.
    pub rates: usize,
}

#[derive(Debug, Clone)]
pub struct DecentralizedConfig {
    pub alpha: f64,
    pub iterations: usize,
    pub x_init: Vec<f64>,
    pub y_init: Vec<f64>,
    pub record_every: Option<usize>,
    pub order: AgentOrder,
}

impl DecentralizedConfig {
    /// Zero initial rates.
    pub fn new(problem: &NumProblem, alpha: f64, iterations: usize) -> Self {
        DecentralizedConfig {
            alpha,
            iterations,
            x_init: vec![0.0; problem.topology.paths()],
            y_init: vec![0.0; problem.topology.sources()],
            record_every: None,
            order: AgentOrder::Index,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecentralizedRun {
    /// Trace on `z = (x, y)` with queues ordered links first, then sources.
    pub report: RunReport,
    /// Per-round message counts.
    pub messages: Vec<MessageCount>,
    pub min_link_price: f64,
    pub min_source_price: f64,
}

struct LinkAgent {
    /// `Q_l(t)`
    queue: f64,
    /// `Y_l(t)`, the price last sent.
    price: f64,
    /// `Σ_{k∈D_l} x_k − c_l` for the latest rates received.
    excess: f64,
}

struct SourceAgent {
    /// `R_s(t)`
    queue: f64,
    /// `Z_s(t)`
    price: f64,
    /// `y_s − Σ_{k∈P_s} x_k` for the latest rates.
    excess: f64,
}

fn visit_order(n: usize, order: AgentOrder, rng: &mut SplitMix64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let AgentOrder::Shuffled(_) = order {
        idx.shuffle(rng);
    }
    idx
}

/// Runs the per-agent version of the virtual-queue method for `iterations`
/// synchronous rounds. In round `t` each source turns the prices `Y(t)`,
/// `Z(t)` into new rates `x(t)`, `y(t)` and updates its own queue; each link
/// then receives the rates on its paths, updates its queue and sends `Y(t+1)`.
pub fn simulate_decentralized(
    problem: &NumProblem,
    config: &DecentralizedConfig,
) -> Result<DecentralizedRun> {
    let topo = &problem.topology;
    let (nl, nk, ns) = (topo.links(), topo.paths(), topo.sources());
    let alpha = config.alpha;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidArgument(
            "iteration count must be at least 1".into(),
        ));
    }
    if config.x_init.len() != nk {
        return Err(Error::dim("x_init", nk, config.x_init.len()));
    }
    if config.y_init.len() != ns {
        return Err(Error::dim("y_init", ns, config.y_init.len()));
    }
    let inside = |v: &[f64], hi: &[f64]| v.iter().zip(hi).all(|(v, h)| (0.0..=*h).contains(v));
    if !inside(&config.x_init, &problem.x_max) || !inside(&config.y_init, &problem.y_max) {
        return Err(Error::InvalidArgument(
            "initial rates lie outside their boxes".into(),
        ));
    }
    let started = Instant::now();
    let program = build_num_program(problem)?;
    let mut rng = SplitMix64::seed_from_u64(match config.order {
        AgentOrder::Index => 0,
        AgentOrder::Shuffled(seed) => seed,
    });

    let mut x = config.x_init.clone();
    let mut y = config.y_init.clone();
    let link_excess =
        |l: usize, x: &[f64]| topo.link_paths(l).iter().map(|&k| x[k]).sum::<f64>() - topo.cap[l];
    let source_excess = |s: usize, x: &[f64], y: &[f64]| {
        y[s] - topo.source_paths(s).iter().map(|&k| x[k]).sum::<f64>()
    };

    // Q(0) = max{0, −g(z(−1))}, price = Q(0) + g(z(−1))
    let mut links: Vec<LinkAgent> = (0..nl)
        .map(|l| {
            let g = link_excess(l, &x);
            let queue = (-g).max(0.0);
            LinkAgent {
                queue,
                price: queue + g,
                excess: g,
            }
        })
        .collect();
    let mut sources: Vec<SourceAgent> = (0..ns)
        .map(|s| {
            let g = source_excess(s, &x, &y);
            let queue = (-g).max(0.0);
            SourceAgent {
                queue,
                price: queue + g,
                excess: g,
            }
        })
        .collect();

    let queues = |links: &[LinkAgent], sources: &[SourceAgent]| -> Vec<f64> {
        links
            .iter()
            .map(|a| a.queue)
            .chain(sources.iter().map(|a| a.queue))
            .collect()
    };
    let excesses = |links: &[LinkAgent], sources: &[SourceAgent]| -> Vec<f64> {
        links
            .iter()
            .map(|a| a.excess)
            .chain(sources.iter().map(|a| a.excess))
            .collect()
    };

    let z_init = [x.as_slice(), y.as_slice()].concat();
    let q_init = queues(&links, &sources);
    let g_init = excesses(&links, &sources);
    let stride = config
        .record_every
        .unwrap_or_else(|| default_stride(config.iterations));
    let mut recorder = Recorder::new(&program, config.iterations, stride);
    let mut z_bar = vec![0.0; nk + ns];
    let mut g_sum = vec![0.0; nl + ns];
    let mut messages = Vec::with_capacity(config.iterations);
    let mut min_link_price = links.iter().map(|a| a.price).fold(f64::INFINITY, f64::min);
    let mut min_source_price = sources
        .iter()
        .map(|a| a.price)
        .fold(f64::INFINITY, f64::min);
    let y_terms: Vec<Univariate> = (0..ns).map(|s| problem.y_term(s)).collect();

    for t in 0..config.iterations {
        let mut count = MessageCount::default();
        let q_before = queues(&links, &sources);
        let mut x_next = x.clone();
        let mut y_next = y.clone();

        // source phase
        for s in visit_order(ns, config.order, &mut rng) {
            let agent = &mut sources[s];
            for &k in topo.source_paths(s) {
                let path_price: f64 = topo.path_links(k).iter().map(|&l| links[l].price).sum();
                count.prices += topo.path_links(k).len();
                x_next[k] = (x[k] - (path_price - agent.price) / (2.0 * alpha))
                    .clamp(0.0, problem.x_max[k]);
            }
            let mut u = y_terms[s];
            u.quad += alpha;
            u.lin += agent.price - 2.0 * alpha * y[s];
            y_next[s] = oracles::minimize_univariate(
                &u,
                0.0,
                problem.y_max[s],
                ScalarMethod::ClosedForm,
                DEFAULT_SCALAR_TOL,
            )?;
            let g = source_excess(s, &x_next, &y_next);
            agent.queue = queue_update_scalar(agent.queue, g, ConstraintMode::Inequality);
            agent.price = agent.queue + g;
            agent.excess = g;
        }
        x = x_next;
        y = y_next;

        // link phase
        for l in visit_order(nl, config.order, &mut rng) {
            let agent = &mut links[l];
            count.rates += topo.link_paths(l).len();
            let g = link_excess(l, &x);
            agent.queue = queue_update_scalar(agent.queue, g, ConstraintMode::Inequality);
            agent.price = agent.queue + g;
            agent.excess = g;
        }
        messages.push(count);
        min_link_price = links.iter().map(|a| a.price).fold(min_link_price, f64::min);
        min_source_price = sources
            .iter()
            .map(|a| a.price)
            .fold(min_source_price, f64::min);

        let z = [x.as_slice(), y.as_slice()].concat();
        let g = excesses(&links, &sources);
        let q = queues(&links, &sources);
        let tf = t as f64;
        for (avg, zi) in z_bar.iter_mut().zip(&z) {
            *avg = *avg * (tf / (tf + 1.0)) + zi / (tf + 1.0);
        }
        for (acc, gi) in g_sum.iter_mut().zip(&g) {
            *acc += gi;
        }
        if recorder.wants(t + 1) {
            recorder.record(Snapshot {
                t: t + 1,
                x: &z,
                q: &q,
                g_x: &g,
                x_bar: &z_bar,
                g_sum: &g_sum,
                drift: DriftRecord::virtual_queue(t, &q_before, &q, &g),
            });
        }
    }

    let report = RunReport {
        algorithm: Algorithm::Decentralized,
        problem: program.name().to_string(),
        alpha: Some(alpha),
        gamma: None,
        iterations: config.iterations,
        record_every: recorder.stride(),
        modes: ConstraintMode::all_inequality(nl + ns),
        oracle: "agents".into(),
        x_init: z_init,
        g_init,
        q_init,
        rows: recorder.into_rows(),
        wall_time: started.elapsed(),
        warnings: Vec::new(),
    };
    Ok(DecentralizedRun {
        report,
        messages,
        min_link_price,
        min_source_price,
    })
}

/// Random connected-enough topology for tests and benchmarks: every path
/// uses 1 to 3 distinct links and every source owns at least one path.
pub fn random_problem(
    seed: u64,
    max_links: usize,
    max_paths: usize,
    max_sources: usize,
) -> NumProblem {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let nl = rng.random_range(1..=max_links.max(1));
    let ns = rng.random_range(1..=max_sources.max(1).min(max_paths.max(1)));
    let nk = rng.random_range(ns..=max_paths.max(ns));
    let mut owners: Vec<usize> = (0..ns).collect();
    owners.extend((ns..nk).map(|_| rng.random_range(0..ns)));
    owners.shuffle(&mut rng);
    let all_links: Vec<usize> = (0..nl).collect();
    let paths = owners
        .into_iter()
        .map(|s| {
            let hops = rng.random_range(1..=nl.min(3));
            (
                s,
                all_links.choose_multiple(&mut rng, hops).copied().collect(),
            )
        })
        .collect();
    let cap = (0..nl).map(|_| rng.random_range(0.5..2.0)).collect();
    let topology = Topology::new(cap, paths).expect("generated topology is valid");
    let weights = (0..ns).map(|_| rng.random_range(0.5..3.0)).collect();
    let x_max = vec![2.0; nk];
    let y_max = vec![3.0; ns];
    NumProblem::new(topology, weights, x_max, y_max).expect("generated problem is valid")
}

/// Max-abs gap between two traces over the recorded iterates and queues.
pub fn trace_gap(a: &RunReport, b: &RunReport) -> Result<f64> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::dim("trace rows", a.rows.len(), b.rows.len()));
    }
    let mut gap = 0.0f64;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.t != rb.t {
            return Err(Error::InvalidArgument(format!(
                "rows at t = {} and t = {}",
                ra.t, rb.t
            )));
        }
        gap = gap
            .max(linalg::max_abs_diff(&ra.x, &rb.x))
            .max(linalg::max_abs_diff(&ra.q, &rb.q));
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{run, RunConfig};

    fn tiny() -> NumProblem {
        NumProblem::new(
            Topology::new(vec![1.0], vec![(0, vec![0])]).unwrap(),
            vec![1.0],
            vec![2.0],
            vec![3.0],
        )
        .unwrap()
    }

    #[test]
    fn tiny_program_constraints() {
        let p = build_num_program(&tiny()).unwrap();
        assert_eq!((p.n(), p.m()), (2, 2));
        // x ≤ 1 and y ≤ x
        assert_eq!(p.constraint_values(&[0.5, 0.25]), vec![-0.5, -0.25]);
        assert_eq!(beta_bounds(&tiny().topology).0, 3f64.sqrt());
    }

    #[test]
    fn transposed_incidence() {
        let p = random_problem(3, 6, 6, 3);
        let t = &p.topology;
        for l in 0..t.links() {
            for k in 0..t.paths() {
                assert_eq!(t.link_paths(l).contains(&k), t.path_links(k).contains(&l));
            }
        }
    }

    #[test]
    fn rejects_malformed_topologies() {
        assert!(Topology::new(vec![1.0], vec![(0, vec![1])]).is_err());
        assert!(Topology::new(vec![0.0], vec![(0, vec![0])]).is_err());
        assert!(Topology::new(vec![1.0], vec![(1, vec![0])]).is_err());
        assert!(Topology::new(vec![1.0, 1.0], vec![(0, vec![])]).is_err());
    }

    #[test]
    fn zero_weight_source_gets_no_rate() {
        let topo = Topology::new(vec![1.0], vec![(0, vec![0]), (1, vec![0])]).unwrap();
        let p = NumProblem::new(topo, vec![1.0, 0.0], vec![2.0; 2], vec![3.0; 2]).unwrap();
        let prog = build_num_program(&p).unwrap();
        let r = run(&prog, &[0.0; 4], &RunConfig::new(5.0, 20_000)).unwrap();
        let z = &r.last().unwrap().x_bar;
        assert!(z[3] < 1e-2, "{z:?}");
        assert!((z[2] - 1.0).abs() < 1e-2, "{z:?}");
    }

    #[test]
    fn matches_centralized_run_on_tiny_instance() {
        let p = tiny();
        let prog = build_num_program(&p).unwrap();
        let central = run(
            &prog,
            &[0.0, 0.0],
            &RunConfig::new(2.0, 300).record_every(1),
        )
        .unwrap();
        let mut cfg = DecentralizedConfig::new(&p, 2.0, 300);
        cfg.record_every = Some(1);
        let dec = simulate_decentralized(&p, &cfg).unwrap();
        assert!(trace_gap(&central, &dec.report).unwrap() < 1e-9);
        assert!(dec.messages.iter().all(|m| *m
            == MessageCount {
                prices: 1,
                rates: 1
            }));
    }

    #[test]
    fn topology_file_round_trip() {
        let p = random_problem(11, 5, 5, 2);
        let text = serde_json::to_string(&TopologyFile::from_problem(&p)).unwrap();
        assert_eq!(
            TopologyFile::parse(&text).unwrap().into_problem().unwrap(),
            p
        );
    }
}
