use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qpush_core::baseline::dsg_run;
use qpush_core::netflow::{self, DecentralizedConfig, NumProblem, TopologyFile};
use qpush_core::oracles::PrimalOracle;
use qpush_core::problems::{self, ProblemId};
use qpush_core::program::{ConvexProgram, ProblemFile};
use qpush_core::report::{read_trace_csv, RunReport, TraceRow};
use qpush_core::solver::{
    self, BoundReference, BoundReport, BoundViolation, RunConfig, RunFailure,
};

use crate::args::{
    Algo, AlphaChoice, BenchArgs, Cli, Command, OutputArgs, PlotArgs, ProblemArgs, RunArgs,
    SolveArgs, VerifyArgs,
};
use crate::plot;
use crate::CliError;

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run_command(&args).map(|_| ()),
        Command::Verify(args) => verify_command(&args).map(|_| ()),
        Command::Bench(args) => bench_command(&args).map(|_| ()),
        Command::Plot(args) => plot_command(&args).map(|_| ()),
    }
}

/// A program plus whatever is known about its solution.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub label: String,
    pub program: ConvexProgram,
    pub x_init: Vec<f64>,
    /// Optimal value in minimization form.
    pub f_star: Option<f64>,
    pub reference: Option<BoundReference>,
    pub network: Option<NumProblem>,
}

pub fn load_problem(args: &ProblemArgs) -> Result<Loaded, CliError> {
    let mut loaded = if let Some(name) = &args.problem {
        let mut id: ProblemId = name.parse()?;
        match (&mut id, args.seed) {
            (ProblemId::Qp { seed }, Some(s)) => *seed = s,
            (_, Some(_)) => {
                return Err(CliError::Config(
                    "--seed only applies to the qp problem".into(),
                ))
            }
            _ => {}
        }
        let inst = problems::lookup(id);
        let f_star = inst
            .known_optimum
            .map(|v| inst.program.reported_objective(v));
        Loaded {
            label: id.to_string(),
            f_star,
            reference: inst.reference,
            network: inst.network,
            x_init: inst.x_init,
            program: inst.program,
        }
    } else if let Some(path) = &args.problem_file {
        let program = ProblemFile::load(path)?
            .into_program()?
            .with_name(path.display().to_string());
        Loaded {
            label: path.display().to_string(),
            x_init: vec![0.0; program.n()],
            program,
            f_star: None,
            reference: None,
            network: None,
        }
    } else if let Some(path) = &args.topology {
        let problem = TopologyFile::load(path)?.into_problem()?;
        let program = netflow::build_num_program(&problem)?.with_name(path.display().to_string());
        Loaded {
            label: path.display().to_string(),
            x_init: vec![0.0; program.n()],
            program,
            f_star: None,
            reference: None,
            network: Some(problem),
        }
    } else {
        return Err(CliError::Config(
            "one of --problem, --problem-file or --topology is required".into(),
        ));
    };
    if let Some(path) = &args.x_init {
        let x: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
        if x.len() != loaded.program.n() {
            return Err(CliError::Config(format!(
                "--x-init has {} entries, the problem has {} variables",
                x.len(),
                loaded.program.n()
            )));
        }
        loaded.x_init = x;
    }
    Ok(loaded)
}

/// `β`, and for network problems the two topology bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimates {
    pub beta: Option<f64>,
    pub hop_bound: Option<f64>,
    pub loose_bound: Option<f64>,
    /// `(K + S + Σ_k |E_k|)/2 + 1`, the penalty from the hop bound.
    pub alpha_hop: Option<f64>,
}

pub fn beta_estimates(loaded: &Loaded) -> BetaEstimates {
    let beta = loaded.program.beta().ok();
    let (hop, loose) = match &loaded.network {
        Some(n) if loaded.program.m() == n.topology.links() + n.topology.sources() => {
            let (h, l) = netflow::beta_bounds(&n.topology);
            (Some(h), Some(l))
        }
        _ => (None, None),
    };
    BetaEstimates {
        beta,
        hop_bound: hop,
        loose_bound: loose,
        alpha_hop: hop.map(|h| 0.5 * h * h + 1.0),
    }
}

pub fn resolve_alpha(choice: AlphaChoice, betas: &BetaEstimates) -> Result<f64, CliError> {
    match choice {
        AlphaChoice::Value(v) => Ok(v),
        AlphaChoice::Auto => betas.beta.map(|b| 0.5 * b * b + 1.0).ok_or_else(|| {
            CliError::Config("--alpha auto needs a Lipschitz modulus for the constraints".into())
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub passed: bool,
    pub violations: usize,
    pub constant: Option<f64>,
    pub first_violation: Option<BoundViolation>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageSummary {
    pub rounds: usize,
    pub prices_per_round: usize,
    pub rates_per_round: usize,
    pub min_link_price: f64,
    pub min_source_price: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub algorithm: String,
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub alpha_rule: Option<String>,
    pub gamma: Option<f64>,
    pub betas: BetaEstimates,
    /// `f(x̄(T))` in the problem's own sense (utility for maximizations).
    pub final_objective: f64,
    /// `f(x̄(T))` of the minimization form stored in the trace.
    pub final_objective_min: f64,
    /// Optimal value of the minimization form, when known.
    pub f_star: Option<f64>,
    pub objective_error: Option<f64>,
    /// `max_k g_k(x̄(T))`, negative when strictly feasible.
    pub max_violation: f64,
    pub queue_norm: f64,
    pub record_every: usize,
    pub rows: usize,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub invariant_violations: Option<usize>,
    pub bounds: Option<BoundsSummary>,
    pub messages: Option<MessageSummary>,
}

struct Outcome {
    report: RunReport,
    messages: Option<MessageSummary>,
}

fn solve(loaded: &Loaded, solve: &SolveArgs, alpha: Option<f64>) -> Result<Outcome, RunFailure> {
    let report = match (solve.algo, solve.agents) {
        (Algo::Vq, false) => {
            let mut cfg = RunConfig::new(alpha.expect("resolved for vq"), solve.iterations);
            cfg.record_every = solve.record_every;
            solver::run(&loaded.program, &loaded.x_init, &cfg)?
        }
        (Algo::Vq, true) => {
            let problem = loaded
                .network
                .as_ref()
                .filter(|n| loaded.program.m() == n.topology.links() + n.topology.sources());
            let Some(problem) = problem else {
                return Err(qpush_core::Error::Config(
                    "--agents needs a fixed-capacity network problem".into(),
                )
                .into());
            };
            let k = problem.topology.paths();
            let mut cfg = DecentralizedConfig::new(
                problem,
                alpha.expect("resolved for vq"),
                solve.iterations,
            );
            cfg.x_init = loaded.x_init[..k].to_vec();
            cfg.y_init = loaded.x_init[k..].to_vec();
            cfg.record_every = solve.record_every;
            let run = netflow::simulate_decentralized(problem, &cfg)?;
            let first = run.messages.first().copied().unwrap_or_default();
            let mut report = run.report;
            report.problem = loaded.program.name().to_string();
            return Ok(Outcome {
                report,
                messages: Some(MessageSummary {
                    rounds: run.messages.len(),
                    prices_per_round: first.prices,
                    rates_per_round: first.rates,
                    min_link_price: run.min_link_price,
                    min_source_price: run.min_source_price,
                }),
            });
        }
        (Algo::Dsg, false) => dsg_run(
            &loaded.program,
            &loaded.x_init,
            solve.gamma,
            solve.iterations,
            solve.record_every,
            &PrimalOracle::default(),
        )?,
        (Algo::Dsg, true) => {
            return Err(qpush_core::Error::Config(
                "--agents runs the virtual-queue method only".into(),
            )
            .into())
        }
    };
    Ok(Outcome {
        report,
        messages: None,
    })
}

fn write_trace(
    dir: &Path,
    report: &RunReport,
    bounds: Option<&BoundReport>,
) -> Result<PathBuf, CliError> {
    let path = dir.join("trace.csv");
    report.write_csv(fs::File::create(&path)?, bounds)?;
    Ok(path)
}

fn summarize(
    loaded: &Loaded,
    report: &RunReport,
    betas: BetaEstimates,
    alpha_rule: Option<String>,
    f_star: Option<f64>,
) -> Summary {
    let last: Option<&TraceRow> = report.last();
    let f_min = last.map_or(f64::NAN, |r| r.f_xbar);
    Summary {
        problem: loaded.label.clone(),
        algorithm: report.algorithm.label().into(),
        iterations: report.iterations,
        alpha: report.alpha,
        alpha_rule,
        gamma: report.gamma,
        betas,
        final_objective: loaded.program.reported_objective(f_min),
        final_objective_min: f_min,
        f_star,
        objective_error: f_star.map(|fs| (f_min - fs).abs()),
        max_violation: last.map_or(f64::NAN, |r| r.max_constraint()),
        queue_norm: last.map_or(f64::NAN, |r| r.queue_norm()),
        record_every: report.record_every,
        rows: report.rows.len(),
        wall_time_s: report.wall_time.as_secs_f64(),
        warnings: report.warnings.clone(),
        invariant_violations: None,
        bounds: None,
        messages: None,
    }
}

/// Which reference to check the bounds against, if any.
enum BoundsRequest {
    None,
    Builtin,
    File(PathBuf),
}

fn solve_and_write(
    problem: &ProblemArgs,
    solve_args: &SolveArgs,
    output: &OutputArgs,
    request: BoundsRequest,
    slack: f64,
) -> Result<Summary, CliError> {
    let loaded = load_problem(problem)?;
    let betas = beta_estimates(&loaded);
    let (alpha, alpha_rule) = match solve_args.algo {
        Algo::Vq => {
            let a = resolve_alpha(solve_args.alpha, &betas)?;
            (Some(a), Some(solve_args.alpha.to_string()))
        }
        Algo::Dsg => (None, None),
    };
    if let (AlphaChoice::Auto, Some(a)) = (solve_args.alpha, alpha) {
        println!("alpha = beta^2/2 + 1 = {a}");
        if let Some(h) = betas.alpha_hop {
            println!("hop-bound penalty (K + S + sum_k |E_k|)/2 + 1 = {h}");
        }
    }
    let reference = match request {
        BoundsRequest::None => None,
        BoundsRequest::Builtin => Some(loaded.reference.clone().ok_or_else(|| {
            CliError::Config(format!(
                "no bundled reference for '{}'; pass a reference file",
                loaded.label
            ))
        })?),
        BoundsRequest::File(path) => Some(BoundReference::load(path)?),
    };
    if reference.is_some() && solve_args.algo != Algo::Vq {
        return Err(CliError::Config("bound checks apply to --algo vq".into()));
    }
    let f_star = loaded.f_star.or(reference.as_ref().map(|r| r.f_star));

    let dir = &output.out;
    fs::create_dir_all(dir)?;
    let outcome = match solve(&loaded, solve_args, alpha) {
        Ok(o) => o,
        Err(failure) => {
            if let Some(partial) = &failure.partial {
                write_trace(dir, partial, None)?;
                eprintln!(
                    "partial trace with {} rows written to {}",
                    partial.rows.len(),
                    dir.display()
                );
            }
            return Err(failure.into());
        }
    };
    let report = &outcome.report;

    let bounds = reference
        .as_ref()
        .map(|r| solver::verify_bounds(&loaded.program, report, r, slack))
        .transpose()?;
    let trace_path = write_trace(dir, report, bounds.as_ref())?;
    if let Some(b) = &bounds {
        b.write_csv(fs::File::create(dir.join("bounds.csv"))?)?;
    }
    if output.full_trace {
        report.write_full_trace_csv(fs::File::create(dir.join("trace_full.csv"))?)?;
    }

    let mut summary = summarize(&loaded, report, betas, alpha_rule, f_star);
    summary.messages = outcome.messages;
    if report.algorithm != qpush_core::Algorithm::DualSubgradient {
        summary.invariant_violations =
            Some(solver::check_invariants(&loaded.program, report).len());
    }
    summary.bounds = bounds.as_ref().map(|b| BoundsSummary {
        passed: b.passed(),
        violations: b.violations.len(),
        constant: b.constant,
        first_violation: b.violations.first().cloned(),
        skipped: b.skipped.clone(),
    });
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    if output.plot {
        let rows = read_trace_csv(fs::File::open(&trace_path)?)?;
        fs::write(
            dir.join("convergence.svg"),
            plot::convergence_svg(&rows, None, summary.f_star),
        )?;
    }
    print_summary(&summary, dir);

    if let Some(b) = &bounds {
        if !b.passed() {
            let v = &b.violations[0];
            return Err(CliError::BoundViolation(format!(
                "{} bound violation(s); first at t = {} ({:?}, residual {:e})",
                b.violations.len(),
                v.t,
                v.kind,
                v.residual
            )));
        }
    }
    Ok(summary)
}

fn print_summary(s: &Summary, dir: &Path) {
    println!("problem        {}", s.problem);
    println!("algorithm      {} (T = {})", s.algorithm, s.iterations);
    if let Some(a) = s.alpha {
        println!("alpha          {a}");
    }
    if let Some(g) = s.gamma {
        println!("gamma          {g}");
    }
    if let Some(b) = s.betas.beta {
        println!("beta           {b}");
    }
    println!("f(x_bar)       {}", s.final_objective);
    if let Some(e) = s.objective_error {
        println!("|f - f*|       {e:e}");
    }
    println!("max g(x_bar)   {:e}", s.max_violation);
    println!("|Q(T)|         {}", s.queue_norm);
    if let Some(b) = &s.bounds {
        println!(
            "bounds         {} ({} violations)",
            if b.passed { "pass" } else { "FAIL" },
            b.violations
        );
    }
    if let Some(m) = &s.messages {
        println!(
            "messages/round {} prices, {} rates",
            m.prices_per_round, m.rates_per_round
        );
    }
    println!("output         {}", dir.display());
}

pub fn run_command(args: &RunArgs) -> Result<Summary, CliError> {
    let request = match args.verify_bounds.as_deref() {
        None => BoundsRequest::None,
        Some("") => BoundsRequest::Builtin,
        Some(path) => BoundsRequest::File(path.into()),
    };
    solve_and_write(&args.problem, &args.solve, &args.output, request, 1e-9)
}

pub fn verify_command(args: &VerifyArgs) -> Result<Summary, CliError> {
    let request = match &args.reference {
        Some(path) => BoundsRequest::File(path.clone()),
        None => BoundsRequest::Builtin,
    };
    solve_and_write(
        &args.problem,
        &args.solve,
        &args.output,
        request,
        args.slack,
    )
}

/// One line of the bench table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub t: usize,
    pub vq_objective: f64,
    pub dsg_objective: f64,
    pub vq_error: Option<f64>,
    pub dsg_error: Option<f64>,
    pub vq_violation: f64,
    pub dsg_violation: f64,
}

fn row_at_or_before(report: &RunReport, t: usize) -> Option<&TraceRow> {
    let idx = report.rows.partition_point(|r| r.t <= t);
    idx.checked_sub(1).map(|i| &report.rows[i])
}

pub fn bench_command(args: &BenchArgs) -> Result<Vec<BenchRow>, CliError> {
    let loaded = load_problem(&args.problem)?;
    let betas = beta_estimates(&loaded);
    let alpha = resolve_alpha(args.alpha, &betas)?;
    let t_max = args.iterations;
    let oracle = PrimalOracle::default();
    let (vq, dsg) = std::thread::scope(|s| {
        let vq = s.spawn(|| {
            solver::run(
                &loaded.program,
                &loaded.x_init,
                &RunConfig::new(alpha, t_max),
            )
        });
        let dsg = s.spawn(|| {
            dsg_run(
                &loaded.program,
                &loaded.x_init,
                args.gamma,
                t_max,
                None,
                &oracle,
            )
        });
        (
            vq.join().expect("vq worker panicked"),
            dsg.join().expect("dsg worker panicked"),
        )
    });
    let (vq, dsg) = (vq?, dsg?);

    let mut checkpoints: Vec<usize> = std::iter::successors(Some(1usize), |t| t.checked_mul(10))
        .take_while(|t| *t < t_max)
        .collect();
    checkpoints.push(t_max);
    let reported = |f: f64| loaded.program.reported_objective(f);
    let rows: Vec<BenchRow> = checkpoints
        .into_iter()
        .filter_map(|t| {
            let a = row_at_or_before(&vq, t)?;
            let b = row_at_or_before(&dsg, t)?;
            Some(BenchRow {
                t: a.t,
                vq_objective: reported(a.f_xbar),
                dsg_objective: reported(b.f_xbar),
                vq_error: loaded.f_star.map(|fs| (a.f_xbar - fs).abs()),
                dsg_error: loaded.f_star.map(|fs| (b.f_xbar - fs).abs()),
                vq_violation: a.max_constraint(),
                dsg_violation: b.max_constraint(),
            })
        })
        .collect();

    fs::create_dir_all(&args.out)?;
    let mut w = csv::Writer::from_path(args.out.join("bench.csv"))
        .map_err(|e| CliError::Config(e.to_string()))?;
    for r in &rows {
        w.serialize(r)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    w.flush()?;
    let vq_path = args.out.join("trace_vq.csv");
    let dsg_path = args.out.join("trace_dsg.csv");
    vq.write_csv(fs::File::create(&vq_path)?, None)?;
    dsg.write_csv(fs::File::create(&dsg_path)?, None)?;
    let vq_rows = read_trace_csv(fs::File::open(&vq_path)?)?;
    let dsg_rows = read_trace_csv(fs::File::open(&dsg_path)?)?;
    fs::write(
        args.out.join("bench.svg"),
        plot::convergence_svg(&vq_rows, Some(&dsg_rows), loaded.f_star),
    )?;

    println!(
        "{} | vq alpha = {alpha} | dsg gamma = {}",
        loaded.label, args.gamma
    );
    println!(
        "{:>9}  {:>14}  {:>14}  {:>11}  {:>11}  {:>11}  {:>11}",
        "t", "vq f", "dsg f", "vq err", "dsg err", "vq viol", "dsg viol"
    );
    let fmt_err = |e: Option<f64>| e.map_or("-".to_string(), |e| format!("{e:.3e}"));
    for r in &rows {
        println!(
            "{:>9}  {:>14.8}  {:>14.8}  {:>11}  {:>11}  {:>11.3e}  {:>11.3e}",
            r.t,
            r.vq_objective,
            r.dsg_objective,
            fmt_err(r.vq_error),
            fmt_err(r.dsg_error),
            r.vq_violation,
            r.dsg_violation
        );
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct SummaryOptimum {
    f_star: Option<f64>,
}

pub fn plot_command(args: &PlotArgs) -> Result<PathBuf, CliError> {
    let rows = read_trace_csv(fs::File::open(&args.trace)?)?;
    let overlay = args
        .overlay
        .as_ref()
        .map(|p| -> Result<_, CliError> { Ok(read_trace_csv(fs::File::open(p)?)?) })
        .transpose()?;
    let dir = args.trace.parent().unwrap_or(Path::new("."));
    let f_star = match args.f_star {
        Some(v) => Some(v),
        None => {
            let path = dir.join("summary.json");
            if path.exists() {
                serde_json::from_str::<SummaryOptimum>(&fs::read_to_string(path)?)?.f_star
            } else {
                None
            }
        }
    };
    let out = args
        .output
        .clone()
        .unwrap_or_else(|| dir.join("convergence.svg"));
    fs::write(
        &out,
        plot::convergence_svg(&rows, overlay.as_deref(), f_star),
    )?;
    println!("wrote {}", out.display());
    Ok(out)
}
