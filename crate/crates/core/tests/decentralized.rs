use proptest::prelude::*;
use qpush_core::netflow::{
    beta_bounds, build_num_program, random_problem, simulate_decentralized, trace_gap, AgentOrder,
    DecentralizedConfig, MessageCount, NumProblem, TopologyFile,
};
use qpush_core::problems::{fig1_problem, FIG1_ALPHA};
use qpush_core::program::{frobenius_bound, spectral_norm};
use qpush_core::solver::{run, RunConfig};

fn centralized_gap(problem: &NumProblem, alpha: f64, iterations: usize) -> f64 {
    let program = build_num_program(problem).unwrap();
    let z0 = vec![0.0; program.n()];
    let central = run(
        &program,
        &z0,
        &RunConfig::new(alpha, iterations).record_every(1),
    )
    .unwrap();
    let mut cfg = DecentralizedConfig::new(problem, alpha, iterations);
    cfg.record_every = Some(1);
    let dec = simulate_decentralized(problem, &cfg).unwrap();
    trace_gap(&central, &dec.report).unwrap()
}

#[test]
fn fig1_agents_match_centralized_run() {
    let gap = centralized_gap(&fig1_problem(), FIG1_ALPHA, 1000);
    assert!(gap <= 1e-9, "gap {gap:e}");
}

#[test]
fn fig1_initial_prices_are_zero() {
    let p = fig1_problem();
    let run = simulate_decentralized(&p, &DecentralizedConfig::new(&p, FIG1_ALPHA, 1)).unwrap();
    let r = &run.report;
    assert_eq!(&r.q_init[..9], &[1.0; 9]);
    assert_eq!(&r.q_init[9..], &[0.0; 3]);
    for (q, g) in r.q_init.iter().zip(&r.g_init) {
        assert_eq!(q + g, 0.0);
    }
}

#[test]
fn message_counts_match_incidences() {
    let p = fig1_problem();
    let run = simulate_decentralized(&p, &DecentralizedConfig::new(&p, FIG1_ALPHA, 50)).unwrap();
    let hops = p.topology.hops();
    assert_eq!(hops, 12);
    assert_eq!(run.messages.len(), 50);
    assert!(run.messages.iter().all(|m| *m
        == MessageCount {
            prices: hops,
            rates: hops
        }));
}

#[test]
fn prices_stay_nonnegative() {
    let p = fig1_problem();
    let run = simulate_decentralized(&p, &DecentralizedConfig::new(&p, FIG1_ALPHA, 5000)).unwrap();
    assert!(run.min_link_price >= -1e-12, "{}", run.min_link_price);
    assert!(run.min_source_price >= -1e-12, "{}", run.min_source_price);
}

#[test]
fn agent_order_does_not_matter() {
    let p = random_problem(42, 10, 8, 4);
    let mut cfg = DecentralizedConfig::new(&p, 6.0, 300);
    cfg.record_every = Some(1);
    let ordered = simulate_decentralized(&p, &cfg).unwrap();
    cfg.order = AgentOrder::Shuffled(9);
    let shuffled = simulate_decentralized(&p, &cfg).unwrap();
    assert_eq!(trace_gap(&ordered.report, &shuffled.report).unwrap(), 0.0);
}

#[test]
fn bundled_fixture_is_the_example_network() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig1.json");
    assert_eq!(
        TopologyFile::load(path).unwrap().into_problem().unwrap(),
        fig1_problem()
    );
}

#[test]
fn fig1_beta_bounds() {
    let t = fig1_problem().topology;
    let a = t.stacked_matrix();
    let (hop, loose) = beta_bounds(&t);
    assert_eq!(hop, 22f64.sqrt());
    assert!((loose - 73f64.sqrt()).abs() < 1e-15);
    assert!((frobenius_bound(&a) - hop).abs() < 1e-12);
    assert!(spectral_norm(&a).unwrap().value <= hop + 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    #[test]
    fn random_topologies_match_centralized_run(seed in any::<u64>()) {
        let p = random_problem(seed, 10, 8, 4);
        let (hop, loose) = beta_bounds(&p.topology);
        prop_assert!(hop <= loose);
        let beta = spectral_norm(&p.topology.stacked_matrix()).unwrap().value;
        prop_assert!(beta <= hop + 1e-9);
        let gap = centralized_gap(&p, 0.5 * beta * beta + 1.0, 1000);
        prop_assert!(gap <= 1e-9, "gap {:e}", gap);
    }
}
