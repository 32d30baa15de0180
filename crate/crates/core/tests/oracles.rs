use proptest::prelude::*;
use qpush_core::linalg;
use qpush_core::oracles::{PrimalOracle, Route, Subproblem};
use qpush_core::problems::{
    fig1_flow_power_program, generate_qp, qp_coordinate_update, random_separable_program,
    FIG1_FLOW_POWER_BETA,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

fn unit_draws(rng: &mut SplitMix64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| rng.random_range(l..=h))
        .collect()
}

#[test]
fn three_oracles_agree_on_random_subproblems() {
    let closed = PrimalOracle::default();
    let bisect = PrimalOracle::bisection_only();
    let pg = PrimalOracle::with_route(Route::ProjectedGradient);
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (program, _, alpha) = random_separable_program(seed, 20, 5);
        let mut rng = SplitMix64::seed_from_u64(seed ^ 0xA5A5);
        let b = program.bounds();
        let x_prev = unit_draws(&mut rng, &b.lo, &b.hi);
        let w: Vec<f64> = (0..program.m())
            .map(|_| rng.random_range(0.0..5.0))
            .collect();
        let sub = Subproblem::new(&program, &w, &x_prev, alpha).unwrap();
        let a = closed.solve(&sub).unwrap();
        let c = bisect.solve(&sub).unwrap();
        let d = pg.solve(&sub).unwrap();
        worst = worst
            .max(linalg::max_abs_diff(&a, &c))
            .max(linalg::max_abs_diff(&a, &d));
    }
    assert!(worst <= 1e-6, "max disagreement {worst:e}");
}

#[test]
fn qp_coordinate_rule_matches_projected_gradient() {
    let qp = generate_qp(1);
    let program = qp.program();
    let pg = PrimalOracle::with_route(Route::ProjectedGradient);
    let mut rng = SplitMix64::seed_from_u64(3);
    for _ in 0..20 {
        let w = rng.random_range(0.0..10.0);
        let alpha = rng.random_range(0.5..5.0);
        let x_prev: Vec<f64> = (0..qp.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        let closed: Vec<f64> = (0..qp.dim())
            .map(|i| qp_coordinate_update(&qp, i, w, alpha, x_prev[i]))
            .collect();
        let ws = [w];
        let sub = Subproblem::new(&program, &ws, &x_prev, alpha).unwrap();
        let x = pg.solve(&sub).unwrap();
        assert!(linalg::max_abs_diff(&closed, &x) <= 1e-7);
    }
}

#[test]
fn flow_power_beta() {
    let beta = fig1_flow_power_program().beta_hint().unwrap();
    assert!((beta - FIG1_FLOW_POWER_BETA).abs() <= 1e-3, "{beta}");
}

#[test]
fn flow_power_beta_dominates_empirical_lipschitz_ratio() {
    let p = fig1_flow_power_program();
    let beta = p.beta_hint().unwrap();
    let b = p.bounds();
    let mut rng = SplitMix64::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let z1 = unit_draws(&mut rng, &b.lo, &b.hi);
        let z2 = unit_draws(&mut rng, &b.lo, &b.hi);
        let dg = linalg::dist(&p.constraint_values(&z1), &p.constraint_values(&z2));
        worst = worst.max(dg / linalg::dist(&z1, &z2));
    }
    assert!(worst <= beta, "{worst} > {beta}");
}

proptest! {
    #[test]
    fn flow_power_constraints_are_convex(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let p = fig1_flow_power_program();
        let b = p.bounds();
        let mut rng = SplitMix64::seed_from_u64(seed);
        let z1 = unit_draws(&mut rng, &b.lo, &b.hi);
        let z2 = unit_draws(&mut rng, &b.lo, &b.hi);
        let mid: Vec<f64> = z1.iter().zip(&z2).map(|(a, c)| theta * a + (1.0 - theta) * c).collect();
        let (g1, g2, gm) = (p.constraint_values(&z1), p.constraint_values(&z2), p.constraint_values(&mid));
        for k in 0..p.m() {
            prop_assert!(gm[k] <= theta * g1[k] + (1.0 - theta) * g2[k] + 1e-9);
        }
    }
}
