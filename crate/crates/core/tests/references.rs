use qpush_core::linalg::Matrix;
use qpush_core::problems::{
    fig1_num_program, fig1_num_reference, generate_qp, FIG1_BETA, FIG1_NUM_OPTIMUM,
};
use qpush_core::program::spectral_norm;

#[test]
fn fig1_reference_satisfies_kkt() {
    let r = fig1_num_reference();
    let p = fig1_num_program();
    assert!(r.kkt_residual(&p).unwrap() < 1e-8);
    assert!((p.reported_objective(r.f_star) - FIG1_NUM_OPTIMUM).abs() < 1e-5);
    assert!((p.reported_objective(p.objective_value(&r.x_star)) - FIG1_NUM_OPTIMUM).abs() < 1e-5);
}

#[test]
fn qp_reference_satisfies_kkt() {
    let qp = generate_qp(1);
    let r = qp.reference_solution();
    assert!(r.kkt_residual(&qp.program()).unwrap() < 1e-8);
}

#[test]
fn spectral_norm_examples() {
    let diag = Matrix::from_diag(&[3.0, 1.0]);
    assert!((spectral_norm(&diag).unwrap().value - 3.0).abs() < 1e-9);
    let ones = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    assert!((spectral_norm(&ones).unwrap().value - 2.0).abs() < 1e-9);
    assert!((fig1_num_reference().beta - FIG1_BETA).abs() < 1e-3);
}
