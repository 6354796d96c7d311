use super::*;
use crate::paths::{phi_star, Magnetization, SymmetricPath};
use approx::assert_abs_diff_eq;

fn sym(m: &[f64], q: &[f64], kappa: usize) -> DiscretePath {
    SymmetricPath::new(m.to_vec(), q.to_vec()).unwrap().to_discrete(kappa).unwrap()
}

fn quad(n: usize) -> EvalSettings {
    EvalSettings::default().with_method(Method::Quadrature).with_nodes(n)
}

fn lse(v: &[f64]) -> f64 {
    v.iter().map(|x| x.exp()).sum::<f64>().ln()
}

#[test]
fn zero_spec_gives_log_sum_exp() {
    let spec = CovarianceSpec::zero(3);
    let path = sym(&[0.3, 0.7, 1.0], &[0.2, 0.5, 1.0], 3);
    let lam = [0.3, -1.0, 2.0];
    for method in [Method::Auto, Method::Quadrature, Method::MonteCarlo, Method::Grid] {
        let v = eval_p1(&spec, &path, &lam, &EvalSettings::default().with_method(method)).unwrap();
        assert_abs_diff_eq!(v.value, lse(&lam), epsilon = 1e-14);
        assert!(v.error_estimate <= 1e-14);
    }
}

#[test]
fn zero_spec_p_is_log_kappa() {
    let v = eval_p(&CovarianceSpec::zero(3), &DiscretePath::constant_terminal(Magnetization::balanced(3)), &[0.0; 3], &EvalSettings::default()).unwrap();
    assert_abs_diff_eq!(v.value, 3f64.ln(), epsilon = 1e-15);
}

#[test]
fn p2_examples() {
    let potts = CovarianceSpec::potts(2, 1.0);
    let d = Magnetization::balanced(2);
    assert_eq!(eval_p2(&potts, &DiscretePath::constant_terminal(d.clone())).unwrap(), 0.0);
    assert_eq!(eval_p2(&CovarianceSpec::zero(2), &sym(&[0.5, 1.0], &[0.5, 1.0], 2)).unwrap(), 0.0);
    let path = sym(&[0.5, 1.0], &[0.5, 1.0], 2);
    let th = |g: &Matrix| potts.eval_vartheta(g).unwrap();
    let expected = -0.5 * 0.5 * (th(&d.diag()) - th(&phi_star(0.5, 2).unwrap()));
    assert_abs_diff_eq!(eval_p2(&potts, &path).unwrap(), expected, epsilon = 1e-15);
    let open = DiscretePath::new(vec![1.0], vec![phi_star(0.5, 2).unwrap()], d).unwrap();
    assert!(eval_p2(&potts, &open).is_err());
}

#[test]
fn reduction_matches_full_evaluation() {
    let spec = CovarianceSpec::potts(3, 0.8);
    let path = sym(&[0.4, 1.0], &[0.3, 1.0], 3);
    let lam = [0.1, -0.2, 0.0];
    let reduced = eval_p1(&spec, &path, &lam, &quad(16)).unwrap();
    let full = eval_p1(&spec, &path, &lam, &EvalSettings { reduce: false, ..quad(16) }).unwrap();
    assert!((reduced.value - full.value).abs() < 1e-9, "{} vs {}", reduced.value, full.value);
}

#[test]
fn high_temperature_replica_symmetric_value() {
    // q_1 = 0 and m_1 → 1 gives log 2 + β²/8
    for beta in [0.3, 0.7] {
        let spec = CovarianceSpec::potts(2, beta);
        let path = sym(&[1.0 - 1e-9, 1.0], &[0.0, 1.0], 2);
        let v = eval_p(&spec, &path, &[0.0, 0.0], &quad(40)).unwrap();
        assert_abs_diff_eq!(v.value, 2f64.ln() + beta * beta / 8.0, epsilon = 1e-8);
    }
}

#[test]
fn gauge_shift_moves_p_by_constant() {
    let spec = CovarianceSpec::potts(3, 1.2);
    let path = sym(&[0.5, 1.0], &[0.4, 1.0], 3);
    let lam = [0.2, -0.1, 0.4];
    let base = eval_p(&spec, &path, &lam, &quad(12)).unwrap().value;
    for c in [-1.0, 2.5] {
        let shifted: Vec<f64> = lam.iter().map(|l| l + c).collect();
        let v = eval_p(&spec, &path, &shifted, &quad(12)).unwrap().value;
        assert_abs_diff_eq!(v - c, base, epsilon = 1e-10);
    }
}

#[test]
fn duplicated_level_is_invisible() {
    let spec = CovarianceSpec::potts(2, 1.5);
    let a = sym(&[0.4, 1.0], &[0.6, 1.0], 2);
    let b = sym(&[0.2, 0.4, 1.0], &[0.6, 0.6, 1.0], 2);
    for settings in [quad(30), EvalSettings::default().with_method(Method::Grid)] {
        let va = eval_p(&spec, &a, &[0.0, 0.0], &settings).unwrap().value;
        let vb = eval_p(&spec, &b, &[0.0, 0.0], &settings).unwrap().value;
        assert_abs_diff_eq!(va, vb, epsilon = 1e-10);
    }
}

#[test]
fn grid_agrees_with_quadrature() {
    for beta in [0.5, 2.0] {
        let spec = CovarianceSpec::potts(2, beta);
        let path = sym(&[0.3, 0.6, 1.0], &[0.2, 0.7, 1.0], 2);
        let lam = [0.3, 0.0];
        let q = eval_p1(&spec, &path, &lam, &quad(80)).unwrap();
        let g = eval_p1(&spec, &path, &lam, &EvalSettings::default().with_method(Method::Grid)).unwrap();
        assert!((q.value - g.value).abs() < 1e-9, "beta {beta}: {} vs {} (err {})", q.value, g.value, g.error_estimate);
        assert!(g.error_estimate < 1e-9);
    }
}

#[test]
fn grid_handles_tiny_and_large_increments() {
    let spec = CovarianceSpec::potts(2, 20.0);
    // the second level is a near-duplicate of the first
    let path = sym(&[0.1, 0.2, 0.5, 1.0], &[0.3, 0.3 + 1e-7, 0.9, 1.0], 2);
    let g = eval_p1(&spec, &path, &[0.0, 0.0], &EvalSettings::default().with_method(Method::Grid)).unwrap();
    assert!(g.value.is_finite());
    assert!(g.error_estimate < 1e-6 * g.value.abs(), "{:?}", g);
    let collapsed = sym(&[0.2, 0.5, 1.0], &[0.3, 0.9, 1.0], 2);
    let c = eval_p1(&spec, &collapsed, &[0.0, 0.0], &EvalSettings::default().with_method(Method::Grid)).unwrap();
    assert!((g.value - c.value).abs() < 1e-4, "{} vs {}", g.value, c.value);
}

#[test]
fn monte_carlo_is_consistent_with_quadrature() {
    let spec = CovarianceSpec::potts(3, 0.9);
    let path = sym(&[0.5, 1.0], &[0.5, 1.0], 3);
    let lam = [0.0; 3];
    let q = eval_p1(&spec, &path, &lam, &quad(16)).unwrap();
    let mc = eval_p1(&spec, &path, &lam, &EvalSettings { samples_per_level: 800, ..EvalSettings::default().with_method(Method::MonteCarlo) }).unwrap();
    assert!(mc.error_estimate > 0.0);
    assert!((q.value - mc.value).abs() < 4.0 * mc.error_estimate + 5e-3, "{} vs {} ± {}", q.value, mc.value, mc.error_estimate);
    let again = eval_p1(&spec, &path, &lam, &EvalSettings { samples_per_level: 800, ..EvalSettings::default().with_method(Method::MonteCarlo) }).unwrap();
    assert_eq!(mc.value, again.value);
}

#[test]
fn entropy_dual_for_zero_spec() {
    for d in [vec![0.5, 0.5], vec![0.7, 0.3], vec![0.5, 0.3, 0.2], vec![1.0 / 3.0; 3]] {
        let kappa = d.len();
        let dm = Magnetization::new(d.clone()).unwrap();
        let v = eval_parisi(&CovarianceSpec::zero(kappa), &DiscretePath::constant_terminal(dm), &EvalSettings::default()).unwrap();
        let h: f64 = -d.iter().map(|x| x * x.ln()).sum::<f64>();
        assert_abs_diff_eq!(v.value, h, epsilon = 1e-9);
    }
}

#[test]
fn symmetric_infimum_is_attained_at_zero() {
    let spec = CovarianceSpec::potts(3, 0.7);
    let path = sym(&[0.5, 1.0], &[0.3, 1.0], 3);
    let settings = quad(12);
    let inf = eval_parisi(&spec, &path, &settings).unwrap();
    let at_zero = eval_p(&spec, &path, &[0.0; 3], &settings).unwrap();
    assert!(inf.value <= at_zero.value + 1e-12);
    assert!((inf.value - at_zero.value).abs() <= 2.0 * at_zero.error_estimate + 1e-10);
}

#[test]
fn gradient_in_lambda() {
    let spec = CovarianceSpec::zero(4);
    let path = DiscretePath::constant_terminal(Magnetization::balanced(4));
    let g = grad_lambda(&spec, &path, &[0.0; 4], &EvalSettings::default()).unwrap();
    g.iter().for_each(|x| assert_abs_diff_eq!(*x, 0.25, epsilon = 1e-9));
    let spec = CovarianceSpec::potts(3, 1.1);
    let path = sym(&[0.4, 1.0], &[0.5, 1.0], 3);
    let g = grad_lambda(&spec, &path, &[0.0; 3], &quad(12)).unwrap();
    g.iter().for_each(|x| assert_abs_diff_eq!(*x, 1.0 / 3.0, epsilon = 1e-4));
    let g = grad_lambda(&spec, &path, &[0.4, -0.3, 1.2], &quad(12)).unwrap();
    assert_abs_diff_eq!(g.iter().sum::<f64>(), 1.0, epsilon = 1e-6);
}

#[test]
fn non_monotone_increment_is_rejected() {
    // ξ with a negative-definite-looking increment cannot come from a valid path,
    // but a mismatched dimension must be reported
    let spec = CovarianceSpec::potts(3, 1.0);
    let path = sym(&[1.0], &[1.0], 2);
    assert!(matches!(eval_p1(&spec, &path, &[0.0; 2], &EvalSettings::default()), Err(Error::DimensionMismatch { .. })));
    let bad = EvalSettings { nodes_per_dim: 1, ..EvalSettings::default() };
    assert!(eval_p1(&CovarianceSpec::potts(2, 1.0), &sym(&[1.0], &[1.0], 2), &[0.0; 2], &bad).is_err());
}
