mod common;

use potts_parisi::finite::{estimate_fn, FiniteModelConfig};
use potts_parisi::parisi::{eval_p, eval_p1, EvalSettings, Method};
use potts_parisi::paths::{psd_leq, random_gamma_chain};
use potts_parisi::rpc::{estimate_p1_n, CascadeConfig, SiteConstraint};
use potts_parisi::{rng, CovarianceSpec, Magnetization, SymmetricPath};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = CovarianceSpec::potts(3, 1.1);
    let path = SymmetricPath::new(vec![0.3, 0.6, 1.0], vec![0.2, 0.5, 1.0]).unwrap().to_discrete(3).unwrap();
    let mc = EvalSettings { samples_per_level: 100, ..EvalSettings::default() }.with_method(Method::MonteCarlo);
    let quad = EvalSettings::default().with_method(Method::Quadrature).with_nodes(8);
    let cascade = CascadeConfig::for_path(&path, 30, 4).unwrap();
    let finite = FiniteModelConfig {
        n: 6,
        d: Magnetization::balanced(3),
        epsilon: 0.0,
        spec: spec.clone(),
        n_disorder: 50,
        seed: 2,
    };
    let run = || {
        (
            eval_p1(&spec, &path, &[0.1, 0.0, -0.2], &mc).unwrap().value,
            eval_p1(&spec, &path, &[0.1, 0.0, -0.2], &quad).unwrap().value,
            estimate_p1_n(&spec, &path, &[0.0; 3], 2, &SiteConstraint::Full, &cascade, 64).unwrap().mean,
            estimate_fn(&finite).unwrap().mean,
        )
    };
    let one = in_pool(1, run);
    let three = in_pool(3, run);
    assert_eq!(one.0.to_bits(), three.0.to_bits());
    assert_eq!(one.1.to_bits(), three.1.to_bits());
    assert_eq!(one.2.to_bits(), three.2.to_bits());
    assert_eq!(one.3.to_bits(), three.3.to_bits());
}

#[test]
fn scalar_reduction_across_methods() {
    for (beta, m, q) in [(0.8, vec![0.35, 1.0], vec![0.45, 1.0]), (1.7, vec![0.6, 1.0], vec![0.9, 1.0])] {
        let oracle = common::sk_reduced_value(beta, &m, &q);
        let path = SymmetricPath::new(m, q).unwrap().to_discrete(2).unwrap();
        let spec = CovarianceSpec::potts(2, beta);
        for settings in [
            EvalSettings::default().with_method(Method::Quadrature).with_nodes(60),
            EvalSettings::default().with_method(Method::Grid),
        ] {
            let v = eval_p(&spec, &path, &[0.0, 0.0], &settings).unwrap().value;
            assert!((v - oracle).abs() <= 1e-8, "{} vs {oracle} ({:?})", v, settings.method);
        }
    }
}

#[test]
fn cascade_estimate_matches_recursion_for_three_states() {
    let spec = CovarianceSpec::potts(3, 0.8);
    let path = SymmetricPath::new(vec![0.4, 1.0], vec![0.3, 1.0]).unwrap().to_discrete(3).unwrap();
    let lambda = [0.2, -0.1, 0.0];
    let reference = eval_p1(&spec, &path, &lambda, &EvalSettings::default()).unwrap().value;
    let cascade = CascadeConfig::for_path(&path, 100, 12).unwrap();
    let est = estimate_p1_n(&spec, &path, &lambda, 2, &SiteConstraint::Full, &cascade, 1500).unwrap();
    assert!((est.mean - reference).abs() <= 3.0 * est.stderr, "{est:?} vs {reference}");
}

#[test]
fn monotonicity_along_constraint_chains() {
    let mut rng = rng::stream(8, "chains");
    for i in 0..200 {
        let kappa = 2 + i % 3;
        let spec = common::random_spec(kappa, &mut rng);
        let d = if i % 2 == 0 {
            Magnetization::balanced(kappa)
        } else {
            let raw: Vec<f64> = (0..kappa).map(|k| 1.0 + k as f64).collect();
            let total: f64 = raw.iter().sum();
            Magnetization::new(raw.iter().map(|x| x / total).collect()).unwrap()
        };
        let chain = random_gamma_chain(&d, 3, &mut rng);
        for w in chain.windows(2) {
            assert!(psd_leq(&w[0], &w[1], 1e-10).unwrap());
            assert!(spec.eval_xi(&w[0]).unwrap() <= spec.eval_xi(&w[1]).unwrap() + 1e-12);
            assert!(spec.eval_vartheta(&w[0]).unwrap() <= spec.eval_vartheta(&w[1]).unwrap() + 1e-12);
            let inc = spec.eval_grad_xi(&w[1]).unwrap() - spec.eval_grad_xi(&w[0]).unwrap();
            assert!(common::min_eigenvalue(&inc) >= -1e-10);
        }
    }
}

#[test]
fn potts_preset_has_permutation_symmetry() {
    let mut rng = rng::stream(9, "symmetry");
    for kappa in 2..=4 {
        assert!(CovarianceSpec::potts(kappa, 1.3).check_symmetry());
    }
    let spec = common::random_spec(3, &mut rng);
    let probe = spec.check_symmetry();
    // a random mixture is symmetric only by accident; the check must agree
    // with direct evaluation on permuted matrices
    let r = potts_parisi::paths::random_gamma(&Magnetization::balanced(3), &mut rng);
    let perm = [1, 2, 0];
    let moved = potts_parisi::covariance::permute_matrix(&r, &perm);
    let same = (spec.eval_xi(&r).unwrap() - spec.eval_xi(&moved).unwrap()).abs() <= 1e-12;
    if probe {
        assert!(same);
    }
}
