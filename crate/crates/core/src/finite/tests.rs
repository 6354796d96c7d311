use super::*;
use crate::covariance::{InteractionTerm, WeightedTerm};
use crate::paths::SymmetricPath;
use approx::assert_abs_diff_eq;

fn config(n: usize, d: Magnetization, spec: CovarianceSpec, n_disorder: usize) -> FiniteModelConfig {
    FiniteModelConfig { n, d, epsilon: 0.0, spec, n_disorder, seed: 17 }
}

fn mixed_spec() -> CovarianceSpec {
    let a = InteractionTerm::new(1, vec![2], vec![vec![1.0, -1.0]]).unwrap();
    let b = InteractionTerm::new(3, vec![1], vec![vec![0.5, 1.0]]).unwrap();
    CovarianceSpec::new(
        2,
        vec![WeightedTerm { coeff: 0.8, term: a }, WeightedTerm { coeff: 0.3, term: b }],
    )
    .unwrap()
}

#[test]
fn enumeration_counts() {
    let s = enumerate_configs(3, &Magnetization::balanced(3), 0.0, 100).unwrap();
    assert_eq!(s.len(), 6);
    let s = enumerate_configs(2, &Magnetization::balanced(2), 0.0, 100).unwrap();
    assert_eq!(s.len(), 2);
    let d = Magnetization::new(vec![0.5, 0.25, 0.25]).unwrap();
    let s = enumerate_configs(8, &d, 0.0, 10_000).unwrap();
    assert_eq!(s.len(), 420);
    assert_eq!(count_configs(8, &d, 0.0).unwrap(), 420.0);
    for c in s.iter() {
        assert_eq!(c.iter().filter(|&&x| x == 0).count(), 4);
    }
}

#[test]
fn relaxed_enumeration_matches_brute_force() {
    let d = Magnetization::balanced(2);
    let s = enumerate_configs(4, &d, 0.25, 100).unwrap();
    let brute = (0..16u32)
        .filter(|code| {
            let ones = code.count_ones() as f64 / 4.0;
            (ones - 0.5).abs() <= 0.25
        })
        .count();
    assert_eq!(s.len(), brute);
    assert_eq!(brute, 14);
    let mut seen: Vec<&[u8]> = s.iter().collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 14);
}

#[test]
fn infeasible_and_oversized_sets_are_rejected() {
    let d = Magnetization::balanced(3);
    assert!(matches!(enumerate_configs(4, &d, 0.0, 100), Err(Error::Infeasible(_))));
    assert!(matches!(enumerate_configs(9, &d, 0.0, 100), Err(Error::TooLarge(_))));
    let spec = mixed_spec();
    let cfg = config(14, Magnetization::balanced(2), spec, 1);
    assert!(matches!(estimate_fn(&cfg), Err(Error::TooLarge(_))));
}

#[test]
fn zero_spec_gives_entropy() {
    let cfg = config(6, Magnetization::balanced(3), CovarianceSpec::zero(3), 5);
    let est = estimate_fn(&cfg).unwrap();
    assert_abs_diff_eq!(est.mean, 90f64.ln() / 6.0, epsilon = 1e-14);
    assert_eq!(est.stderr, 0.0);
    assert_eq!(est.n_configs, 90);
}

fn check_variance(spec: &CovarianceSpec, n: usize, d: Magnetization) {
    let configs = enumerate_configs(n, &d, 0.0, 10_000).unwrap();
    let sampler = HamiltonianSampler::new(spec, &configs).unwrap();
    let draws: Vec<Vec<f64>> = (0..10_000).map(|r| sampler.sample(&configs, &mut rng::indexed(3, "var", r))).collect();
    let target = n as f64 * spec.eval_xi(&d.diag()).unwrap();
    for idx in [0, configs.len() / 2, configs.len() - 1] {
        let sq: Vec<f64> = draws.iter().map(|h| h[idx] * h[idx]).collect();
        let est = MeanEstimate::from_samples(&sq);
        assert!((est.mean - target).abs() <= 3.0 * est.stderr, "{est:?} vs {target}");
    }
}

#[test]
fn energy_variance_matches_covariance() {
    check_variance(&CovarianceSpec::potts(3, 0.9), 6, Magnetization::balanced(3));
    check_variance(&mixed_spec(), 6, Magnetization::balanced(2));
    check_variance(&mixed_spec(), 5, Magnetization::new(vec![0.6, 0.4]).unwrap());
}

#[test]
fn dense_covariance_is_reproduced() {
    // cross-covariance between two configurations of the dense sampler
    let spec = mixed_spec();
    let configs = enumerate_configs(4, &Magnetization::balanced(2), 0.0, 100).unwrap();
    let sampler = HamiltonianSampler::new(&spec, &configs).unwrap();
    let HamiltonianSampler::Dense { factor } = &sampler else { panic!("expected dense sampler") };
    let cov = factor * factor.transpose();
    for a in 0..configs.len() {
        for b in 0..configs.len() {
            let want = 4.0 * spec.eval_xi(&configs.overlap(a, b)).unwrap();
            assert_abs_diff_eq!(cov[(a, b)], want, epsilon = 1e-10);
        }
    }
}

#[test]
fn swap_symmetry_in_law() {
    // w = (1, −1) and p = 1, n = 2 is invariant under exchanging the symbols
    let a = InteractionTerm::new(1, vec![2], vec![vec![1.0, -1.0]]).unwrap();
    let spec = CovarianceSpec::new(2, vec![WeightedTerm { coeff: 1.0, term: a }]).unwrap();
    let configs = enumerate_configs(6, &Magnetization::balanced(2), 0.0, 100).unwrap();
    let sampler = HamiltonianSampler::new(&spec, &configs).unwrap();
    let j = swapped_in(&configs, 0);
    let diffs: Vec<f64> = (0..4000)
        .map(|r| {
            let h = sampler.sample(&configs, &mut rng::indexed(5, "swap", r));
            h[0] - h[j]
        })
        .collect();
    let est = MeanEstimate::from_samples(&diffs);
    assert!(est.mean.abs() <= 3.0 * est.stderr.max(1e-12), "{est:?}");

    let configs = enumerate_configs(5, &Magnetization::balanced(2), 0.1, 100).unwrap();
    let g = potts_disorder(5, &mut rng::stream(1, "g"));
    let h = potts_energies(&g, &configs, 1.0);
    for i in 0..configs.len() {
        assert_abs_diff_eq!(h[i], h[swapped_in(&configs, i)], epsilon = 1e-12);
    }
}

fn swapped_in(configs: &ConfigSet, i: usize) -> usize {
    let flipped: Vec<u8> = configs.get(i).iter().map(|&x| 1 - x).collect();
    configs.iter().position(|c| c == flipped.as_slice()).unwrap()
}

#[test]
fn plus_minus_one_form_agrees() {
    for n in [4, 8, 10] {
        let cfg = config(n, Magnetization::balanced(2), CovarianceSpec::potts(2, 1.4), 20);
        for (a, b) in sk_transform_pairs(&cfg).unwrap() {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let direct = free_energy_samples(&cfg).unwrap();
        let pairs = sk_transform_pairs(&cfg).unwrap();
        for (x, (a, _)) in direct.iter().zip(&pairs) {
            assert_eq!(x, a);
        }
    }
}

#[test]
fn free_energy_grows_with_beta() {
    let mut prev: Option<FreeEnergyEstimate> = None;
    for beta in [0.2, 0.6, 1.0, 1.5] {
        let cfg = config(8, Magnetization::balanced(2), CovarianceSpec::potts(2, beta), 300);
        let est = estimate_fn(&cfg).unwrap();
        if let Some(p) = prev {
            assert!(est.mean >= p.mean - 3.0 * p.stderr.hypot(est.stderr), "{p:?} {est:?}");
        }
        prev = Some(est);
    }
}

#[test]
fn estimates_are_reproducible() {
    let cfg = config(6, Magnetization::balanced(3), CovarianceSpec::potts(3, 0.8), 40);
    let a = estimate_fn(&cfg).unwrap();
    let b = estimate_fn(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(estimate_fn(&other).unwrap().mean, a.mean);
}

#[test]
fn guerra_bound_zero_spec_is_tight() {
    let spec = CovarianceSpec::zero(3);
    let cfg = config(6, Magnetization::balanced(3), spec.clone(), 3);
    let est = estimate_fn(&cfg).unwrap();
    let path = SymmetricPath::new(vec![0.5, 1.0], vec![0.2, 1.0]).unwrap().to_discrete(3).unwrap();
    let report = guerra_bound_check(&est, &spec, &[(path, vec![0.0; 3])], &EvalSettings::default()).unwrap();
    assert!(report.pass);
    // the only gap is the finite-volume entropy deficit
    assert_abs_diff_eq!(report.margin, 3f64.ln() - 90f64.ln() / 6.0, epsilon = 1e-9);
}

#[test]
fn guerra_bound_holds_for_arbitrary_paths() {
    let spec = CovarianceSpec::potts(3, 0.7);
    let cfg = config(6, Magnetization::balanced(3), spec.clone(), 100);
    let est = estimate_fn(&cfg).unwrap();
    let candidates: Vec<(DiscretePath, Vec<f64>)> = [(vec![1.0], vec![1.0]), (vec![0.4, 1.0], vec![0.3, 1.0])]
        .into_iter()
        .map(|(m, q)| (SymmetricPath::new(m, q).unwrap().to_discrete(3).unwrap(), vec![0.1, 0.0, -0.1]))
        .collect();
    let report = guerra_bound_check(&est, &spec, &candidates, &EvalSettings::default()).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn csv_row_tags() {
    let cfg = config(4, Magnetization::balanced(2), CovarianceSpec::potts(2, 0.5), 2);
    let est = estimate_fn(&cfg).unwrap();
    let row = FiniteRow::new(&cfg, &est);
    assert_eq!(row.beta_or_spec_hash, "0.5");
    assert_eq!(row.d, "0.5;0.5");
    let cfg = config(4, Magnetization::balanced(2), mixed_spec(), 2);
    let row = FiniteRow::new(&cfg, &estimate_fn(&cfg).unwrap());
    assert_eq!(row.beta_or_spec_hash.len(), 64);
}
