//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use potts_parisi::covariance::WeightedTerm;
use potts_parisi::{CovarianceSpec, InteractionTerm, Matrix};
use rand::Rng;

fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// Trapezoid nodes and weights for `∫ φ(g) F(g) dg` on `[−L, L]`.
fn gauss_trapezoid(h: f64, half_width: f64) -> Vec<(f64, f64)> {
    let n = (half_width / h).round() as i64;
    let c = h / (2.0 * std::f64::consts::PI).sqrt();
    (-n..=n)
        .map(|i| {
            let g = i as f64 * h;
            (g, c * (-0.5 * g * g).exp())
        })
        .collect()
}

/// `𝒫(π, 0)` of the κ = 2 Potts glass at inverse temperature `β` on the
/// symmetric path with weights `m` and atoms `q`, via the scalar recursion
/// obtained by writing `σ_i` through `τ_i = ±1`.
///
/// With `∇ξ(Φ⋆(q)) = β²(qI + (1−q)𝟏𝟏ᵀ/2)`, the difference `u = (Z₁ − Z₂)/2`
/// of the two field components gains variance `β²(q_{r+1} − q_r)/2` at level
/// `r`, while the common part `(Z₁ + Z₂)/2` only moves at level 0 and has
/// mean zero. Hence `𝒫⁽¹⁾(π, 0)` is the scalar Parisi recursion for
/// `log 2cosh(u)`. The correction uses `ϑ = ξ` and `ξ(Φ⋆(q)) = β²(1 + q²)/4`.
///
/// Integrals are nested trapezoid sums with step `h`, so the cost grows like
/// `(2L/h)^s`; intended for `s ≤ 2`.
pub fn sk_reduced_value(beta: f64, m: &[f64], q: &[f64]) -> f64 {
    assert_eq!(m.len(), q.len());
    let rule = gauss_trapezoid(0.02, 12.0);
    let mut sigma = Vec::with_capacity(q.len());
    let mut prev = 0.0;
    for &qr in q {
        sigma.push((beta * beta * (qr - prev) / 2.0).sqrt());
        prev = qr;
    }
    fn x(r: usize, u: f64, sigma: &[f64], m: &[f64], rule: &[(f64, f64)]) -> f64 {
        if r == sigma.len() {
            return log_2cosh(u);
        }
        if r == 0 {
            return rule.iter().map(|&(g, w)| w * x(1, u + sigma[0] * g, sigma, m, rule)).sum();
        }
        let mr = m[r - 1];
        let s: f64 = rule.iter().map(|&(g, w)| w * (mr * x(r + 1, u + sigma[r] * g, sigma, m, rule)).exp()).sum();
        s.ln() / mr
    }
    let p1 = x(0, 0.0, &sigma, m, &rule);
    let xi = |q: f64| beta * beta * (1.0 + q * q) / 4.0;
    let mut p2 = 0.0;
    let mut prev = 0.0;
    for (&mr, &qr) in m.iter().zip(q) {
        p2 += 0.5 * (mr - prev) * xi(qr);
        prev = mr;
    }
    p1 + p2 - 0.5 * xi(1.0)
}

/// Random mixture of `ξ_θ` terms on κ×κ matrices.
pub fn random_spec<R: Rng>(kappa: usize, rng: &mut R) -> CovarianceSpec {
    let terms = (0..rng.random_range(1..=3))
        .map(|_| {
            let p = rng.random_range(1..=3);
            let m = rng.random_range(1..=2);
            let exps = (0..m).map(|_| rng.random_range(1..=2)).collect();
            let ws = (0..m).map(|_| (0..kappa).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
            WeightedTerm { coeff: rng.random_range(0.05..1.0), term: InteractionTerm::new(p, exps, ws).unwrap() }
        })
        .collect();
    CovarianceSpec::new(kappa, terms).unwrap()
}

fn random_gram<R: Rng>(kappa: usize, rng: &mut R) -> Matrix {
    let rank = rng.random_range(1..=kappa);
    let a = Matrix::from_fn(kappa, rank, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose()
}

/// `0 ⪯ Q ⪯ R` with `‖R‖₁ ≤ 1`.
pub fn ordered_pair<R: Rng>(kappa: usize, rng: &mut R) -> (Matrix, Matrix) {
    let q = random_gram(kappa, rng);
    let mut r = &q + random_gram(kappa, rng);
    if rng.random_bool(0.1) {
        r = q.clone();
    }
    let norm: f64 = r.iter().map(|x| x.abs()).sum();
    let scale = rng.random_range(0.2..=1.0) / norm;
    (q * scale, r * scale)
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}
