//! Mixed covariance functions `ξ(R) = Σ_θ α_θ² ξ_θ(R)` on κ×κ matrices.
//!
//! A single interaction term is
//! `ξ_θ(R) = Π_j ⟨R^{∘p} w_j, w_j⟩^{n_j}`, a homogeneous polynomial of degree
//! `p·Σ n_j`. The mixture stores the nonnegative weights `α_θ²` directly.

mod format;

use std::cmp::Ordering;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Slack on the `‖R‖₁ ≤ 1` domain check.
const DOMAIN_SLACK: f64 = 1e-9;

/// One factor `⟨R^{∘p} w, w⟩^{exponent}` of an interaction term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub exponent: u32,
    pub w: Vec<f64>,
}

/// A monomial covariance `ξ_θ` identified by its Hadamard power and factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    p: u32,
    factors: Vec<Factor>,
}

impl InteractionTerm {
    pub fn new(p: u32, exponents: Vec<u32>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("Hadamard power p must be >= 1".into()));
        }
        if exponents.is_empty() {
            return Err(Error::InvalidInput("a term needs at least one factor".into()));
        }
        if exponents.len() != vectors.len() {
            return Err(Error::InvalidInput(format!(
                "{} exponents but {} vectors",
                exponents.len(),
                vectors.len()
            )));
        }
        let kappa = vectors[0].len();
        let mut factors = Vec::with_capacity(exponents.len());
        for (n, w) in exponents.into_iter().zip(vectors) {
            if n == 0 {
                return Err(Error::InvalidInput("exponents must be >= 1".into()));
            }
            if w.len() != kappa {
                return Err(Error::DimensionMismatch { expected: kappa, found: w.len() });
            }
            if w.iter().any(|x| !x.is_finite() || x.abs() > 1.0) {
                return Err(Error::InvalidInput("vector entries must lie in [-1, 1]".into()));
            }
            factors.push(Factor { exponent: n, w });
        }
        Ok(Self { p, factors })
    }

    /// The Potts monomial `tr(RᵀR) = ⟨R^{∘2} 𝟏, 𝟏⟩`, i.e. `p=2, n=1, w=𝟏`.
    pub fn potts(kappa: usize) -> Self {
        Self { p: 2, factors: vec![Factor { exponent: 1, w: vec![1.0; kappa] }] }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn kappa(&self) -> usize {
        self.factors[0].w.len()
    }

    pub fn degree(&self) -> u32 {
        self.p * self.factors.iter().map(|f| f.exponent).sum::<u32>()
    }

    fn is_potts(&self) -> bool {
        self.p == 2
            && self.factors.len() == 1
            && self.factors[0].exponent == 1
            && self.factors[0].w.iter().all(|&x| x == 1.0)
    }

    /// `⟨R^{∘p} w, w⟩` for each factor.
    fn factor_values(&self, r: &Matrix) -> Vec<f64> {
        let k = r.nrows();
        let p = self.p as i32;
        self.factors
            .iter()
            .map(|f| {
                let mut s = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        s += r[(a, b)].powi(p) * f.w[a] * f.w[b];
                    }
                }
                s
            })
            .collect()
    }

    fn value(&self, r: &Matrix) -> f64 {
        self.factor_values(r)
            .iter()
            .zip(&self.factors)
            .map(|(s, f)| s.powi(f.exponent as i32))
            .product()
    }

    /// Product of `s_l^{n_l}` over all factors except those in `skip`.
    fn partial_product(values: &[f64], factors: &[Factor], skip: &[usize]) -> f64 {
        values
            .iter()
            .zip(factors)
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, (s, f))| s.powi(f.exponent as i32))
            .product()
    }

    /// Adds `coeff · ∇ξ_θ(R)` into `out`.
    fn add_gradient(&self, coeff: f64, r: &Matrix, out: &mut Matrix) {
        let k = r.nrows();
        let values = self.factor_values(r);
        let p = self.p as f64;
        for (j, f) in self.factors.iter().enumerate() {
            let outer = f.exponent as f64
                * values[j].powi(f.exponent as i32 - 1)
                * Self::partial_product(&values, &self.factors, &[j]);
            if outer == 0.0 {
                continue;
            }
            for a in 0..k {
                for b in 0..k {
                    let ds = p * r[(a, b)].powi(self.p as i32 - 1) * f.w[a] * f.w[b];
                    out[(a, b)] += coeff * outer * ds;
                }
            }
        }
    }

    /// Adds `coeff · ∇²ξ_θ(R)` (indexed by `a·κ + b`) into `out`.
    fn add_hessian(&self, coeff: f64, r: &Matrix, out: &mut Matrix) {
        let k = r.nrows();
        let values = self.factor_values(r);
        let p = self.p as i32;
        let ds = |f: &Factor, a: usize, b: usize| {
            p as f64 * r[(a, b)].powi(p - 1) * f.w[a] * f.w[b]
        };
        for (j, fj) in self.factors.iter().enumerate() {
            let nj = fj.exponent as i32;
            let rest = Self::partial_product(&values, &self.factors, &[j]);
            // second derivative of s_j^{n_j}
            if nj >= 2 {
                let c = (nj * (nj - 1)) as f64 * values[j].powi(nj - 2) * rest;
                if c != 0.0 {
                    for a in 0..k {
                        for b in 0..k {
                            let x = ds(fj, a, b);
                            if x == 0.0 {
                                continue;
                            }
                            for c2 in 0..k {
                                for d in 0..k {
                                    out[(a * k + b, c2 * k + d)] += coeff * c * x * ds(fj, c2, d);
                                }
                            }
                        }
                    }
                }
            }
            // diagonal second derivative of s_j itself
            if p >= 2 {
                let c = nj as f64 * values[j].powi(nj - 1) * rest;
                if c != 0.0 {
                    for a in 0..k {
                        for b in 0..k {
                            let dd = (p * (p - 1)) as f64 * r[(a, b)].powi(p - 2) * fj.w[a] * fj.w[b];
                            out[(a * k + b, a * k + b)] += coeff * c * dd;
                        }
                    }
                }
            }
            // cross terms between distinct factors
            for (l, fl) in self.factors.iter().enumerate() {
                if l == j {
                    continue;
                }
                let nl = fl.exponent as i32;
                let c = nj as f64
                    * values[j].powi(nj - 1)
                    * nl as f64
                    * values[l].powi(nl - 1)
                    * Self::partial_product(&values, &self.factors, &[j, l]);
                if c == 0.0 {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        let x = ds(fj, a, b);
                        if x == 0.0 {
                            continue;
                        }
                        for c2 in 0..k {
                            for d in 0..k {
                                out[(a * k + b, c2 * k + d)] += coeff * c * x * ds(fl, c2, d);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Term with every `w_j` permuted by `perm` (`w'_{perm[k]} = w_k`),
    /// factors in canonical order.
    fn permuted(&self, perm: &[usize]) -> Self {
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let mut w = vec![0.0; f.w.len()];
                for (k, &x) in f.w.iter().enumerate() {
                    w[perm[k]] = x;
                }
                Factor { exponent: f.exponent, w }
            })
            .collect();
        Self { p: self.p, factors }.canonical()
    }

    fn canonical(&self) -> Self {
        let mut factors = self.factors.clone();
        factors.sort_by(cmp_factor);
        Self { p: self.p, factors }
    }
}

fn cmp_factor(a: &Factor, b: &Factor) -> Ordering {
    a.exponent.cmp(&b.exponent).then_with(|| cmp_vec(&a.w, &b.w))
}

fn cmp_vec(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn cmp_term(a: &InteractionTerm, b: &InteractionTerm) -> Ordering {
    a.p.cmp(&b.p).then_with(|| a.factors.len().cmp(&b.factors.len())).then_with(|| {
        for (x, y) in a.factors.iter().zip(&b.factors) {
            match cmp_factor(x, y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

/// A weighted term of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    /// The nonnegative weight `α_θ²`.
    pub coeff: f64,
    pub term: InteractionTerm,
}

/// A finite mixture of interaction terms on κ×κ matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    kappa: usize,
    terms: Vec<WeightedTerm>,
}

/// Result of the sampled convexity diagnostic.
#[derive(Debug, Clone)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub worst: Matrix,
    pub samples: usize,
}

impl CovarianceSpec {
    pub fn new(kappa: usize, terms: Vec<WeightedTerm>) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::InvalidInput("kappa must be >= 2".into()));
        }
        for t in &terms {
            if !t.coeff.is_finite() || t.coeff < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "coefficients must be finite and >= 0, got {}",
                    t.coeff
                )));
            }
            if t.term.kappa() != kappa {
                return Err(Error::DimensionMismatch { expected: kappa, found: t.term.kappa() });
            }
        }
        Ok(Self { kappa, terms })
    }

    /// The covariance with no terms, `ξ ≡ 0`.
    pub fn zero(kappa: usize) -> Self {
        Self { kappa: kappa.max(2), terms: Vec::new() }
    }

    /// `ξ(R) = β² tr(RᵀR)`, the covariance of the classical Potts glass.
    pub fn potts(kappa: usize, beta: f64) -> Self {
        Self {
            kappa,
            terms: vec![WeightedTerm { coeff: beta * beta, term: InteractionTerm::potts(kappa) }],
        }
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn terms(&self) -> &[WeightedTerm] {
        &self.terms
    }

    /// True if all coefficients vanish.
    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == 0.0)
    }

    /// If the mixture is exactly the Potts preset, its inverse temperature.
    pub fn potts_beta(&self) -> Option<f64> {
        let live: Vec<&WeightedTerm> = self.terms.iter().filter(|t| t.coeff != 0.0).collect();
        match live.as_slice() {
            [t] if t.term.is_potts() => Some(t.coeff.sqrt()),
            _ => None,
        }
    }

    /// Mixture with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            kappa: self.kappa,
            terms: self
                .terms
                .iter()
                .map(|t| WeightedTerm { coeff: t.coeff * factor, term: t.term.clone() })
                .collect(),
        }
    }

    fn check(&self, r: &Matrix) -> Result<()> {
        if r.nrows() != self.kappa || r.ncols() != self.kappa {
            return Err(Error::DimensionMismatch { expected: self.kappa, found: r.nrows() });
        }
        let norm: f64 = r.iter().map(|x| x.abs()).sum();
        if norm > 1.0 + DOMAIN_SLACK || !norm.is_finite() {
            return Err(Error::Domain { norm });
        }
        Ok(())
    }

    /// `ξ(R)`.
    pub fn eval_xi(&self, r: &Matrix) -> Result<f64> {
        self.check(r)?;
        Ok(self.xi_unchecked(r))
    }

    pub(crate) fn xi_unchecked(&self, r: &Matrix) -> f64 {
        self.terms.iter().filter(|t| t.coeff != 0.0).map(|t| t.coeff * t.term.value(r)).sum()
    }

    /// `∇ξ(R)`, the matrix of partial derivatives `∂ξ/∂R_{k,k'}`.
    pub fn eval_grad_xi(&self, r: &Matrix) -> Result<Matrix> {
        self.check(r)?;
        Ok(self.grad_unchecked(r))
    }

    pub(crate) fn grad_unchecked(&self, r: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.kappa, self.kappa);
        for t in self.terms.iter().filter(|t| t.coeff != 0.0) {
            t.term.add_gradient(t.coeff, r, &mut out);
        }
        out
    }

    /// Hessian of `ξ` as a κ²×κ² matrix; row/column `a·κ + b` is entry `(a, b)`.
    pub fn eval_hessian(&self, r: &Matrix) -> Result<Matrix> {
        self.check(r)?;
        let k2 = self.kappa * self.kappa;
        let mut out = Matrix::zeros(k2, k2);
        for t in self.terms.iter().filter(|t| t.coeff != 0.0) {
            t.term.add_hessian(t.coeff, r, &mut out);
        }
        // symmetrize rounding noise
        let sym = (&out + out.transpose()) * 0.5;
        Ok(sym)
    }

    /// `ϑ(R) = ⟨R, ∇ξ(R)⟩ − ξ(R)`.
    pub fn eval_vartheta(&self, r: &Matrix) -> Result<f64> {
        self.check(r)?;
        Ok(self.vartheta_unchecked(r))
    }

    pub(crate) fn vartheta_unchecked(&self, r: &Matrix) -> f64 {
        let g = self.grad_unchecked(r);
        r.dot(&g) - self.xi_unchecked(r)
    }

    /// Upper bound on `sup_{‖R‖₁≤1} max_{ij} |∇²ξ(R)_{ij}|`.
    ///
    /// Each term is dominated coefficientwise by `W (Σ|R_ab|)^deg` with
    /// `W = Π_j ‖w_j‖_∞^{2n_j}`, whose second derivatives are at most
    /// `W·deg·(deg−1)` on the unit ball. Exact for the Potts preset.
    pub fn hessian_sup_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let d = t.term.degree() as f64;
                let w: f64 = t
                    .term
                    .factors
                    .iter()
                    .map(|f| f.w.iter().fold(0.0f64, |m, x| m.max(x.abs())).powi(2 * f.exponent as i32))
                    .product();
                t.coeff * w * d * (d - 1.0)
            })
            .sum()
    }

    /// Checks invariance of the term multiset under every permutation of
    /// symbols. It suffices to test the two generators of the symmetric group
    /// (a transposition and the full cycle). This is a sufficient condition
    /// for `ξ(ω•R) = ξ(R)`.
    pub fn check_symmetry(&self) -> bool {
        let k = self.kappa;
        let reference = self.canonical_terms(None);
        let swap: Vec<usize> = (0..k).map(|i| if i == 0 { 1 } else if i == 1 { 0 } else { i }).collect();
        let cycle: Vec<usize> = (0..k).map(|i| (i + 1) % k).collect();
        [swap, cycle].iter().all(|perm| {
            let permuted = self.canonical_terms(Some(perm));
            permuted.len() == reference.len()
                && permuted.iter().zip(&reference).all(|(a, b)| {
                    (a.0 - b.0).abs() <= 1e-12 * (1.0 + a.0.abs()) && cmp_term(&a.1, &b.1) == Ordering::Equal
                })
        })
    }

    fn canonical_terms(&self, perm: Option<&[usize]>) -> Vec<(f64, InteractionTerm)> {
        let mut items: Vec<(f64, InteractionTerm)> = self
            .terms
            .iter()
            .filter(|t| t.coeff != 0.0)
            .map(|t| {
                let term = match perm {
                    Some(p) => t.term.permuted(p),
                    None => t.term.canonical(),
                };
                (t.coeff, term)
            })
            .collect();
        items.sort_by(|a, b| cmp_term(&a.1, &b.1));
        let mut merged: Vec<(f64, InteractionTerm)> = Vec::with_capacity(items.len());
        for (c, t) in items {
            match merged.last_mut() {
                Some(last) if cmp_term(&last.1, &t) == Ordering::Equal => last.0 += c,
                _ => merged.push((c, t)),
            }
        }
        merged
    }

    /// Samples matrices uniformly from `{R ≥ 0 entrywise, Σ R ≤ 1}` and
    /// reports the smallest Hessian eigenvalue seen. Diagnostic only.
    pub fn check_convexity_sampled<R: Rng + ?Sized>(&self, n_samples: usize, rng: &mut R) -> Result<ConvexityReport> {
        if n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be >= 1".into()));
        }
        let k = self.kappa;
        let k2 = k * k;
        let mut best = ConvexityReport { min_eigenvalue: f64::INFINITY, worst: Matrix::zeros(k, k), samples: n_samples };
        for _ in 0..n_samples {
            let e: Vec<f64> = (0..=k2).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            let r = Matrix::from_fn(k, k, |a, b| e[a * k + b] / total);
            let h = self.eval_hessian(&r)?;
            let min = SymmetricEigen::new(h).eigenvalues.min();
            if min < best.min_eigenvalue {
                best.min_eigenvalue = min;
                best.worst = r;
            }
        }
        Ok(best)
    }

    /// Parses the declarative text format; see the crate README.
    pub fn parse(text: &str) -> Result<Self> {
        format::parse(text)
    }

    /// Serializes into the declarative text format accepted by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        format::to_text(self)
    }

    /// Hex SHA-256 of [`to_text`](Self::to_text), used to tag outputs.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `ω•R` with `(ω•R)_{k,k'} = R_{ω⁻¹(k), ω⁻¹(k')}`, where `perm[i] = ω(i)`.
pub fn permute_matrix(r: &Matrix, perm: &[usize]) -> Matrix {
    let k = r.nrows();
    let mut inv = vec![0; k];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Matrix::from_fn(k, k, |a, b| r[(inv[a], inv[b])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(p: u32, exps: Vec<u32>, ws: Vec<Vec<f64>>) -> CovarianceSpec {
        let k = ws[0].len();
        CovarianceSpec::new(k, vec![WeightedTerm { coeff: 1.0, term: InteractionTerm::new(p, exps, ws).unwrap() }])
            .unwrap()
    }

    #[test]
    fn potts_xi_at_balanced_diagonal() {
        let spec = CovarianceSpec::potts(2, 1.0);
        let r = Matrix::from_diagonal_element(2, 2, 0.5);
        assert_abs_diff_eq!(spec.eval_xi(&r).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn xi_vanishes_at_zero() {
        let spec = single(2, vec![1, 3], vec![vec![1.0, -0.5, 0.2], vec![0.3, 0.3, 1.0]]);
        assert_eq!(spec.eval_xi(&Matrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn hadamard_square_term_by_hand() {
        let spec = single(2, vec![1], vec![vec![1.0, 1.0]]);
        let r = Matrix::from_element(2, 2, 0.25);
        assert_abs_diff_eq!(spec.eval_xi(&r).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn potts_gradient_and_hessian_are_linear_and_constant() {
        let beta = 1.3;
        let spec = CovarianceSpec::potts(3, beta);
        let r = Matrix::from_fn(3, 3, |a, b| 0.05 + 0.01 * (a as f64) + 0.02 * (b as f64));
        let g = spec.eval_grad_xi(&r).unwrap();
        assert!((g - &r * (2.0 * beta * beta)).abs().max() < 1e-14);
        let h = spec.eval_hessian(&r).unwrap();
        let expected = Matrix::identity(9, 9) * (2.0 * beta * beta);
        assert!((h - expected).abs().max() < 1e-13);
    }

    #[test]
    fn single_coordinate_gradient() {
        let spec = single(1, vec![2], vec![vec![1.0, 0.0]]);
        let r = Matrix::from_diagonal_element(2, 2, 0.5);
        let g = spec.eval_grad_xi(&r).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 0)], 0.0);
        assert_eq!(g[(1, 1)], 0.0);
    }

    #[test]
    fn zero_spec_gives_zero_derivatives() {
        let spec = CovarianceSpec::new(
            2,
            vec![WeightedTerm { coeff: 0.0, term: InteractionTerm::potts(2) }],
        )
        .unwrap();
        let r = Matrix::from_element(2, 2, 0.2);
        assert_eq!(spec.eval_grad_xi(&r).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(spec.eval_hessian(&r).unwrap(), Matrix::zeros(4, 4));
    }

    #[test]
    fn vartheta_equals_xi_for_potts() {
        let spec = CovarianceSpec::potts(3, 0.7);
        let r = Matrix::from_fn(3, 3, |a, b| if a == b { 0.2 } else { 0.05 });
        assert_abs_diff_eq!(spec.eval_vartheta(&r).unwrap(), spec.eval_xi(&r).unwrap(), epsilon = 1e-15);
        assert_eq!(spec.eval_vartheta(&Matrix::zeros(3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn domain_and_dimension_errors() {
        let spec = CovarianceSpec::potts(2, 1.0);
        assert!(matches!(spec.eval_xi(&Matrix::identity(2, 2)), Err(Error::Domain { .. })));
        assert!(matches!(
            spec.eval_xi(&Matrix::zeros(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn symmetry_checks() {
        assert!(CovarianceSpec::potts(4, 1.0).check_symmetry());
        let lone = single(1, vec![2], vec![vec![1.0, 0.0]]);
        assert!(!lone.check_symmetry());
        let pair = CovarianceSpec::new(
            2,
            vec![
                WeightedTerm { coeff: 0.5, term: InteractionTerm::new(1, vec![2], vec![vec![1.0, 0.0]]).unwrap() },
                WeightedTerm { coeff: 0.5, term: InteractionTerm::new(1, vec![2], vec![vec![0.0, 1.0]]).unwrap() },
            ],
        )
        .unwrap();
        assert!(pair.check_symmetry());
    }

    #[test]
    fn symmetry_is_insensitive_to_factor_order() {
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        let c = vec![0.0, 0.0, 1.0];
        let mut terms = Vec::new();
        for (x, y) in [(&a, &b), (&b, &c), (&c, &a), (&b, &a), (&c, &b), (&a, &c)] {
            terms.push(WeightedTerm {
                coeff: 0.1,
                term: InteractionTerm::new(1, vec![1, 1], vec![x.clone(), y.clone()]).unwrap(),
            });
        }
        assert!(CovarianceSpec::new(3, terms).unwrap().check_symmetry());
    }

    #[test]
    fn convexity_diagnostics() {
        let mut rng = crate::rng::stream(1, "convexity");
        let potts = CovarianceSpec::potts(2, 1.0).check_convexity_sampled(50, &mut rng).unwrap();
        assert_abs_diff_eq!(potts.min_eigenvalue, 2.0, epsilon = 1e-12);
        let zero = CovarianceSpec::zero(2).check_convexity_sampled(10, &mut rng).unwrap();
        assert_eq!(zero.min_eigenvalue, 0.0);
        assert!(CovarianceSpec::zero(2).check_convexity_sampled(0, &mut rng).is_err());
    }

    #[test]
    fn potts_preset_is_recognised() {
        assert_eq!(CovarianceSpec::potts(3, 0.5).potts_beta(), Some(0.5));
        assert_eq!(CovarianceSpec::zero(3).potts_beta(), None);
    }

    #[test]
    fn constructor_rejects_bad_terms() {
        assert!(InteractionTerm::new(0, vec![1], vec![vec![1.0, 1.0]]).is_err());
        assert!(InteractionTerm::new(1, vec![0], vec![vec![1.0, 1.0]]).is_err());
        assert!(InteractionTerm::new(1, vec![1], vec![vec![1.5, 1.0]]).is_err());
        assert!(InteractionTerm::new(1, vec![1, 1], vec![vec![1.0, 1.0], vec![1.0]]).is_err());
        assert!(CovarianceSpec::new(
            3,
            vec![WeightedTerm { coeff: -1.0, term: InteractionTerm::potts(3) }]
        )
        .is_err());
    }
}
