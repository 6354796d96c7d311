//! Exact-enumeration free energies of small constrained systems.
//!
//! For `N` spins and a magnetization `d`, the constrained partition function
//! `Z_N(d, ε) = Σ_{σ∈Σ^N(d,ε)} exp H_N(σ)` is summed configuration by
//! configuration and averaged over independent disorder draws.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::parisi::{self, EvalSettings};
use crate::paths::{DiscretePath, Magnetization};
use crate::rng;
use crate::stats::MeanEstimate;
use crate::Matrix;

/// Largest configuration set summed for the Potts preset.
pub const MAX_POTTS_CONFIGS: usize = 1_000_000;

/// Largest configuration set for general covariances, whose energies are
/// drawn through a dense factorization of the `|S|×|S|` covariance.
pub const MAX_DENSE_CONFIGS: usize = 2_000;

/// A set of configurations `σ ∈ Σ^N`, stored as symbol indices site by site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSet {
    n: usize,
    kappa: usize,
    symbols: Vec<u8>,
}

impl ConfigSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.symbols.len() / self.n.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.symbols[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.symbols.chunks(self.n)
    }

    /// `σσ'ᵀ/N` for configurations `a` and `b`.
    pub fn overlap(&self, a: usize, b: usize) -> Matrix {
        let mut r = Matrix::zeros(self.kappa, self.kappa);
        for (&x, &y) in self.get(a).iter().zip(self.get(b)) {
            r[(x as usize, y as usize)] += 1.0;
        }
        r / self.n as f64
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn multinomial(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    (ln_factorial(n) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>()).exp().round()
}

/// Count vectors `c` with `Σ c = n` and `|c_k/n − d_k| ≤ ε` for every `k`.
fn admissible_counts(n: usize, d: &[f64], epsilon: f64) -> Vec<Vec<usize>> {
    fn rec(k: usize, left: usize, n: usize, d: &[f64], eps: f64, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k + 1 == d.len() {
            if (left as f64 / n as f64 - d[k]).abs() <= eps {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        for c in 0..=left {
            if (c as f64 / n as f64 - d[k]).abs() <= eps {
                cur.push(c);
                rec(k + 1, left - c, n, d, eps, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, n, d, epsilon + 1e-12, &mut Vec::new(), &mut out);
    out
}

fn push_permutations(counts: &mut [usize], cur: &mut Vec<u8>, out: &mut Vec<u8>, n: usize) {
    if cur.len() == n {
        out.extend_from_slice(cur);
        return;
    }
    for k in 0..counts.len() {
        if counts[k] > 0 {
            counts[k] -= 1;
            cur.push(k as u8);
            push_permutations(counts, cur, out, n);
            cur.pop();
            counts[k] += 1;
        }
    }
}

/// Number of configurations in `Σ^N(d, ε)`.
pub fn count_configs(n: usize, d: &Magnetization, epsilon: f64) -> Result<f64> {
    check_constraint(n, d, epsilon)?;
    Ok(admissible_counts(n, d.as_slice(), epsilon).iter().map(|c| multinomial(c)).sum())
}

fn check_constraint(n: usize, d: &Magnetization, epsilon: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one spin".into()));
    }
    if d.kappa() > u8::MAX as usize {
        return Err(Error::InvalidInput(format!("κ = {} is too large", d.kappa())));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::InvalidInput(format!("ε must be nonnegative, got {epsilon}")));
    }
    if epsilon == 0.0 && !d.in_dn(n) {
        return Err(Error::Infeasible(format!("N·d is not integral for N = {n}, d = {:?}", d.as_slice())));
    }
    Ok(())
}

/// Lists `Σ^N(d, ε)` in lexicographic order of count vectors, then of
/// configurations.
pub fn enumerate_configs(n: usize, d: &Magnetization, epsilon: f64, limit: usize) -> Result<ConfigSet> {
    let total = count_configs(n, d, epsilon)?;
    if total == 0.0 {
        return Err(Error::Infeasible(format!("Σ^N(d, ε) is empty for N = {n}, ε = {epsilon}")));
    }
    if total > limit as f64 {
        return Err(Error::TooLarge(format!("{total} configurations exceed the limit of {limit}")));
    }
    let mut symbols = Vec::with_capacity(total as usize * n);
    for mut counts in admissible_counts(n, d.as_slice(), epsilon) {
        push_permutations(&mut counts, &mut Vec::with_capacity(n), &mut symbols, n);
    }
    Ok(ConfigSet { n, kappa: d.kappa(), symbols })
}

/// Draws joint energies `H(σ)` over a fixed configuration set.
#[derive(Debug, Clone)]
pub enum HamiltonianSampler {
    Zero,
    /// `H(σ) = (β/√N) Σ_{i,j} g_ij 1{σ_i = σ_j}`.
    Potts { beta: f64 },
    /// `H = L z` with `LLᵀ = (N ξ(σσ'ᵀ/N))_{σ,σ'}`.
    Dense { factor: Matrix },
}

impl HamiltonianSampler {
    pub fn new(spec: &CovarianceSpec, configs: &ConfigSet) -> Result<Self> {
        if spec.kappa() != configs.kappa() {
            return Err(Error::DimensionMismatch { expected: spec.kappa(), found: configs.kappa() });
        }
        if spec.is_zero() {
            return Ok(Self::Zero);
        }
        if let Some(beta) = spec.potts_beta() {
            if configs.len() > MAX_POTTS_CONFIGS {
                return Err(Error::TooLarge(format!("{} configurations", configs.len())));
            }
            return Ok(Self::Potts { beta });
        }
        let m = configs.len();
        if m > MAX_DENSE_CONFIGS {
            return Err(Error::TooLarge(format!(
                "{m} configurations exceed the dense limit of {MAX_DENSE_CONFIGS} for general covariances"
            )));
        }
        let n = configs.n() as f64;
        let mut cov = Matrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = n * spec.eval_xi(&configs.overlap(a, b))?;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let low = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if low < -1e-8 * top.max(1.0) {
            return Err(Error::Factorization(format!(
                "covariance has eigenvalue {low:e} (largest {top:e}); the spec is not positive definite"
            )));
        }
        let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 1e-12 * top).collect();
        let mut factor = Matrix::zeros(m, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].sqrt();
            for r in 0..m {
                factor[(r, c)] = eig.eigenvectors[(r, i)] * s;
            }
        }
        Ok(Self::Dense { factor })
    }

    pub fn sample<R: Rng + ?Sized>(&self, configs: &ConfigSet, rng: &mut R) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; configs.len()],
            Self::Potts { beta } => potts_energies(&potts_disorder(configs.n(), rng), configs, *beta),
            Self::Dense { factor } => {
                let z: Vec<f64> = (0..factor.ncols()).map(|_| StandardNormal.sample(rng)).collect();
                let z = nalgebra::DVector::from_vec(z);
                (factor * z).iter().copied().collect()
            }
        }
    }
}

/// Couplings `g_ij`, row-major `N×N`.
pub fn potts_disorder<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n * n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn potts_energies(g: &[f64], configs: &ConfigSet, beta: f64) -> Vec<f64> {
    let n = configs.n();
    let scale = beta / (n as f64).sqrt();
    let diag: f64 = (0..n).map(|i| g[i * n + i]).sum();
    configs
        .iter()
        .map(|s| {
            let mut acc = diag;
            for i in 0..n {
                for j in i + 1..n {
                    if s[i] == s[j] {
                        acc += g[i * n + j] + g[j * n + i];
                    }
                }
            }
            scale * acc
        })
        .collect()
}

/// The same energies for `κ = 2` written through `τ_i = ±1`:
/// `1{σ_i = σ_j} = (1 + τ_i τ_j)/2`, so
/// `H = (β/(2√N)) Σ_{i,j} g_ij + (β/(2√N)) Σ_{i,j} g_ij τ_i τ_j`.
pub fn sk_energies(g: &[f64], configs: &ConfigSet, beta: f64) -> Result<Vec<f64>> {
    if configs.kappa() != 2 {
        return Err(Error::Unsupported("the ±1 representation needs κ = 2".into()));
    }
    let n = configs.n();
    let scale = beta / (2.0 * (n as f64).sqrt());
    let shift = scale * g.iter().sum::<f64>();
    Ok(configs
        .iter()
        .map(|s| {
            let tau: Vec<f64> = s.iter().map(|&x| if x == 0 { 1.0 } else { -1.0 }).collect();
            let mut acc = 0.0;
            for i in 0..n {
                let row: f64 = (0..n).map(|j| g[i * n + j] * tau[j]).sum();
                acc += tau[i] * row;
            }
            shift + scale * acc
        })
        .collect())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct FiniteModelConfig {
    pub n: usize,
    pub d: Magnetization,
    pub epsilon: f64,
    pub spec: CovarianceSpec,
    pub n_disorder: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_disorder: usize,
    pub n_configs: usize,
}

fn config_limit(spec: &CovarianceSpec) -> usize {
    if spec.is_zero() || spec.potts_beta().is_some() {
        MAX_POTTS_CONFIGS
    } else {
        MAX_DENSE_CONFIGS
    }
}

/// Per-disorder values of `(1/N) log Z_N(d, ε)`.
pub fn free_energy_samples(config: &FiniteModelConfig) -> Result<Vec<f64>> {
    if config.n_disorder == 0 {
        return Err(Error::InvalidInput("need at least one disorder replica".into()));
    }
    if config.d.kappa() != config.spec.kappa() {
        return Err(Error::DimensionMismatch { expected: config.spec.kappa(), found: config.d.kappa() });
    }
    let configs = enumerate_configs(config.n, &config.d, config.epsilon, config_limit(&config.spec))?;
    let sampler = HamiltonianSampler::new(&config.spec, &configs)?;
    let n = config.n as f64;
    Ok(exec::map_indexed(config.n_disorder, |r| {
        let mut rng = rng::indexed(config.seed, "disorder", r);
        log_sum_exp(&sampler.sample(&configs, &mut rng)) / n
    }))
}

/// Disorder average of `(1/N) log Z_N(d, ε)`.
pub fn estimate_fn(config: &FiniteModelConfig) -> Result<FreeEnergyEstimate> {
    let samples = free_energy_samples(config)?;
    let est = MeanEstimate::from_samples(&samples);
    let n_configs = count_configs(config.n, &config.d, config.epsilon)? as usize;
    Ok(FreeEnergyEstimate { mean: est.mean, stderr: est.stderr, n_disorder: samples.len(), n_configs })
}

/// For the `κ = 2` Potts preset, per-disorder `(1/N) log Z` computed from
/// the Potts energies and from the `±1` form on the same couplings.
pub fn sk_transform_pairs(config: &FiniteModelConfig) -> Result<Vec<(f64, f64)>> {
    let beta = config
        .spec
        .potts_beta()
        .ok_or_else(|| Error::Unsupported("the ±1 comparison needs the Potts preset".into()))?;
    let configs = enumerate_configs(config.n, &config.d, config.epsilon, MAX_POTTS_CONFIGS)?;
    if configs.kappa() != 2 {
        return Err(Error::Unsupported("the ±1 representation needs κ = 2".into()));
    }
    let n = config.n as f64;
    let rows = exec::map_indexed(config.n_disorder, |r| {
        let mut rng = rng::indexed(config.seed, "disorder", r);
        let g = potts_disorder(config.n, &mut rng);
        let direct = log_sum_exp(&potts_energies(&g, &configs, beta)) / n;
        sk_energies(&g, &configs, beta).map(|e| (direct, log_sum_exp(&e) / n))
    });
    rows.into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GuerraReport {
    pub free_energy: f64,
    pub stderr: f64,
    /// `min [𝒫(π, λ) − ⟨λ, d⟩]` over the candidates.
    pub bound: f64,
    pub bound_error: f64,
    /// `bound − free_energy`.
    pub margin: f64,
    pub pass: bool,
}

/// Checks `F̂_N(d) ≤ min_{(π,λ)} [𝒫(π, λ) − ⟨λ, d⟩] + 3(stderr + error)`.
pub fn guerra_bound_check(
    estimate: &FreeEnergyEstimate,
    spec: &CovarianceSpec,
    candidates: &[(DiscretePath, Vec<f64>)],
    settings: &EvalSettings,
) -> Result<GuerraReport> {
    let mut best: Option<(f64, f64)> = None;
    for (path, lambda) in candidates {
        let d = path.magnetization().as_slice();
        let v = parisi::eval_p(spec, path, lambda, settings)?;
        let value = v.value - lambda.iter().zip(d).map(|(l, dk)| l * dk).sum::<f64>();
        if best.is_none_or(|(b, _)| value < b) {
            best = Some((value, v.error_estimate));
        }
    }
    let (bound, bound_error) = best.ok_or_else(|| Error::InvalidInput("no candidate paths".into()))?;
    let margin = bound - estimate.mean;
    Ok(GuerraReport {
        free_energy: estimate.mean,
        stderr: estimate.stderr,
        bound,
        bound_error,
        margin,
        pass: margin >= -3.0 * (estimate.stderr + bound_error),
    })
}

/// One CSV row of a finite-volume sweep.
#[derive(Debug, Clone, Serialize)]
pub struct FiniteRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: usize,
    pub d: String,
    pub epsilon: f64,
    pub beta_or_spec_hash: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_disorder: usize,
    pub seed: u64,
}

impl FiniteRow {
    pub fn new(config: &FiniteModelConfig, estimate: &FreeEnergyEstimate) -> Self {
        let d = config.d.as_slice().iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";");
        let tag = match config.spec.potts_beta() {
            Some(b) => format!("{b}"),
            None => config.spec.digest(),
        };
        Self {
            n: config.n,
            kappa: config.d.kappa(),
            d,
            epsilon: config.epsilon,
            beta_or_spec_hash: tag,
            mean: estimate.mean,
            stderr: estimate.stderr,
            n_disorder: estimate.n_disorder,
            seed: config.seed,
        }
    }
}

#[cfg(test)]
mod tests;
