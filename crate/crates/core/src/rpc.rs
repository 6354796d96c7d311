//! Truncated Ruelle probability cascades.
//!
//! A cascade of depth `s − 1` keeps the `K` largest atoms of each node's
//! Poisson–Dirichlet point process, so its leaves are `{0..K}^{s−1}`, encoded
//! as base-`K` integers with the first digit most significant. Gaussian fields
//! indexed by the leaves are built from independent node variables, so two
//! leaves share exactly the variables of their common ancestors.
//!
//! The estimators here are deliberately independent of the recursion in
//! [`crate::parisi`] and serve as a Monte Carlo cross-check of it.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::parisi::{self, build_levels, EvalSettings};
use crate::paths::{DiscretePath, Magnetization};
use crate::rng;
use crate::stats::{chi_square, MeanEstimate};
use crate::Matrix;

/// Upper bound on the number of leaves of a single cascade.
pub const MAX_LEAVES: usize = 4_000_000;

/// Upper bound on the count-state space of the constrained sum.
pub const MAX_COUNT_STATES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// Interior weights `m_1 < … < m_{s−1}`, all in `(0, 1)`.
    pub weights: Vec<f64>,
    /// Children kept per node.
    pub k: usize,
    pub seed: u64,
}

impl CascadeConfig {
    pub fn new(weights: Vec<f64>, k: usize, seed: u64) -> Result<Self> {
        let cfg = Self { weights, k, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cascade matching the interior weights of `path`.
    pub fn for_path(path: &DiscretePath, k: usize, seed: u64) -> Result<Self> {
        let w = path.weights();
        Self::new(w[..w.len() - 1].to_vec(), k, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidInput(format!("truncation K must be at least 2, got {}", self.k)));
        }
        let mut prev = 0.0;
        for &m in &self.weights {
            if !(m > prev && m < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "cascade weights must satisfy 0 < m_1 < … < 1, got {:?}",
                    self.weights
                )));
            }
            prev = m;
        }
        let leaves = (self.k as f64).powi(self.depth() as i32);
        if leaves > MAX_LEAVES as f64 {
            return Err(Error::TooLarge(format!("{leaves} leaves exceed the limit of {MAX_LEAVES}")));
        }
        Ok(())
    }

    /// Tree depth `s − 1`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Number of overlap levels `s`.
    pub fn levels(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn leaves(&self) -> usize {
        self.k.pow(self.depth() as u32)
    }

    /// `P(r(α¹, α²) = r) = m_r − m_{r−1}` for `r = 1..=s`.
    pub fn level_probabilities(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.levels());
        let mut prev = 0.0;
        for &m in self.weights.iter().chain(std::iter::once(&1.0)) {
            out.push(m - prev);
            prev = m;
        }
        out
    }
}

/// One realisation of the truncated cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSample {
    k: usize,
    depth: usize,
    log_weights: Vec<f64>,
}

impl CascadeSample {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaves(&self) -> usize {
        self.log_weights.len()
    }

    /// `log ν_α`, normalised so that `Σ ν_α = 1`.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// `r(α, α') = 1 + |common prefix|`, and `s` when `α = α'`.
    pub fn overlap_level(&self, a: usize, b: usize) -> usize {
        overlap_level(self.k, self.depth, a, b)
    }

    /// Draws a leaf from `ν`.
    pub fn sample_leaf<R: Rng + ?Sized>(&self, cumulative: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
    }

    /// Running sums of `ν`, for [`CascadeSample::sample_leaf`].
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.log_weights
            .iter()
            .map(|l| {
                acc += l.exp();
                acc
            })
            .collect()
    }
}

fn overlap_level(k: usize, depth: usize, a: usize, b: usize) -> usize {
    if a == b {
        return depth + 1;
    }
    let mut scale = k.pow(depth as u32);
    let mut r = 1;
    loop {
        scale /= k;
        if a / scale != b / scale {
            return r;
        }
        r += 1;
    }
}

/// Unnormalised `log` leaf weights: each node's children carry the atoms
/// `(E_1 + … + E_i)^{−1/m}` for `i = 1..=k`.
fn raw_log_weights<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut log_w = vec![0.0];
    for &m in weights {
        let mut next = Vec::with_capacity(log_w.len() * k);
        for &parent in &log_w {
            let mut arrival = 0.0;
            for _ in 0..k {
                let e: f64 = Exp1.sample(rng);
                arrival += e;
                next.push(parent - arrival.ln() / m);
            }
        }
        log_w = next;
    }
    log_w
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn sample_cascade<R: Rng + ?Sized>(config: &CascadeConfig, rng: &mut R) -> Result<CascadeSample> {
    config.validate()?;
    let mut log_weights = raw_log_weights(&config.weights, config.k, rng);
    let total = log_sum_exp(&log_weights);
    for l in &mut log_weights {
        *l -= total;
    }
    Ok(CascadeSample { k: config.k, depth: config.depth(), log_weights })
}

/// Cascade number `replica` of the stream family rooted at `config.seed`.
pub fn sample_cascade_indexed(config: &CascadeConfig, replica: usize) -> Result<CascadeSample> {
    sample_cascade(config, &mut rng::indexed(config.seed, "rpc/cascade", replica))
}

/// Field increments of a path: `sqrt(∇ξ(γ_{r+1}) − ∇ξ(γ_r)1{r>0})` and
/// `sqrt(ϑ(γ_{r+1}) − ϑ(γ_r))`, `r = 0..s`.
#[derive(Debug, Clone)]
pub struct FieldFactors {
    kappa: usize,
    z: Vec<Matrix>,
    y: Vec<f64>,
}

impl FieldFactors {
    pub fn new(spec: &CovarianceSpec, path: &DiscretePath) -> Result<Self> {
        let levels = build_levels(spec, path, false)?;
        let mut y = Vec::with_capacity(levels.len());
        let mut prev = 0.0;
        for (r, g) in path.matrices().iter().enumerate() {
            let v = spec.eval_vartheta(g)?;
            let inc = v - prev;
            if inc < -1e-12 {
                return Err(Error::Monotonicity(format!("ϑ decreases by {:e} at level {}", -inc, r + 1)));
            }
            y.push(inc.max(0.0).sqrt());
            prev = v;
        }
        Ok(Self { kappa: path.kappa(), z: levels.into_iter().map(|l| l.factor).collect(), y })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn levels(&self) -> usize {
        self.y.len()
    }
}

/// Site fields `Z_i(α)` and the scalar field `Y(α)` on the leaves of one cascade.
#[derive(Debug, Clone)]
pub struct TreeFields {
    pub kappa: usize,
    pub n_sites: usize,
    /// `z[(α·n_sites + i)·κ + k] = Z_i(α)_k`.
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl TreeFields {
    pub fn site(&self, leaf: usize, i: usize) -> &[f64] {
        let start = (leaf * self.n_sites + i) * self.kappa;
        &self.z[start..start + self.kappa]
    }
}

fn check_shapes(factors: &FieldFactors, k: usize, depth: usize) -> Result<()> {
    if factors.levels() != depth + 1 {
        return Err(Error::DimensionMismatch { expected: depth + 1, found: factors.levels() });
    }
    if k < 1 {
        return Err(Error::InvalidInput("cascade needs at least one child per node".into()));
    }
    Ok(())
}

/// Accumulates node contributions depth by depth; a node at depth `r` adds
/// its level-`r` increment to every leaf below it.
fn site_fields<R: Rng + ?Sized>(factors: &FieldFactors, k: usize, n_sites: usize, rng: &mut R) -> Vec<f64> {
    let kappa = factors.kappa;
    let width = n_sites * kappa;
    let mut acc = vec![0.0; width];
    let mut eta: Vec<f64> = Vec::new();
    for (r, factor) in factors.z.iter().enumerate() {
        let nodes = k.pow(r as u32);
        let mut next = vec![0.0; nodes * width];
        for node in 0..nodes {
            let parent = if r == 0 { 0 } else { node / k };
            next[node * width..(node + 1) * width].copy_from_slice(&acc[parent * width..(parent + 1) * width]);
            for i in 0..n_sites {
                eta.clear();
                eta.extend((0..factor.ncols()).map(|_| -> f64 { StandardNormal.sample(rng) }));
                let out = &mut next[node * width + i * kappa..node * width + (i + 1) * kappa];
                for (c, e) in eta.iter().enumerate() {
                    for (a, o) in out.iter_mut().enumerate() {
                        *o += factor[(a, c)] * e;
                    }
                }
            }
        }
        acc = next;
    }
    acc
}

fn scalar_field<R: Rng + ?Sized>(factors: &FieldFactors, k: usize, rng: &mut R) -> Vec<f64> {
    let mut acc = vec![0.0];
    for (r, &sd) in factors.y.iter().enumerate() {
        let nodes = k.pow(r as u32);
        acc = (0..nodes)
            .map(|node| {
                let parent = if r == 0 { 0 } else { node / k };
                let e: f64 = StandardNormal.sample(rng);
                acc[parent] + sd * e
            })
            .collect();
    }
    acc
}

pub fn sample_tree_fields<R: Rng + ?Sized>(
    cascade: &CascadeSample,
    factors: &FieldFactors,
    n_sites: usize,
    rng: &mut R,
) -> Result<TreeFields> {
    check_shapes(factors, cascade.k, cascade.depth)?;
    let z = site_fields(factors, cascade.k, n_sites, rng);
    let y = scalar_field(factors, cascade.k, rng);
    Ok(TreeFields { kappa: factors.kappa, n_sites, z, y })
}

/// Configuration set `S` in `𝒫⁽¹⁾_N(π, λ; S)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteConstraint {
    Full,
    Magnetization(Magnetization),
}

/// `log Σ_{σ ∈ Σ^N(d)} exp Σ_i ⟨h_i, σ_i⟩` by dynamic programming over the
/// symbol counts seen so far; `h` is laid out site-major.
pub fn constrained_log_sum(h: &[f64], kappa: usize, counts: &[usize]) -> f64 {
    let n_sites = h.len() / kappa;
    let mut strides = Vec::with_capacity(kappa);
    let mut size = 1usize;
    for &c in counts {
        strides.push(size);
        size *= c + 1;
    }
    let mut dp = vec![0.0; size];
    dp[0] = 1.0;
    let mut log_scale = 0.0;
    let mut next = vec![0.0; size];
    let mut a = vec![0.0; kappa];
    for i in 0..n_sites {
        let row = &h[i * kappa..(i + 1) * kappa];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (ak, hk) in a.iter_mut().zip(row) {
            *ak = (hk - max).exp();
        }
        log_scale += max;
        next.iter_mut().for_each(|x| *x = 0.0);
        for state in 0..size {
            let v = dp[state];
            if v == 0.0 {
                continue;
            }
            for k in 0..kappa {
                if (state / strides[k]) % (counts[k] + 1) < counts[k] {
                    next[state + strides[k]] += v * a[k];
                }
            }
        }
        let peak = next.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            next.iter_mut().for_each(|x| *x /= peak);
            log_scale += peak.ln();
        }
        std::mem::swap(&mut dp, &mut next);
    }
    dp[size - 1].ln() + log_scale
}

#[derive(Debug, Clone, Serialize)]
pub struct P1Estimate {
    pub n_sites: usize,
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
}

/// `(1/N) log Σ_α ν_α Σ_{σ∈S} exp Σ_i ⟨Z_i(α) + λ, σ_i⟩` for one replica.
fn replica_p1(
    cascade: &CascadeSample,
    fields: &[f64],
    kappa: usize,
    n_sites: usize,
    lambda: &[f64],
    counts: Option<&[usize]>,
) -> f64 {
    let width = n_sites * kappa;
    let mut h = vec![0.0; width];
    let terms: Vec<f64> = (0..cascade.leaves())
        .map(|leaf| {
            let z = &fields[leaf * width..(leaf + 1) * width];
            for (j, (hj, zj)) in h.iter_mut().zip(z).enumerate() {
                *hj = zj + lambda[j % kappa];
            }
            let inner = match counts {
                None => h.chunks(kappa).map(log_sum_exp).sum::<f64>(),
                Some(c) => constrained_log_sum(&h, kappa, c),
            };
            cascade.log_weights[leaf] + inner
        })
        .collect();
    log_sum_exp(&terms) / n_sites as f64
}

/// Per-replica values of `(1/N) log Σ_α ν_α Σ_{σ∈S} exp Σ_i ⟨Z_i(α) + λ, σ_i⟩`.
///
/// Replica `i` draws its cascade and its fields from two separate streams.
/// A run with `2K` children per node therefore shares the root's first `K`
/// atoms and their fields with the `K` run, which pairs the two runs closely
/// for a single interior level.
pub fn p1_samples(
    spec: &CovarianceSpec,
    path: &DiscretePath,
    lambda: &[f64],
    n_sites: usize,
    constraint: &SiteConstraint,
    cascade: &CascadeConfig,
    replicas: usize,
) -> Result<Vec<f64>> {
    let kappa = path.kappa();
    if lambda.len() != kappa {
        return Err(Error::DimensionMismatch { expected: kappa, found: lambda.len() });
    }
    if n_sites == 0 || replicas == 0 {
        return Err(Error::InvalidInput("need at least one site and one replica".into()));
    }
    cascade.validate()?;
    if cascade.levels() != path.levels() {
        return Err(Error::DimensionMismatch { expected: path.levels(), found: cascade.levels() });
    }
    let counts = match constraint {
        SiteConstraint::Full => None,
        SiteConstraint::Magnetization(d) => {
            if d.kappa() != kappa {
                return Err(Error::DimensionMismatch { expected: kappa, found: d.kappa() });
            }
            let c = d.counts(n_sites).ok_or_else(|| {
                Error::Infeasible(format!("N·d is not integral for N = {n_sites}, d = {:?}", d.as_slice()))
            })?;
            let states: f64 = c.iter().map(|&x| (x + 1) as f64).product();
            if states > MAX_COUNT_STATES as f64 {
                return Err(Error::TooLarge(format!("{states} count states exceed {MAX_COUNT_STATES}")));
            }
            Some(c)
        }
    };
    let factors = FieldFactors::new(spec, path)?;
    Ok(exec::map_indexed(replicas, |i| {
        let sample = sample_cascade(cascade, &mut rng::indexed(cascade.seed, "rpc/p1/cascade", i)).expect("validated cascade");
        let fields = site_fields(&factors, sample.k, n_sites, &mut rng::indexed(cascade.seed, "rpc/p1/fields", i));
        replica_p1(&sample, &fields, kappa, n_sites, lambda, counts.as_deref())
    }))
}

/// Monte Carlo estimate of `𝒫⁽¹⁾_{N,ξ}(π, λ; S)` over independent cascade
/// and field replicas.
pub fn estimate_p1_n(
    spec: &CovarianceSpec,
    path: &DiscretePath,
    lambda: &[f64],
    n_sites: usize,
    constraint: &SiteConstraint,
    cascade: &CascadeConfig,
    replicas: usize,
) -> Result<P1Estimate> {
    let samples = p1_samples(spec, path, lambda, n_sites, constraint, cascade, replicas)?;
    let est = MeanEstimate::from_samples(&samples);
    Ok(P1Estimate { n_sites, mean: est.mean, stderr: est.stderr, replicas })
}

/// Outcome of a statistical check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

/// Samples one leaf pair per cascade and compares the frequencies of
/// `r(α¹, α²)` with `m_r − m_{r−1}` by a chi-square test at level 0.01.
pub fn check_overlap_law(config: &CascadeConfig, n_pairs: usize) -> Result<CheckReport> {
    config.validate()?;
    if n_pairs < 1000 {
        return Err(Error::InvalidInput(format!("need at least 1000 pairs, got {n_pairs}")));
    }
    let levels = exec::map_indexed(n_pairs, |i| {
        let mut rng = rng::indexed(config.seed, "rpc/overlap-law", i);
        let sample = sample_cascade(config, &mut rng).expect("validated cascade");
        let cum = sample.cumulative();
        let a = sample.sample_leaf(&cum, &mut rng);
        let b = sample.sample_leaf(&cum, &mut rng);
        sample.overlap_level(a, b)
    });
    let probs = config.level_probabilities();
    let mut counts = vec![0u64; probs.len()];
    for r in levels {
        counts[r - 1] += 1;
    }
    let (stat, p) = chi_square(&counts, &probs);
    let mut details = BTreeMap::new();
    details.insert("pairs".into(), n_pairs as f64);
    details.insert("k".into(), config.k as f64);
    for (r, (&c, &q)) in counts.iter().zip(&probs).enumerate() {
        details.insert(format!("freq_r{}", r + 1), c as f64 / n_pairs as f64);
        details.insert(format!("expected_r{}", r + 1), q);
    }
    Ok(CheckReport { check_name: "overlap-law".into(), statistic: stat, stderr: None, p_value: Some(p), pass: p >= 0.01, details })
}

/// Mean fraction of the `2K`-truncated cascade mass carried by the leaves
/// whose every digit is below `K`.
pub fn truncation_diagnostic(config: &CascadeConfig, replicas: usize) -> Result<CheckReport> {
    config.validate()?;
    let doubled = CascadeConfig { k: 2 * config.k, ..config.clone() };
    doubled.validate()?;
    let k2 = doubled.k;
    let depth = config.depth();
    let fractions = exec::map_indexed(replicas, |i| {
        let mut rng = rng::indexed(config.seed, "rpc/truncation", i);
        let raw = raw_log_weights(&doubled.weights, k2, &mut rng);
        let total = log_sum_exp(&raw);
        let mut kept = 0.0;
        for (leaf, l) in raw.iter().enumerate() {
            let mut x = leaf;
            let mut inside = true;
            for _ in 0..depth {
                inside &= x % k2 < config.k;
                x /= k2;
            }
            if inside {
                kept += (l - total).exp();
            }
        }
        kept
    });
    let est = MeanEstimate::from_samples(&fractions);
    let lost = 1.0 - est.mean;
    let mut details = BTreeMap::new();
    details.insert("k".into(), config.k as f64);
    details.insert("kept_fraction".into(), est.mean);
    Ok(CheckReport {
        check_name: "truncation".into(),
        statistic: lost,
        stderr: Some(est.stderr),
        p_value: None,
        pass: lost <= 0.01,
        details,
    })
}

/// Test function `f` of the replicas `1..=n` in a Ghirlanda–Guerra check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GgTest {
    One,
    Q12,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GgConfig {
    pub n: usize,
    /// `ψ(q) = Σ_j c_j q^j`, degree at most 3.
    pub psi: Vec<f64>,
    pub test: GgTest,
    pub replicas: usize,
    pub batches: usize,
}

/// Scalar overlaps `⟨γ_r^{∘p} w, w⟩` of a path, `r = 1..=s`.
pub fn scalar_overlaps(path: &DiscretePath, p: u32, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != path.kappa() {
        return Err(Error::DimensionMismatch { expected: path.kappa(), found: w.len() });
    }
    Ok(path
        .matrices()
        .iter()
        .map(|g| {
            let mut acc = 0.0;
            for a in 0..w.len() {
                for b in 0..w.len() {
                    acc += g[(a, b)].powi(p as i32) * w[a] * w[b];
                }
            }
            acc
        })
        .collect())
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Estimates the residual
/// `E⟨f ψ(Q_{1,n+1})⟩ − (1/n)E⟨f⟩E⟨ψ(Q_{1,2})⟩ − (1/n) Σ_{ℓ=2}^{n} E⟨f ψ(Q_{1,ℓ})⟩`
/// with replicas drawn i.i.d. from each cascade. `overlaps[r − 1]` is the
/// scalar overlap of two leaves at level `r`. The standard error comes from
/// the spread of per-batch residuals.
pub fn check_gg_identities(config: &CascadeConfig, overlaps: &[f64], gg: &GgConfig) -> Result<CheckReport> {
    config.validate()?;
    if overlaps.len() != config.levels() {
        return Err(Error::DimensionMismatch { expected: config.levels(), found: overlaps.len() });
    }
    if gg.n < 2 || gg.psi.len() > 4 || gg.batches < 2 || gg.replicas < gg.batches {
        return Err(Error::InvalidInput(
            "GG check needs n ≥ 2, deg ψ ≤ 3 and at least two batches of replicas".into(),
        ));
    }
    let n = gg.n;
    // (f·A_{1,n+1}, f, A_{1,2}, Σ_{ℓ=2}^{n} f·A_{1,ℓ})
    let rows = exec::map_indexed(gg.replicas, |i| {
        let mut rng = rng::indexed(config.seed, "rpc/gg", i);
        let sample = sample_cascade(config, &mut rng).expect("validated cascade");
        let cum = sample.cumulative();
        let leaves: Vec<usize> = (0..=n).map(|_| sample.sample_leaf(&cum, &mut rng)).collect();
        let q = |a: usize, b: usize| overlaps[sample.overlap_level(leaves[a], leaves[b]) - 1];
        let f = match gg.test {
            GgTest::One => 1.0,
            GgTest::Q12 => q(0, 1),
        };
        let a = |l: usize| poly(&gg.psi, q(0, l));
        let mid: f64 = (1..n).map(|l| f * a(l)).sum();
        [f * a(n), f, a(1), mid]
    });
    let per_batch = gg.replicas / gg.batches;
    let nf = n as f64;
    let residuals: Vec<f64> = (0..gg.batches)
        .map(|b| {
            let chunk = &rows[b * per_batch..(b + 1) * per_batch];
            let mut mean = [0.0; 4];
            for row in chunk {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= chunk.len() as f64;
            }
            mean[0] - mean[1] * mean[2] / nf - mean[3] / nf
        })
        .collect();
    let est = MeanEstimate::from_samples(&residuals);
    let pass = if est.stderr > 0.0 { est.mean.abs() <= 3.0 * est.stderr } else { est.mean.abs() <= 1e-12 };
    let mut details = BTreeMap::new();
    details.insert("n".into(), nf);
    details.insert("replicas".into(), gg.replicas as f64);
    details.insert("batches".into(), gg.batches as f64);
    details.insert("k".into(), config.k as f64);
    Ok(CheckReport {
        check_name: "gg".into(),
        statistic: est.mean,
        stderr: Some(est.stderr),
        p_value: None,
        pass,
        details,
    })
}

/// Empirical `E[Z(α)Z(α')ᵀ]` and `E[Y(α)Y(α')]` against `∇ξ(γ_r)` and
/// `ϑ(γ_r)` for one leaf pair at every level `r`, over independent replays.
/// The statistic is the largest entrywise z-score.
pub fn check_field_covariance(spec: &CovarianceSpec, path: &DiscretePath, replays: usize, seed: u64) -> Result<CheckReport> {
    if replays < 2 {
        return Err(Error::InvalidInput("need at least two replays".into()));
    }
    let factors = FieldFactors::new(spec, path)?;
    let kappa = path.kappa();
    let s = path.levels();
    let depth = s - 1;
    let k: usize = 2;
    // partner of leaf 0 at level r: first digit differing at depth r
    let partner = |r: usize| if r == s { 0 } else { k.pow((depth - r) as u32) };
    let stride = s * (kappa * kappa + 1);
    let rows = exec::map_indexed(replays, |i| {
        let mut rng = rng::indexed(seed, "rpc/field-covariance", i);
        let z = site_fields(&factors, k, 1, &mut rng);
        let y = scalar_field(&factors, k, &mut rng);
        let mut out = Vec::with_capacity(stride);
        for r in 1..=s {
            let b = partner(r);
            for a1 in 0..kappa {
                for a2 in 0..kappa {
                    out.push(z[a1] * z[b * kappa + a2]);
                }
            }
            out.push(y[0] * y[b]);
        }
        out
    });
    let mut worst: f64 = 0.0;
    let mut details = BTreeMap::new();
    for r in 1..=s {
        let g = &path.matrices()[r - 1];
        let grad = spec.eval_grad_xi(g)?;
        let theta = spec.eval_vartheta(g)?;
        for j in 0..=kappa * kappa {
            let col: Vec<f64> = rows.iter().map(|row| row[(r - 1) * (kappa * kappa + 1) + j]).collect();
            let est = MeanEstimate::from_samples(&col);
            let target = if j < kappa * kappa { grad[(j / kappa, j % kappa)] } else { theta };
            let diff = est.mean - target;
            let z = if est.stderr > 0.0 {
                diff.abs() / est.stderr
            } else if diff.abs() <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(z);
        }
        details.insert(format!("theta_r{r}"), theta);
    }
    details.insert("replays".into(), replays as f64);
    Ok(CheckReport {
        check_name: "field-covariance".into(),
        statistic: worst,
        stderr: None,
        p_value: None,
        pass: worst <= 3.0,
        details,
    })
}

/// Full-set estimates at several `N` against the recursion value of
/// `𝒫⁽¹⁾(π, λ)`.
///
/// The truncation bias at each `N` is the paired mean difference between the
/// `K` run and a `2K` control on the same replica streams. Passes when every
/// estimate is within `3σ` of the reference and every bias is at most
/// `bias_tol` in absolute value.
#[allow(clippy::too_many_arguments)]
pub fn check_site_factorization(
    spec: &CovarianceSpec,
    path: &DiscretePath,
    lambda: &[f64],
    ns: &[usize],
    cascade: &CascadeConfig,
    replicas: usize,
    bias_tol: f64,
    settings: &EvalSettings,
) -> Result<(CheckReport, Vec<P1Estimate>)> {
    let reference = parisi::eval_p1(spec, path, lambda, settings)?.value;
    let control = CascadeConfig { k: 2 * cascade.k, ..cascade.clone() };
    let mut rows = Vec::with_capacity(ns.len());
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut details = BTreeMap::new();
    details.insert("reference".into(), reference);
    for &n in ns {
        let base = p1_samples(spec, path, lambda, n, &SiteConstraint::Full, cascade, replicas)?;
        let doubled = p1_samples(spec, path, lambda, n, &SiteConstraint::Full, &control, replicas)?;
        let est = MeanEstimate::from_samples(&base);
        let diffs: Vec<f64> = base.iter().zip(&doubled).map(|(a, b)| a - b).collect();
        let bias = MeanEstimate::from_samples(&diffs);
        let diff = est.mean - reference;
        pass &= diff.abs() <= 3.0 * est.stderr && bias.mean.abs() <= bias_tol;
        worst = worst.max(diff.abs() / est.stderr.max(f64::MIN_POSITIVE));
        details.insert(format!("estimate_n{n}"), est.mean);
        details.insert(format!("stderr_n{n}"), est.stderr);
        details.insert(format!("bias_n{n}"), bias.mean);
        details.insert(format!("bias_stderr_n{n}"), bias.stderr);
        rows.push(P1Estimate { n_sites: n, mean: est.mean, stderr: est.stderr, replicas });
    }
    let report = CheckReport {
        check_name: "site-factorization".into(),
        statistic: worst,
        stderr: rows.iter().map(|r| r.stderr).reduce(f64::max),
        p_value: None,
        pass,
        details,
    };
    Ok((report, rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityRow {
    pub n_sites: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// `target − estimate`.
    pub gap: f64,
    /// `κ log(N + 1) / (m_1 N)`.
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub target: f64,
    pub rows: Vec<DualityRow>,
    pub pass: bool,
}

/// `inf_λ [𝒫⁽¹⁾(π, λ) − ⟨λ, d⟩]` with `d` the magnetization of `path`.
pub fn dual_target(spec: &CovarianceSpec, path: &DiscretePath, settings: &EvalSettings) -> Result<f64> {
    Ok(parisi::eval_parisi(spec, path, settings)?.value - parisi::eval_p2(spec, path)?)
}

/// Constrained estimates at `λ = 0` and `S = Σ^N(d)` for increasing `N`.
/// Passes when every gap to the dual target lies in `[−3σ, bound + 3σ]` and
/// no gap exceeds its predecessor by more than the combined `3σ`.
pub fn check_duality(
    spec: &CovarianceSpec,
    path: &DiscretePath,
    ns: &[usize],
    cascade: &CascadeConfig,
    replicas: usize,
    settings: &EvalSettings,
) -> Result<DualityReport> {
    let target = dual_target(spec, path, settings)?;
    let d = path.magnetization().clone();
    let kappa = d.kappa() as f64;
    let m1 = path.weights()[0];
    let lambda = vec![0.0; d.kappa()];
    let constraint = SiteConstraint::Magnetization(d);
    let mut rows: Vec<DualityRow> = Vec::with_capacity(ns.len());
    let mut pass = true;
    for &n in ns {
        let est = estimate_p1_n(spec, path, &lambda, n, &constraint, cascade, replicas)?;
        let gap = target - est.mean;
        let bound = kappa * ((n + 1) as f64).ln() / (m1 * n as f64);
        pass &= gap >= -3.0 * est.stderr && gap <= bound + 3.0 * est.stderr;
        if let Some(prev) = rows.last() {
            pass &= gap <= prev.gap + 3.0 * prev.stderr.hypot(est.stderr);
        }
        rows.push(DualityRow { n_sites: n, estimate: est.mean, stderr: est.stderr, gap, bound });
    }
    Ok(DualityReport { target, rows, pass })
}
