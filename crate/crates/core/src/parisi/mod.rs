//! The Parisi functional: the nested Gaussian recursion `𝒫⁽¹⁾`, the
//! correction `𝒫⁽²⁾`, and the dual over the Lagrange multiplier `λ`.
//!
//! For a path with levels `γ_1 ⪯ … ⪯ γ_s` and weights `m_1 < … < m_s = 1`,
//! the increments are `Δ_r = ∇ξ(γ_{r+1}) − ∇ξ(γ_r)·1{r>0}` for `0 ≤ r < s`,
//! and
//!
//! ```text
//! X_s = log Σ_k exp(Σ_r z_r + λ)_k,      z_r ~ N(0, Δ_r) independent
//! X_r = (1/m_r) log E_r exp(m_r X_{r+1}),  1 ≤ r < s
//! X_0 = E_0 X_1.
//! ```
//!
//! Every `X_r` commutes with shifts along `𝟏`, so the `𝟏`-component of the
//! outermost increment drops out and, whenever `𝟏` is an eigenvector of
//! `Δ_r`, the `𝟏`-component of an inner increment contributes the constant
//! `m_r·𝟏ᵀΔ_r𝟏/(2κ²)`. The remaining field lives in `𝟏⊥`. This reduction is
//! on by default and can be switched off to evaluate the full κ-dimensional
//! integrals.

mod grid;
mod recursion;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::nelder_mead::NelderMead;
use crate::paths::{psd_factor, spectral_norm, sqrt_psd, DiscretePath, PSD_TOL};
use crate::Matrix;

use grid::LineProblem;
use recursion::NodeSet;

/// How the Gaussian expectations are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Picks one of the others from the problem shape.
    Auto,
    /// Tensor Gauss–Hermite quadrature per level.
    Quadrature,
    /// Nested Monte Carlo with common random numbers per level.
    MonteCarlo,
    /// One-dimensional grid convolution; needs every reduced increment to
    /// act along one common direction (always the case for κ = 2 Potts).
    Grid,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Auto => "auto",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
            Method::Grid => "grid",
        };
        f.write_str(s)
    }
}

/// Tensor quadrature is used while `Π_r n^{k_r}` stays below this.
pub const MAX_TENSOR_POINTS: f64 = 1e8;

/// Under [`Method::Auto`], line problems whose largest per-level standard
/// deviation exceeds this go to the grid engine.
const GRID_SIGMA_THRESHOLD: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub method: Method,
    pub nodes_per_dim: usize,
    pub samples_per_level: usize,
    pub grid_step: f64,
    pub seed: u64,
    /// Compute an error estimate by one refinement step (or batch spread).
    pub estimate_error: bool,
    /// Integrate the `𝟏`-direction analytically.
    pub reduce: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            nodes_per_dim: 24,
            samples_per_level: 400,
            grid_step: 0.2,
            seed: 0,
            estimate_error: true,
            reduce: true,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_dim < 2 || self.nodes_per_dim + 4 > crate::quadrature::MAX_NODES {
            return Err(Error::InvalidInput(format!("nodes_per_dim must be in 2..={}", crate::quadrature::MAX_NODES - 4)));
        }
        if self.samples_per_level < 100 {
            return Err(Error::InvalidInput("samples_per_level must be >= 100".into()));
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::InvalidInput("grid_step must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn with_nodes(self, nodes_per_dim: usize) -> Self {
        Self { nodes_per_dim, ..self }
    }
}

/// An evaluated functional with its numerical error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParisiValue {
    pub value: f64,
    pub error_estimate: f64,
    pub lambda: Vec<f64>,
    pub method: Method,
    pub nodes_or_samples: usize,
    pub seed: u64,
    /// False when the λ search stopped at its iteration cap.
    pub converged: bool,
}

/// One level of the recursion after reduction: `z_r = factor · g`.
#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub factor: Matrix,
    /// Constant contributed by an integrated-out `𝟏`-component.
    pub shift: f64,
    /// Tilt `m_r` (unused at level 0).
    pub m: f64,
}

fn increments(spec: &CovarianceSpec, path: &DiscretePath) -> Result<Vec<Matrix>> {
    if spec.kappa() != path.kappa() {
        return Err(Error::DimensionMismatch { expected: spec.kappa(), found: path.kappa() });
    }
    let grads = path.matrices().iter().map(|g| spec.eval_grad_xi(g)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(grads.len());
    for r in 0..grads.len() {
        let mut delta = if r == 0 { grads[0].clone() } else { &grads[r] - &grads[r - 1] };
        delta = (&delta + delta.transpose()) * 0.5;
        out.push(delta);
    }
    Ok(out)
}

fn projector(kappa: usize) -> Matrix {
    Matrix::identity(kappa, kappa) - Matrix::from_element(kappa, kappa, 1.0 / kappa as f64)
}

pub(crate) fn build_levels(spec: &CovarianceSpec, path: &DiscretePath, reduce: bool) -> Result<Vec<Level>> {
    let kappa = path.kappa();
    let deltas = increments(spec, path)?;
    let p = projector(kappa);
    let ones = DVector::from_element(kappa, 1.0);
    let mut levels = Vec::with_capacity(deltas.len());
    for (r, delta) in deltas.iter().enumerate() {
        let m = if r == 0 { 0.0 } else { path.weights()[r - 1] };
        let norm = spectral_norm(delta);
        let min = crate::paths::min_eigenvalue(delta);
        if min < -PSD_TOL * (1.0 + norm) {
            return Err(Error::Monotonicity(format!(
                "increment {r} of ∇ξ along the path has eigenvalue {min:e}"
            )));
        }
        if delta.iter().all(|x| *x == 0.0) {
            levels.push(Level { factor: Matrix::zeros(kappa, 0), shift: 0.0, m });
            continue;
        }
        if !reduce {
            levels.push(Level { factor: sqrt_psd(delta)?, shift: 0.0, m });
            continue;
        }
        let d1 = delta * &ones;
        let v = ones.dot(&d1) / (kappa * kappa) as f64;
        let eigen_one = (&d1 - &ones * (v * kappa as f64)).amax() <= 1e-12 * (1.0 + norm);
        if r == 0 || eigen_one {
            let projected = &p * delta * &p;
            let projected = (&projected + projected.transpose()) * 0.5;
            let shift = if r == 0 { 0.0 } else { 0.5 * m * v };
            levels.push(Level { factor: psd_factor(&projected)?, shift, m });
        } else {
            levels.push(Level { factor: psd_factor(delta)?, shift: 0.0, m });
        }
    }
    Ok(levels)
}

enum Plan {
    Nodes { primary: Vec<NodeSet>, refined: Option<Vec<NodeSet>> },
    MonteCarlo { batches: Vec<Vec<NodeSet>> },
    Grid(LineProblem),
}

/// `𝒫⁽¹⁾(π, ·)` prepared for repeated evaluation at different `λ`.
pub struct Evaluator {
    kappa: usize,
    levels: Vec<Level>,
    shift: f64,
    plan: Plan,
    method: Method,
    settings: EvalSettings,
}

impl Evaluator {
    pub fn new(spec: &CovarianceSpec, path: &DiscretePath, settings: &EvalSettings) -> Result<Self> {
        settings.validate()?;
        let levels = build_levels(spec, path, settings.reduce)?;
        let kappa = path.kappa();
        let shift: f64 = levels.iter().map(|l| l.shift).sum();
        let line = if settings.reduce { LineProblem::from_levels(&levels, kappa) } else { None };
        let tensor_points: f64 =
            levels.iter().map(|l| (settings.nodes_per_dim as f64).powi(l.factor.ncols() as i32)).product();
        let method = match settings.method {
            Method::Auto => match &line {
                Some(lp) if lp.max_sigma() > GRID_SIGMA_THRESHOLD => Method::Grid,
                _ if tensor_points <= MAX_TENSOR_POINTS => Method::Quadrature,
                Some(_) => Method::Grid,
                None => Method::MonteCarlo,
            },
            Method::Quadrature if tensor_points > MAX_TENSOR_POINTS => {
                return Err(Error::TooLarge(format!(
                    "tensor quadrature needs {tensor_points:e} points (limit {MAX_TENSOR_POINTS:e})"
                )))
            }
            m => m,
        };
        let plan = match method {
            Method::Quadrature => {
                let primary = recursion::quadrature_nodes(&levels, settings.nodes_per_dim)?;
                let refined = if settings.estimate_error {
                    Some(recursion::quadrature_nodes(&levels, settings.nodes_per_dim + 4)?)
                } else {
                    None
                };
                Plan::Nodes { primary, refined }
            }
            Method::MonteCarlo => {
                Plan::MonteCarlo { batches: recursion::monte_carlo_nodes(&levels, settings.samples_per_level, settings.seed) }
            }
            Method::Grid => match line {
                Some(lp) => Plan::Grid(lp),
                None => {
                    return Err(Error::Unsupported(
                        "grid evaluation needs reduced increments along a single direction".into(),
                    ))
                }
            },
            Method::Auto => unreachable!(),
        };
        Ok(Self { kappa, levels, shift, plan, method, settings: *settings })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.kappa {
            return Err(Error::DimensionMismatch { expected: self.kappa, found: lambda.len() });
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("lambda must be finite".into()));
        }
        Ok(())
    }

    /// `𝒫⁽¹⁾(π, λ)` at the primary resolution.
    pub fn value(&self, lambda: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        let core = match &self.plan {
            Plan::Nodes { primary, .. } => recursion::evaluate(primary, &self.levels, lambda),
            Plan::MonteCarlo { batches } => {
                let vals: Vec<f64> = batches.iter().map(|b| recursion::evaluate(b, &self.levels, lambda)).collect();
                crate::exec::pairwise_sum(&vals) / vals.len() as f64
            }
            Plan::Grid(lp) => lp.evaluate(lambda, self.settings.grid_step),
        };
        Ok(core + self.shift)
    }

    /// Value with its error estimate.
    pub fn value_with_error(&self, lambda: &[f64]) -> Result<(f64, f64)> {
        self.check_lambda(lambda)?;
        match &self.plan {
            Plan::Nodes { primary, refined } => {
                let v = recursion::evaluate(primary, &self.levels, lambda);
                let err = match refined {
                    Some(r) => (recursion::evaluate(r, &self.levels, lambda) - v).abs(),
                    None => 0.0,
                };
                Ok((v + self.shift, err))
            }
            Plan::MonteCarlo { batches } => {
                let vals: Vec<f64> = batches.iter().map(|b| recursion::evaluate(b, &self.levels, lambda)).collect();
                let est = crate::stats::MeanEstimate::from_samples(&vals);
                Ok((est.mean + self.shift, if self.settings.estimate_error { est.stderr } else { 0.0 }))
            }
            Plan::Grid(lp) => {
                let h = self.settings.grid_step;
                let v = lp.evaluate(lambda, h);
                let err = if self.settings.estimate_error { (lp.evaluate(lambda, 0.5 * h) - v).abs() } else { 0.0 };
                Ok((v + self.shift, err))
            }
        }
    }

    fn nodes_or_samples(&self) -> usize {
        match self.method {
            Method::MonteCarlo => self.settings.samples_per_level,
            Method::Grid => (1.0 / self.settings.grid_step).round() as usize,
            _ => self.settings.nodes_per_dim,
        }
    }

    fn wrap(&self, value: f64, error_estimate: f64, lambda: Vec<f64>, converged: bool) -> ParisiValue {
        ParisiValue {
            value,
            error_estimate,
            lambda,
            method: self.method,
            nodes_or_samples: self.nodes_or_samples(),
            seed: self.settings.seed,
            converged,
        }
    }
}

/// `𝒫⁽¹⁾(π, λ)`.
pub fn eval_p1(spec: &CovarianceSpec, path: &DiscretePath, lambda: &[f64], settings: &EvalSettings) -> Result<ParisiValue> {
    let ev = Evaluator::new(spec, path, settings)?;
    let (v, e) = ev.value_with_error(lambda)?;
    Ok(ev.wrap(v, e, lambda.to_vec(), true))
}

/// `𝒫⁽²⁾(π) = ½ Σ_r (m_r − m_{r−1}) ϑ(γ_r) − ½ ϑ(diag d)`.
pub fn eval_p2(spec: &CovarianceSpec, path: &DiscretePath) -> Result<f64> {
    if !path.is_terminal() {
        return Err(Error::InvalidPath("the last matrix of the path must equal diag(d)".into()));
    }
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (&m, g) in path.weights().iter().zip(path.matrices()) {
        acc += (m - prev) * spec.eval_vartheta(g)?;
        prev = m;
    }
    Ok(0.5 * acc - 0.5 * spec.eval_vartheta(&path.magnetization().diag())?)
}

/// `𝒫(π, λ) = 𝒫⁽¹⁾(π, λ) + 𝒫⁽²⁾(π)`.
pub fn eval_p(spec: &CovarianceSpec, path: &DiscretePath, lambda: &[f64], settings: &EvalSettings) -> Result<ParisiValue> {
    let p2 = eval_p2(spec, path)?;
    let mut v = eval_p1(spec, path, lambda, settings)?;
    v.value += p2;
    Ok(v)
}

/// Search controls for the λ-infimum.
pub fn lambda_search() -> NelderMead {
    NelderMead { max_iter: 400, f_tol: 1e-14, x_tol: 1e-9, initial_step: 0.25, restarts: 3 }
}

/// `inf_λ [𝒫(π, λ) − ⟨λ, d⟩]`.
///
/// The objective is invariant under `λ ↦ λ + c𝟏`, so one coordinate is held
/// at zero: the one with the largest `d_k` (the last one for balanced `d`).
/// The search starts from `λ_k = log(d_k/d_anchor)`, the exact minimizer when
/// `ξ ≡ 0`.
pub fn eval_parisi(spec: &CovarianceSpec, path: &DiscretePath, settings: &EvalSettings) -> Result<ParisiValue> {
    let p2 = eval_p2(spec, path)?;
    let ev = Evaluator::new(spec, path, settings)?;
    let d = path.magnetization().as_slice().to_vec();
    let kappa = d.len();
    let anchor = (0..kappa).rev().max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(kappa - 1);
    let free: Vec<usize> = (0..kappa).filter(|&k| k != anchor).collect();
    // entries with d_k = 0 push λ_k to −∞; clamp the start and let the search run
    let floor = 1e-300f64;
    let start: Vec<f64> = free.iter().map(|&k| (d[k].max(floor) / d[anchor]).ln().max(-700.0)).collect();
    let embed = |mu: &[f64]| {
        let mut lam = vec![0.0; kappa];
        for (&k, &x) in free.iter().zip(mu) {
            lam[k] = x;
        }
        lam
    };
    let mut failure = None;
    let objective = |mu: &[f64]| {
        let lam = embed(mu);
        match ev.value(&lam) {
            Ok(v) => v - lam.iter().zip(&d).map(|(l, dk)| l * dk).sum::<f64>(),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let best = lambda_search().minimize(objective, &start);
    if let Some(e) = failure {
        return Err(e);
    }
    let lam = embed(&best.x);
    let (p1, err) = ev.value_with_error(&lam)?;
    let dot: f64 = lam.iter().zip(&d).map(|(l, dk)| l * dk).sum();
    Ok(ev.wrap(p1 + p2 - dot, err, lam, best.converged))
}

/// Step of the central differences in [`grad_lambda`].
pub const GRAD_STEP: f64 = 1e-4;

/// `∇_λ 𝒫⁽¹⁾(π, λ)` by central finite differences.
pub fn grad_lambda(spec: &CovarianceSpec, path: &DiscretePath, lambda: &[f64], settings: &EvalSettings) -> Result<Vec<f64>> {
    let ev = Evaluator::new(spec, path, settings)?;
    ev.check_lambda(lambda)?;
    let mut out = Vec::with_capacity(lambda.len());
    for k in 0..lambda.len() {
        let mut up = lambda.to_vec();
        let mut down = lambda.to_vec();
        up[k] += GRAD_STEP;
        down[k] -= GRAD_STEP;
        out.push((ev.value(&up)? - ev.value(&down)?) / (2.0 * GRAD_STEP));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
