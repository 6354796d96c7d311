//! Minimization of the Parisi functional over discrete paths and the
//! low-temperature ground-state extrapolation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::nelder_mead::NelderMead;
use crate::parisi::{eval_p2, eval_parisi, EvalSettings, Evaluator, ParisiValue};
use crate::paths::{DiscretePath, Magnetization, SymmetricPath};
use crate::stats::fit_inverse;
use crate::Matrix;

/// Unconstrained coordinates are clamped to this range so that sigmoids stay
/// strictly inside `(0, 1)`.
const COORD_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Number of levels `s` of the path.
    pub levels: usize,
    /// Random starts in addition to the warm starts.
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative tolerance on the objective for the simplex search.
    pub value_tol: f64,
    pub seed: u64,
    /// Record every objective evaluation.
    pub trace: bool,
    pub eval: EvalSettings,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { levels: 2, restarts: 1, max_iter: 600, value_tol: 1e-11, seed: 0, trace: false, eval: EvalSettings::default() }
    }
}

impl OptimizeConfig {
    fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::InvalidInput("levels must be >= 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        self.eval.validate()
    }

    fn search(&self) -> NelderMead {
        NelderMead { max_iter: self.max_iter, f_tol: self.value_tol, x_tol: 1e-7, initial_step: 1.0, restarts: 2 }
    }
}

/// One objective evaluation during a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub levels: usize,
    pub start: usize,
    pub evaluation: usize,
    pub value: f64,
    pub weights: Vec<f64>,
    pub atoms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMinimum {
    pub path: SymmetricPath,
    pub value: ParisiValue,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralMinimum {
    /// `γ_11` of each level.
    pub diagonal: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: ParisiValue,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x.clamp(-COORD_CLAMP, COORD_CLAMP)).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-13, 1.0 - 1e-13);
    (p / (1.0 - p)).ln()
}

/// Stick-breaking chain: `v_r = v_{r−1} + (1 − v_{r−1})·σ(x_r)` from `v_0 = start`.
fn chain(xs: &[f64], start: f64) -> Vec<f64> {
    let mut prev = start;
    xs.iter()
        .map(|&x| {
            prev += (1.0 - prev) * sigmoid(x);
            prev
        })
        .collect()
}

fn unchain(vs: &[f64], start: f64) -> Vec<f64> {
    let mut prev = start;
    vs.iter()
        .map(|&v| {
            let x = logit((v - prev) / (1.0 - prev));
            prev = v;
            x
        })
        .collect()
}

/// `(m_1..m_{s−1}, q_1..q_{s−1})` packed into `2(s−1)` coordinates.
fn decode(coords: &[f64]) -> Result<SymmetricPath> {
    let k = coords.len() / 2;
    let mut m = chain(&coords[..k], 0.0);
    let mut q = chain(&coords[k..], 0.0);
    m.push(1.0);
    q.push(1.0);
    SymmetricPath::new(m, q)
}

fn encode(path: &SymmetricPath) -> Vec<f64> {
    let s = path.levels();
    let mut out = unchain(&path.weights()[..s - 1], 0.0);
    out.extend(unchain(&path.atoms()[..s - 1], 0.0));
    out
}

fn symmetric_objective(spec: &CovarianceSpec, path: &SymmetricPath, settings: &EvalSettings) -> Result<f64> {
    let dp = path.to_discrete(spec.kappa())?;
    let ev = Evaluator::new(spec, &dp, settings)?;
    Ok(ev.value(&vec![0.0; spec.kappa()])? + eval_p2(spec, &dp)?)
}

/// Duplicates level `r` of `path`, splitting its weight interval in half.
fn duplicate_level(path: &SymmetricPath, r: usize) -> Result<SymmetricPath> {
    let mut m = path.weights().to_vec();
    let mut q = path.atoms().to_vec();
    let lo = if r == 0 { 0.0 } else { m[r - 1] };
    m.insert(r, 0.5 * (lo + m[r]));
    q.insert(r, q[r]);
    SymmetricPath::new(m, q)
}

/// Minimizes `𝒫(π, 0)` over symmetric paths with `config.levels` levels.
///
/// Paths with `s − 1` levels are optimized first, then every duplicated
/// level of the incumbent seeds a search at the next size, plus
/// `config.restarts` random starts per size.
pub fn minimize_symmetric(spec: &CovarianceSpec, config: &OptimizeConfig) -> Result<SymmetricMinimum> {
    config.validate()?;
    if !spec.check_symmetry() {
        return Err(Error::Unsupported("the λ = 0 reduction needs a permutation-symmetric covariance".into()));
    }
    let mut best_path = SymmetricPath::constant();
    let mut best_value = symmetric_objective(spec, &best_path, &config.eval)?;
    let mut trace = Vec::new();
    let mut rng = crate::rng::stream(config.seed, "minimize-symmetric");
    for s in 2..=config.levels {
        let mut starts: Vec<SymmetricPath> = (0..best_path.levels()).map(|r| duplicate_level(&best_path, r)).collect::<Result<_>>()?;
        for _ in 0..config.restarts {
            let coords: Vec<f64> = (0..2 * (s - 1)).map(|_| rng.random_range(-3.0..3.0)).collect();
            starts.push(decode(&coords)?);
        }
        // the incumbent stays admissible at every size
        let mut level_best = (duplicate_level(&best_path, best_path.levels() - 1)?, best_value);
        for (start_idx, start) in starts.iter().enumerate() {
            let mut evaluation = 0;
            let mut rows = Vec::new();
            let objective = |x: &[f64]| {
                let path = match decode(x) {
                    Ok(p) => p,
                    Err(_) => return f64::INFINITY,
                };
                let v = symmetric_objective(spec, &path, &config.eval).unwrap_or(f64::INFINITY);
                if config.trace {
                    rows.push(TraceRow {
                        levels: s,
                        start: start_idx,
                        evaluation,
                        value: v,
                        weights: path.weights().to_vec(),
                        atoms: path.atoms().to_vec(),
                    });
                }
                evaluation += 1;
                v
            };
            let found = config.search().minimize(objective, &encode(start));
            trace.extend(rows);
            if found.value < level_best.1 {
                level_best = (decode(&found.x)?, found.value);
            }
        }
        best_path = level_best.0;
        best_value = level_best.1;
    }
    let dp = best_path.to_discrete(spec.kappa())?;
    let ev = Evaluator::new(spec, &dp, &config.eval)?;
    let lambda = vec![0.0; spec.kappa()];
    let (p1, err) = ev.value_with_error(&lambda)?;
    let value = ParisiValue {
        value: p1 + eval_p2(spec, &dp)?,
        error_estimate: err,
        lambda,
        method: ev.method(),
        nodes_or_samples: config.eval.nodes_per_dim,
        seed: config.eval.seed,
        converged: true,
    };
    Ok(SymmetricMinimum { path: best_path, value, trace })
}

/// The κ = 2 path with `γ_11 = d_1² + (d_1 − d_1²)·t_r`.
pub fn k2_path(d: &Magnetization, weights: &[f64], t: &[f64]) -> Result<DiscretePath> {
    if d.kappa() != 2 {
        return Err(Error::Unsupported("general paths are only parametrized for kappa = 2".into()));
    }
    let (d1, d2) = (d.as_slice()[0], d.as_slice()[1]);
    let gammas = t
        .iter()
        .map(|&t| {
            let a = d1 * d1 + (d1 - d1 * d1) * t;
            Matrix::from_row_slice(2, 2, &[a, d1 - a, d1 - a, d2 - d1 + a])
        })
        .collect();
    DiscretePath::new(weights.to_vec(), gammas, d.clone())
}

/// Minimizes `inf_λ[𝒫(π, λ) − ⟨λ, d⟩]` over all κ = 2 paths in `Π_d` with
/// `config.levels` levels.
pub fn minimize_general_k2(spec: &CovarianceSpec, d: &Magnetization, config: &OptimizeConfig) -> Result<GeneralMinimum> {
    config.validate()?;
    if spec.kappa() != 2 || d.kappa() != 2 {
        return Err(Error::Unsupported("minimize_general_k2 needs kappa = 2".into()));
    }
    let s = config.levels;
    let decode = |x: &[f64]| -> Result<DiscretePath> {
        let k = x.len() / 2;
        let mut m = chain(&x[..k], 0.0);
        let mut t = chain(&x[k..], 0.0);
        m.push(1.0);
        t.push(1.0);
        k2_path(d, &m, &t)
    };
    let settings = EvalSettings { estimate_error: false, ..config.eval };
    let objective = |x: &[f64]| match decode(x).and_then(|p| eval_parisi(spec, &p, &settings)) {
        Ok(v) => v.value,
        Err(_) => f64::INFINITY,
    };
    let mut rng = crate::rng::stream(config.seed, "minimize-general-k2");
    let mut starts: Vec<Vec<f64>> = vec![{
        let mut x = unchain(&(1..s).map(|r| r as f64 / s as f64).collect::<Vec<_>>(), 0.0);
        x.extend(unchain(&(1..s).map(|r| r as f64 / s as f64).collect::<Vec<_>>(), 0.0));
        x
    }];
    for _ in 0..config.restarts {
        starts.push((0..2 * (s - 1)).map(|_| rng.random_range(-3.0..3.0)).collect());
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let found = config.search().minimize(objective, start);
        if best.as_ref().is_none_or(|b| found.value < b.1) {
            best = Some((found.x, found.value));
        }
    }
    let (x, _) = best.expect("at least one start");
    let path = decode(&x)?;
    let value = eval_parisi(spec, &path, &config.eval)?;
    let diagonal = path.matrices().iter().map(|g| g[(0, 0)]).collect();
    Ok(GeneralMinimum { diagonal, weights: path.weights().to_vec(), value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub levels: usize,
    /// `(1/β)·inf 𝒫`.
    pub value: f64,
    pub error_estimate: f64,
    pub path: SymmetricPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta: f64,
    pub by_levels: Vec<LevelResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub betas: Vec<f64>,
    pub results: Vec<BetaResult>,
    /// `a` of the least-squares fit `a + b/β` to the deepest-level values.
    pub extrapolated: f64,
    pub slope: f64,
    pub fit_rms: f64,
    /// Raw values that break monotonicity in `s` or in `β` beyond error bars.
    pub flags: Vec<String>,
}

/// `(1/β)·min_π 𝒫` for `s = 1..=config.levels` at each `β`, extrapolated
/// with `a + b/β`.
pub fn ground_state<F>(template: F, betas: &[f64], config: &OptimizeConfig) -> Result<GroundStateReport>
where
    F: Fn(f64) -> CovarianceSpec + Sync,
{
    config.validate()?;
    if betas.is_empty() || betas.iter().any(|b| !b.is_finite()) || betas.windows(2).any(|w| w[0] >= w[1]) || betas[0] <= 0.0 {
        return Err(Error::InvalidInput("beta values must be positive and strictly increasing".into()));
    }
    let results = exec::map_indexed(betas.len(), |i| -> Result<BetaResult> {
        let beta = betas[i];
        let spec = template(beta);
        let mut by_levels = Vec::with_capacity(config.levels);
        for s in 1..=config.levels {
            let cfg = OptimizeConfig { levels: s, trace: false, ..*config };
            let found = minimize_symmetric(&spec, &cfg)?;
            by_levels.push(LevelResult {
                levels: s,
                value: found.value.value / beta,
                error_estimate: found.value.error_estimate / beta,
                path: found.path,
            });
        }
        Ok(BetaResult { beta, by_levels })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut flags = Vec::new();
    for r in &results {
        for w in r.by_levels.windows(2) {
            if w[1].value > w[0].value + 2.0 * (w[0].error_estimate + w[1].error_estimate) {
                flags.push(format!("beta {}: value increases from s={} to s={}", r.beta, w[0].levels, w[1].levels));
            }
        }
    }
    let deepest: Vec<&LevelResult> = results.iter().map(|r| r.by_levels.last().expect("levels >= 1")).collect();
    for (i, w) in deepest.windows(2).enumerate() {
        if w[1].value > w[0].value + 2.0 * (w[0].error_estimate + w[1].error_estimate) {
            flags.push(format!("value increases from beta {} to beta {}", betas[i], betas[i + 1]));
        }
    }
    let ys: Vec<f64> = deepest.iter().map(|l| l.value).collect();
    let (extrapolated, slope, fit_rms) = if betas.len() >= 2 { fit_inverse(betas, &ys) } else { (ys[0], 0.0, 0.0) };
    Ok(GroundStateReport { betas: betas.to_vec(), results, extrapolated, slope, fit_rms, flags })
}
