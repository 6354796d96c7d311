//! Run configuration files.

use std::path::Path;

use anyhow::{bail, Context, Result};
use potts_parisi::optimize::OptimizeConfig;
use potts_parisi::paths::DiscretePathRecord;
use potts_parisi::rpc::GgTest;
use potts_parisi::{CovarianceSpec, DiscretePath, EvalSettings, Magnetization, SymmetricPath};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evaluate,
    Minimize,
    GroundState,
    Verify,
    FiniteFe,
}

/// A whole run. Every source of randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    pub spec: Option<SpecBlock>,
    pub path: Option<PathBlock>,
    /// Multiplier for `evaluate` and the cascade checks; `evaluate` takes
    /// the infimum over λ when absent.
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub eval: EvalSettings,
    pub minimize: Option<MinimizeBlock>,
    pub ground_state: Option<GroundStateBlock>,
    pub verify: Option<VerifyBlock>,
    pub finite: Option<FiniteBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpecBlock {
    Zero { kappa: usize },
    Potts { kappa: usize, beta: f64 },
    /// Covariance text format.
    Mixture { text: String },
}

impl SpecBlock {
    pub fn build(&self) -> Result<CovarianceSpec> {
        Ok(match self {
            SpecBlock::Zero { kappa } => {
                check_kappa(*kappa)?;
                CovarianceSpec::zero(*kappa)
            }
            SpecBlock::Potts { kappa, beta } => {
                check_kappa(*kappa)?;
                if !(beta.is_finite() && *beta >= 0.0) {
                    bail!("spec.beta must be finite and non-negative");
                }
                CovarianceSpec::potts(*kappa, *beta)
            }
            SpecBlock::Mixture { text } => CovarianceSpec::parse(text).context("spec.text")?,
        })
    }
}

fn check_kappa(kappa: usize) -> Result<()> {
    if kappa < 2 {
        bail!("spec.kappa must be at least 2");
    }
    Ok(())
}

/// Exactly one of the two forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathBlock {
    pub symmetric: Option<SymmetricPath>,
    pub discrete: Option<DiscretePathRecord>,
}

impl PathBlock {
    pub fn build(&self, kappa: usize) -> Result<DiscretePath> {
        let path = match (&self.symmetric, &self.discrete) {
            (Some(p), None) => p.to_discrete(kappa).context("path.symmetric")?,
            (None, Some(rec)) => DiscretePath::try_from(rec.clone()).context("path.discrete")?,
            _ => bail!("path needs exactly one of `symmetric` or `discrete`"),
        };
        if path.kappa() != kappa {
            bail!("path has κ = {} but the spec has κ = {kappa}", path.kappa());
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Symmetric,
    GeneralK2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeBlock {
    pub family: Family,
    /// Magnetization for `general-k2`.
    pub d: Option<Vec<f64>>,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    /// File name for the per-evaluation trace, relative to the output directory.
    pub trace_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateBlock {
    pub kappa: usize,
    pub betas: Vec<f64>,
    #[serde(default)]
    pub optimize: OptimizeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    OverlapLaw,
    Gg,
    SiteFactorization,
    Duality,
    FieldCovariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    pub check: Check,
    /// Branching number of the truncated cascade.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Cascade weights `m_1 < … < m_{s−1}`; taken from the path when absent.
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_ns")]
    pub n_sites: Vec<usize>,
    #[serde(default = "default_bias_tol")]
    pub bias_tol: f64,
    pub gg: Option<GgBlock>,
}

fn default_k() -> usize {
    200
}
fn default_pairs() -> usize {
    10_000
}
fn default_replicas() -> usize {
    2000
}
fn default_ns() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_bias_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GgBlock {
    pub n: usize,
    pub psi: Vec<f64>,
    pub test: GgTest,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Scalar overlap `⟨γ^{∘p} w, w⟩`; `w = 𝟏` when absent.
    #[serde(default = "default_power")]
    pub p: u32,
    pub w: Option<Vec<f64>>,
}

fn default_batches() -> usize {
    20
}
fn default_power() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteBlock {
    /// Volumes to sweep.
    pub n: Vec<usize>,
    /// Balanced when absent.
    pub d: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilon: f64,
    pub n_disorder: usize,
    /// Also check the bound against the configured path and λ.
    #[serde(default)]
    pub guerra: bool,
}

impl FiniteBlock {
    pub fn magnetization(&self, kappa: usize) -> Result<Magnetization> {
        match &self.d {
            Some(d) => Magnetization::new(d.clone()).context("finite.d"),
            None => Ok(Magnetization::balanced(kappa)),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        config.check_blocks()?;
        Ok(config)
    }

    /// Each command needs its blocks.
    pub fn check_blocks(&self) -> Result<()> {
        let need = |present: bool, block: &str| -> Result<()> {
            if !present {
                bail!("command `{}` needs a `{block}` block", self.command_name());
            }
            Ok(())
        };
        match self.command {
            Command::Evaluate => {
                need(self.spec.is_some(), "spec")?;
                need(self.path.is_some(), "path")
            }
            Command::Minimize => {
                need(self.spec.is_some(), "spec")?;
                need(self.minimize.is_some(), "minimize")
            }
            Command::GroundState => need(self.ground_state.is_some(), "ground_state"),
            Command::Verify => {
                need(self.verify.is_some(), "verify")?;
                let check = self.verify.as_ref().map(|v| v.check);
                if check != Some(Check::OverlapLaw) || self.verify.as_ref().is_some_and(|v| v.weights.is_none()) {
                    need(self.path.is_some(), "path")?;
                }
                if check != Some(Check::OverlapLaw) && check != Some(Check::Gg) {
                    need(self.spec.is_some(), "spec")?;
                }
                if check == Some(Check::Gg) {
                    need(self.verify.as_ref().is_some_and(|v| v.gg.is_some()), "verify.gg")?;
                }
                Ok(())
            }
            Command::FiniteFe => {
                need(self.spec.is_some(), "spec")?;
                need(self.finite.is_some(), "finite")?;
                if self.finite.as_ref().is_some_and(|f| f.guerra) {
                    need(self.path.is_some(), "path")?;
                }
                Ok(())
            }
        }
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            Command::Evaluate => "evaluate",
            Command::Minimize => "minimize",
            Command::GroundState => "ground-state",
            Command::Verify => "verify",
            Command::FiniteFe => "finite-fe",
        }
    }

    /// Pushes the run seed into every settings block.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.eval.seed = seed;
        if let Some(m) = &mut self.minimize {
            m.optimize.seed = seed;
            m.optimize.eval.seed = seed;
        }
        if let Some(g) = &mut self.ground_state {
            g.optimize.seed = seed;
            g.optimize.eval.seed = seed;
        }
    }
}
