//! Command execution.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use potts_parisi::finite::{estimate_fn, guerra_bound_check, FiniteModelConfig, FiniteRow};
use potts_parisi::optimize::{self, TraceRow};
use potts_parisi::parisi::{eval_p, eval_parisi};
use potts_parisi::rpc::{self, CascadeConfig, GgConfig};
use potts_parisi::{CovarianceSpec, DiscretePath};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Check, Command, Family, RunConfig};

/// What a command produced.
pub struct Outcome {
    pub result: Value,
    /// False when a checked invariant failed.
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    spec_digest: Option<String>,
    pass: bool,
    config: &'a RunConfig,
    result: &'a Value,
}

pub fn run(config: &RunConfig, out: &Path) -> Result<Outcome> {
    config.check_blocks()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let spec = config.spec.as_ref().map(|s| s.build()).transpose()?;
    let mut outcome = match config.command {
        Command::Evaluate => evaluate(config, spec.as_ref().unwrap()),
        Command::Minimize => minimize(config, spec.as_ref().unwrap(), out),
        Command::GroundState => ground_state(config, out),
        Command::Verify => verify(config, spec.as_ref()),
        Command::FiniteFe => finite_fe(config, spec.as_ref().unwrap(), out),
    }
    .with_context(|| format!("command `{}` failed", config.command_name()))?;

    let envelope = Envelope {
        command: config.command_name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        spec_digest: spec.as_ref().map(CovarianceSpec::digest),
        pass: outcome.pass,
        config,
        result: &outcome.result,
    };
    let file = out.join(format!("{}.json", config.command_name()));
    fs::write(&file, serde_json::to_string_pretty(&envelope)?).with_context(|| format!("writing {}", file.display()))?;
    outcome.files.insert(0, file);
    Ok(outcome)
}

fn path_of(config: &RunConfig, kappa: usize) -> Result<DiscretePath> {
    match &config.path {
        Some(p) => p.build(kappa),
        None => bail!("missing path block"),
    }
}

fn lambda_or_zero(config: &RunConfig, kappa: usize) -> Result<Vec<f64>> {
    match &config.lambda {
        Some(l) if l.len() != kappa => bail!("lambda has {} entries, expected {kappa}", l.len()),
        Some(l) => Ok(l.clone()),
        None => Ok(vec![0.0; kappa]),
    }
}

fn evaluate(config: &RunConfig, spec: &CovarianceSpec) -> Result<Outcome> {
    let path = path_of(config, spec.kappa())?;
    let value = match &config.lambda {
        Some(_) => eval_p(spec, &path, &lambda_or_zero(config, spec.kappa())?, &config.eval)?,
        None => eval_parisi(spec, &path, &config.eval)?,
    };
    Ok(Outcome { result: serde_json::to_value(value)?, pass: true, files: Vec::new() })
}

fn write_trace(file: &Path, trace: &[TraceRow]) -> Result<()> {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";");
    let mut w = csv::Writer::from_path(file)?;
    w.write_record(["levels", "start", "evaluation", "value", "weights", "atoms"])?;
    for r in trace {
        w.write_record([
            r.levels.to_string(),
            r.start.to_string(),
            r.evaluation.to_string(),
            format!("{}", r.value),
            join(&r.weights),
            join(&r.atoms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn minimize(config: &RunConfig, spec: &CovarianceSpec, out: &Path) -> Result<Outcome> {
    let block = config.minimize.as_ref().unwrap();
    let mut opt = block.optimize;
    opt.trace = block.trace_csv.is_some();
    let mut files = Vec::new();
    let result = match block.family {
        Family::Symmetric => {
            let mut found = optimize::minimize_symmetric(spec, &opt)?;
            if let Some(name) = &block.trace_csv {
                let file = out.join(name);
                write_trace(&file, &found.trace)?;
                files.push(file);
                found.trace.clear();
            }
            serde_json::to_value(found)?
        }
        Family::GeneralK2 => {
            let d = match &block.d {
                Some(d) => potts_parisi::Magnetization::new(d.clone()).context("minimize.d")?,
                None => potts_parisi::Magnetization::balanced(spec.kappa()),
            };
            serde_json::to_value(optimize::minimize_general_k2(spec, &d, &opt)?)?
        }
    };
    Ok(Outcome { result, pass: true, files })
}

fn ground_state(config: &RunConfig, out: &Path) -> Result<Outcome> {
    let block = config.ground_state.as_ref().unwrap();
    if block.kappa < 2 {
        bail!("ground_state.kappa must be at least 2");
    }
    let kappa = block.kappa;
    let report = optimize::ground_state(|b| CovarianceSpec::potts(kappa, b), &block.betas, &block.optimize)?;
    let file = out.join("ground-state.csv");
    let mut w = csv::Writer::from_path(&file)?;
    w.write_record(["beta", "levels", "value", "error_estimate"])?;
    for r in &report.results {
        for l in &r.by_levels {
            w.write_record([format!("{}", r.beta), l.levels.to_string(), format!("{}", l.value), format!("{}", l.error_estimate)])?;
        }
    }
    w.flush()?;
    let pass = report.flags.is_empty();
    Ok(Outcome { result: serde_json::to_value(report)?, pass, files: vec![file] })
}

fn verify(config: &RunConfig, spec: Option<&CovarianceSpec>) -> Result<Outcome> {
    let block = config.verify.as_ref().unwrap();
    let kappa = spec.map(CovarianceSpec::kappa);
    let path = match (&config.path, kappa) {
        (Some(_), Some(k)) => Some(path_of(config, k)?),
        (Some(p), None) => Some(p.build(infer_kappa(p)?)?),
        (None, _) => None,
    };
    let cascade = match (&block.weights, &path) {
        (Some(w), _) => CascadeConfig::new(w.clone(), block.k, config.seed)?,
        (None, Some(p)) => CascadeConfig::for_path(p, block.k, config.seed)?,
        (None, None) => bail!("verify needs `weights` or a path"),
    };
    let need_path = || path.as_ref().context("this check needs a path block");
    let need_spec = || spec.context("this check needs a spec block");
    let (result, pass) = match block.check {
        Check::OverlapLaw => {
            let r = rpc::check_overlap_law(&cascade, block.pairs)?;
            (json!(r), r.pass)
        }
        Check::Gg => {
            let path = need_path()?;
            let gg = block.gg.as_ref().unwrap();
            let w = gg.w.clone().unwrap_or_else(|| vec![1.0; path.kappa()]);
            let overlaps = rpc::scalar_overlaps(path, gg.p, &w)?;
            let cfg = GgConfig { n: gg.n, psi: gg.psi.clone(), test: gg.test, replicas: block.replicas, batches: gg.batches };
            let r = rpc::check_gg_identities(&cascade, &overlaps, &cfg)?;
            (json!(r), r.pass)
        }
        Check::SiteFactorization => {
            let (spec, path) = (need_spec()?, need_path()?);
            let lambda = lambda_or_zero(config, spec.kappa())?;
            let (r, estimates) = rpc::check_site_factorization(
                spec,
                path,
                &lambda,
                &block.n_sites,
                &cascade,
                block.replicas,
                block.bias_tol,
                &config.eval,
            )?;
            let pass = r.pass;
            (json!({ "report": r, "estimates": estimates }), pass)
        }
        Check::Duality => {
            let r = rpc::check_duality(need_spec()?, need_path()?, &block.n_sites, &cascade, block.replicas, &config.eval)?;
            let pass = r.pass;
            (json!(r), pass)
        }
        Check::FieldCovariance => {
            let r = rpc::check_field_covariance(need_spec()?, need_path()?, block.replicas, config.seed)?;
            (json!(r), r.pass)
        }
    };
    Ok(Outcome { result, pass, files: Vec::new() })
}

/// κ of a path block given without a spec.
fn infer_kappa(p: &crate::config::PathBlock) -> Result<usize> {
    match (&p.symmetric, &p.discrete) {
        (None, Some(rec)) => Ok(rec.d.len()),
        _ => bail!("a symmetric path needs a spec block to fix κ"),
    }
}

fn finite_fe(config: &RunConfig, spec: &CovarianceSpec, out: &Path) -> Result<Outcome> {
    let block = config.finite.as_ref().unwrap();
    let d = block.magnetization(spec.kappa())?;
    let candidate = if block.guerra {
        let path = path_of(config, spec.kappa())?;
        if path.magnetization() != &d {
            bail!("path magnetization differs from finite.d");
        }
        Some((path, lambda_or_zero(config, spec.kappa())?))
    } else {
        None
    };
    let file = out.join("finite-fe.csv");
    let mut w = csv::Writer::from_path(&file)?;
    let mut rows = Vec::new();
    let mut pass = true;
    for &n in &block.n {
        let cfg = FiniteModelConfig {
            n,
            d: d.clone(),
            epsilon: block.epsilon,
            spec: spec.clone(),
            n_disorder: block.n_disorder,
            seed: config.seed,
        };
        let est = estimate_fn(&cfg).with_context(|| format!("N = {n}"))?;
        let row = FiniteRow::new(&cfg, &est);
        w.serialize(&row)?;
        let guerra = match &candidate {
            Some(c) => {
                let r = guerra_bound_check(&est, spec, std::slice::from_ref(c), &config.eval)?;
                pass &= r.pass;
                Some(r)
            }
            None => None,
        };
        rows.push(json!({ "row": row, "n_configs": est.n_configs, "guerra": guerra }));
    }
    w.flush()?;
    Ok(Outcome { result: Value::Array(rows), pass, files: vec![file] })
}
