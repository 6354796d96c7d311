//! Node-based evaluation of the nested recursion (quadrature or Monte Carlo).

use rand_distr::{Distribution, StandardNormal};

use super::Level;
use crate::error::Result;
use crate::exec;
use crate::quadrature::{gauss_hermite, TensorRule};

/// Tensor points whose product weight falls below this are dropped.
const PRUNE: f64 = 1e-15;
/// Independent batches used for the Monte Carlo error bar.
pub(super) const MC_BATCHES: usize = 8;

/// Displacements `z_j ∈ ℝ^κ` of one level with log-weights.
pub(crate) struct NodeSet {
    kappa: usize,
    disp: Vec<f64>,
    log_w: Vec<f64>,
    w: Vec<f64>,
}

impl NodeSet {
    fn single(kappa: usize) -> Self {
        Self { kappa, disp: vec![0.0; kappa], log_w: vec![0.0], w: vec![1.0] }
    }

    fn len(&self) -> usize {
        self.w.len()
    }

    fn disp(&self, j: usize) -> &[f64] {
        &self.disp[j * self.kappa..(j + 1) * self.kappa]
    }

    fn from_points(level: &Level, points: &[f64], weights: Vec<f64>) -> Self {
        let kappa = level.factor.nrows();
        let dim = level.factor.ncols();
        let n = weights.len();
        let mut disp = vec![0.0; n * kappa];
        for j in 0..n {
            let g = &points[j * dim..(j + 1) * dim];
            for a in 0..kappa {
                disp[j * kappa + a] = (0..dim).map(|c| level.factor[(a, c)] * g[c]).sum();
            }
        }
        let log_w = weights.iter().map(|w| w.ln()).collect();
        Self { kappa, disp, log_w, w: weights }
    }
}

pub(super) fn quadrature_nodes(levels: &[Level], n: usize) -> Result<Vec<NodeSet>> {
    let rule = gauss_hermite(n)?;
    Ok(levels
        .iter()
        .map(|level| {
            let dim = level.factor.ncols();
            if dim == 0 {
                return NodeSet::single(level.factor.nrows());
            }
            let prune = if dim == 1 { 0.0 } else { PRUNE };
            let t = TensorRule::new(&rule, dim, prune);
            NodeSet::from_points(level, &t.points, t.weights)
        })
        .collect())
}

/// Batches of common random numbers: level 0 is split across batches, inner
/// levels get a fresh sample set per batch.
pub(super) fn monte_carlo_nodes(levels: &[Level], samples: usize, seed: u64) -> Vec<Vec<NodeSet>> {
    (0..MC_BATCHES)
        .map(|b| {
            // streams are numbered over non-degenerate levels only, so that
            // inserting a flat level leaves the samples unchanged
            let mut live = 0usize;
            levels
                .iter()
                .enumerate()
                .map(|(r, level)| {
                    let dim = level.factor.ncols();
                    if dim == 0 {
                        return NodeSet::single(level.factor.nrows());
                    }
                    let n = if r == 0 { (samples / MC_BATCHES).max(2) } else { samples };
                    let j = live;
                    live += 1;
                    let mut rng = crate::rng::stream(seed, &format!("parisi-mc/batch{b}/level{j}"));
                    let points: Vec<f64> = (0..n * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                    NodeSet::from_points(level, &points, vec![1.0 / n as f64; n])
                })
                .collect()
        })
        .collect()
}

fn log_sum_exp(x: &[f64], lambda: &[f64]) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for (a, l) in x.iter().zip(lambda) {
        mx = mx.max(a + l);
    }
    let s: f64 = x.iter().zip(lambda).map(|(a, l)| (a + l - mx).exp()).sum();
    mx + s.ln()
}

/// `X_r(x)` for `r ≥ 1`; `buf` holds one κ-block per remaining depth.
fn inner(sets: &[NodeSet], levels: &[Level], r: usize, x: &[f64], buf: &mut [f64], lambda: &[f64]) -> f64 {
    if r == sets.len() {
        return log_sum_exp(x, lambda);
    }
    let kappa = x.len();
    let set = &sets[r];
    let m = levels[r].m;
    let (y, rest) = buf.split_at_mut(kappa);
    let mut mx = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for j in 0..set.len() {
        for (yi, (xi, di)) in y.iter_mut().zip(x.iter().zip(set.disp(j))) {
            *yi = xi + di;
        }
        let t = m * inner(sets, levels, r + 1, y, rest, lambda) + set.log_w[j];
        if t > mx {
            acc = acc * (mx - t).exp() + 1.0;
            mx = t;
        } else {
            acc += (t - mx).exp();
        }
    }
    (mx + acc.ln()) / m
}

/// `X_0` without the reduction constants. Level-0 nodes run in parallel and
/// are reduced in index order.
pub(super) fn evaluate(sets: &[NodeSet], levels: &[Level], lambda: &[f64]) -> f64 {
    let kappa = lambda.len();
    let top = &sets[0];
    let depth = sets.len();
    let terms = exec::map_indexed(top.len(), |j| {
        let mut buf = vec![0.0; kappa * depth];
        top.w[j] * inner(sets, levels, 1, top.disp(j), &mut buf, lambda)
    });
    exec::pairwise_sum(&terms)
}
