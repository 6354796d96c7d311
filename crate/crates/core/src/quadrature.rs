//! Gauss–Hermite rules for expectations over standard normal vectors.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights for `E f(g)`, `g ~ N(0, 1)`; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Largest supported rule size.
pub const MAX_NODES: usize = 400;

/// Cached `n`-point rule for the standard normal.
pub fn gauss_hermite(n: usize) -> Result<Arc<Rule>> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::InvalidInput(format!("Gauss-Hermite size must be in 1..={MAX_NODES}, got {n}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return Ok(r.clone());
    }
    let rule = Arc::new(compute(n));
    cache.lock().unwrap().insert(n, rule.clone());
    Ok(rule)
}

/// Golub–Welsch: nodes are eigenvalues of the Jacobi matrix of the
/// probabilists' Hermite recurrence. Weights come from the Christoffel
/// function `1/Σ_j φ_j(x)²` evaluated with rescaling, which keeps tail weights
/// accurate where eigenvector components underflow.
fn compute(n: usize) -> Rule {
    if n == 1 {
        return Rule { nodes: vec![0.0], weights: vec![1.0] };
    }
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    // enforce exact symmetry
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    const BIG: f64 = 1e100;
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0, 1.0);
            let mut sum = 1.0;
            let mut log_scale = 0.0;
            for j in 1..n {
                let next = (x * cur - ((j - 1) as f64).sqrt() * prev) / (j as f64).sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
                if cur.abs() > BIG {
                    prev /= BIG;
                    cur /= BIG;
                    sum /= BIG * BIG;
                    log_scale += 2.0 * BIG.ln();
                }
            }
            (-sum.ln() - log_scale).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Rule { nodes, weights }
}

/// Tensor product of a 1-d rule over `dim` coordinates, with points of
/// weight below `prune` dropped and the rest renormalized.
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub dim: usize,
    /// Row-major `len × dim` node coordinates.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(rule: &Rule, dim: usize, prune: f64) -> Self {
        if dim == 0 {
            return Self { dim, points: Vec::new(), weights: vec![1.0] };
        }
        let n = rule.nodes.len();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let w: f64 = idx.iter().map(|&i| rule.weights[i]).product();
            if w >= prune {
                points.extend(idx.iter().map(|&i| rule.nodes[i]));
                weights.push(w);
            }
            let mut c = 0;
            loop {
                idx[c] += 1;
                if idx[c] < n {
                    break;
                }
                idx[c] = 0;
                c += 1;
                if c == dim {
                    let total: f64 = weights.iter().sum();
                    weights.iter_mut().for_each(|x| *x /= total);
                    return Self { dim, points, weights };
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: &Rule, p: i32) -> f64 {
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(p)).sum()
    }

    #[test]
    fn exact_normal_moments() {
        for n in [2usize, 5, 10, 20, 40] {
            let r = gauss_hermite(n).unwrap();
            let mut double_fact = 1.0;
            for p in 0..(2 * n as i32) {
                let expected = if p % 2 == 1 {
                    0.0
                } else {
                    if p >= 2 {
                        double_fact *= (p - 1) as f64;
                    }
                    double_fact
                };
                let got = moment(&r, p);
                let scale = (1..=p).fold(1.0, |a, i| a * i as f64).sqrt();
                assert!((got - expected).abs() <= 1e-12 * scale.max(1.0), "n={n} p={p} got {got} want {expected}");
            }
        }
    }

    #[test]
    fn large_rules_are_sane() {
        for n in [100usize, 200, 400] {
            let r = gauss_hermite(n).unwrap();
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights.iter().all(|w| *w >= 0.0));
            assert!((moment(&r, 2) - 1.0).abs() < 1e-12);
            assert!((moment(&r, 4) - 3.0).abs() < 1e-11);
            let c: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.cos()).sum();
            assert!((c - (-0.5f64).exp()).abs() < 1e-14);
        }
        assert!(gauss_hermite(0).is_err());
    }

    #[test]
    fn tensor_rule_integrates_products() {
        let r = gauss_hermite(8).unwrap();
        let t = TensorRule::new(&r, 3, 0.0);
        assert_eq!(t.len(), 512);
        let v: f64 = (0..t.len())
            .map(|i| {
                let p = t.point(i);
                t.weights[i] * p[0] * p[0] * p[1] * p[1] * (p[2] * p[2] + 1.0)
            })
            .sum();
        assert!((v - 2.0).abs() < 1e-12);
        let pruned = TensorRule::new(&gauss_hermite(20).unwrap(), 3, 1e-15);
        assert!(pruned.len() < 8000);
        assert!((pruned.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(TensorRule::new(&r, 0, 0.0).weights, vec![1.0]);
    }
}
