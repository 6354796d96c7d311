//! Grid evaluation for increments that all act along one direction `u`.
//!
//! Then `Σ_r z_r = y·u` with `y` a sum of independent `N(0, σ_r²)` scalars,
//! and every `X_r` is a function of `y` alone. Each level is one Gaussian
//! convolution on a uniform grid: a trapezoid sum when `σ_r` spans a few grid
//! cells, Gauss–Hermite nodes with Lagrange interpolation otherwise. The
//! tilted levels use tiled log-sum-exp so that the inner loops are plain
//! dot products.

use super::Level;
use crate::quadrature::gauss_hermite;

/// Gaussian tails are cut at this many standard deviations past the tilt.
const TAIL: f64 = 8.5;
/// Levels with `σ < TRAPEZOID_MIN·h` use interpolated Gauss–Hermite nodes.
const TRAPEZOID_MIN: f64 = 2.0;
const INTERP_NODES: usize = 24;
const TILE: usize = 64;

#[derive(Debug, Clone)]
pub(super) struct LineProblem {
    u: Vec<f64>,
    sigma: Vec<f64>,
    m: Vec<f64>,
}

enum Kernel {
    Zero,
    Trapezoid { half: usize },
    Interp { reach: usize },
}

impl LineProblem {
    pub(super) fn from_levels(levels: &[Level], kappa: usize) -> Option<Self> {
        let mut u: Option<Vec<f64>> = None;
        let mut sigma = Vec::with_capacity(levels.len());
        for level in levels {
            match level.factor.ncols() {
                0 => sigma.push(0.0),
                1 => {
                    let col: Vec<f64> = level.factor.column(0).iter().copied().collect();
                    let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
                    let dir: Vec<f64> = col.iter().map(|x| x / norm).collect();
                    match &u {
                        None => u = Some(dir),
                        Some(u) => {
                            let cos: f64 = u.iter().zip(&dir).map(|(a, b)| a * b).sum();
                            if cos.abs() < 1.0 - 1e-10 {
                                return None;
                            }
                        }
                    }
                    sigma.push(norm);
                }
                _ => return None,
            }
        }
        let u = u.unwrap_or_else(|| {
            let mut e = vec![0.0; kappa];
            e[0] = 1.0;
            e
        });
        Some(Self { u, sigma, m: levels.iter().map(|l| l.m).collect() })
    }

    pub(super) fn max_sigma(&self) -> f64 {
        self.sigma.iter().fold(0.0, |a: f64, b| a.max(*b))
    }

    fn kernels(&self, h: f64) -> Vec<Kernel> {
        let lip = self.u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let hmax = gauss_hermite(INTERP_NODES).expect("fixed rule size").nodes.last().copied().unwrap_or(0.0);
        self.sigma
            .iter()
            .zip(&self.m)
            .map(|(&s, &m)| {
                if s == 0.0 {
                    Kernel::Zero
                } else if s >= TRAPEZOID_MIN * h {
                    let tilt = m * s * lip;
                    Kernel::Trapezoid { half: ((TAIL + tilt) * s / h).ceil() as usize }
                } else {
                    Kernel::Interp { reach: (s * hmax / h).ceil() as usize + 3 }
                }
            })
            .collect()
    }

    /// `X_0` without reduction constants, on grid step at most `h`; the step
    /// is also capped at 1/32 of the total standard deviation.
    pub(super) fn evaluate(&self, lambda: &[f64], h: f64) -> f64 {
        let total = self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
        if total == 0.0 {
            return log_sum_exp_line(&self.u, lambda, 0.0);
        }
        let h = h.min(total / 32.0);
        let kernels = self.kernels(h);
        let s = kernels.len();
        let mut reach = vec![0usize; s + 1];
        for (r, k) in kernels.iter().enumerate() {
            reach[r + 1] = reach[r]
                + match k {
                    Kernel::Zero => 0,
                    Kernel::Trapezoid { half } => *half,
                    Kernel::Interp { reach } => *reach,
                };
        }
        // X_s on [−I_s, I_s]
        let top = reach[s] as isize;
        let mut x: Vec<f64> = (-top..=top)
            .map(|i| log_sum_exp_line(&self.u, lambda, i as f64 * h))
            .collect();
        for r in (1..s).rev() {
            x = match &kernels[r] {
                Kernel::Zero => {
                    let cut = reach[r + 1] - reach[r];
                    x[cut..x.len() - cut].to_vec()
                }
                Kernel::Trapezoid { half } => tilted_trapezoid(&x, reach[r], *half, self.sigma[r] / h, self.m[r]),
                Kernel::Interp { .. } => tilted_interp(&x, reach[r + 1], reach[r], self.sigma[r] / h, self.m[r]),
            };
        }
        let centre = reach[1];
        match &kernels[0] {
            Kernel::Zero => x[centre],
            Kernel::Trapezoid { half } => {
                let w = trapezoid_weights(*half, self.sigma[0] / h);
                let window = &x[centre - half..=centre + half];
                w.iter().zip(window).map(|(a, b)| a * b).sum()
            }
            Kernel::Interp { .. } => {
                let rule = gauss_hermite(INTERP_NODES).expect("fixed rule size");
                let s0 = self.sigma[0] / h;
                rule.nodes.iter().zip(&rule.weights).map(|(g, w)| w * lagrange(&x, centre as f64 + s0 * g)).sum()
            }
        }
    }
}

/// `log Σ_k exp(y·u_k + λ_k)`.
fn log_sum_exp_line(u: &[f64], lambda: &[f64], y: f64) -> f64 {
    let mut mx = f64::NEG_INFINITY;
    for (uk, lk) in u.iter().zip(lambda) {
        mx = mx.max(y * uk + lk);
    }
    let sum: f64 = u.iter().zip(lambda).map(|(uk, lk)| (y * uk + lk - mx).exp()).sum();
    mx + sum.ln()
}

/// Normalized log-weights of the discretized standard normal on `k·h/σ`.
fn trapezoid_log_weights(half: usize, s: f64) -> Vec<f64> {
    let logs: Vec<f64> = (-(half as isize)..=half as isize)
        .map(|k| {
            let t = k as f64 / s;
            -0.5 * t * t
        })
        .collect();
    let total: f64 = logs.iter().map(|l| l.exp()).sum();
    let lz = total.ln();
    logs.iter().map(|l| l - lz).collect()
}

fn trapezoid_weights(half: usize, s: f64) -> Vec<f64> {
    trapezoid_log_weights(half, s).iter().map(|l| l.exp()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `(1/m) log Σ_k c_k exp(m·X(i+k))` for `i ∈ [−out, out]`; `x` is indexed
/// with its centre at `out + half`.
fn tilted_trapezoid(x: &[f64], out: usize, half: usize, s: f64, m: f64) -> Vec<f64> {
    let logc = trapezoid_log_weights(half, s);
    let taps = logc.len();
    let n_out = 2 * out + 1;
    // kernel segments: (start tap, max log-weight, scaled weights)
    let segments: Vec<(usize, f64, Vec<f64>)> = (0..taps)
        .step_by(TILE)
        .map(|k0| {
            let k1 = (k0 + TILE).min(taps);
            let lc = logc[k0..k1].iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            (k0, lc, logc[k0..k1].iter().map(|l| (l - lc).exp()).collect())
        })
        .collect();
    let mx_all: Vec<f64> = x.iter().map(|v| m * v).collect();
    let mut acc = vec![f64::NEG_INFINITY; n_out];
    let mut e = vec![0.0; 2 * TILE];
    for i0 in (0..n_out).step_by(TILE) {
        let i1 = (i0 + TILE).min(n_out);
        for (k0, lc, cw) in &segments {
            // output i uses x[i + k] for tap k (x offset: output i ↔ x index i + half − half = i)
            let j0 = i0 + k0;
            let j1 = i1 - 1 + k0 + cw.len();
            let window = &mx_all[j0..j1];
            let mx = window.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            let e = &mut e[..window.len()];
            for (ej, wj) in e.iter_mut().zip(window) {
                *ej = (wj - mx).exp();
            }
            for (off, a) in acc[i0..i1].iter_mut().enumerate() {
                let sum = dot(cw, &e[off..off + cw.len()]);
                if sum > 0.0 {
                    *a = log_add(*a, sum.ln() + mx + lc);
                }
            }
        }
    }
    acc.iter().map(|a| a / m).collect()
}

/// Six-point Lagrange interpolation of `x` at fractional index `t`.
fn lagrange(x: &[f64], t: f64) -> f64 {
    let b = t.floor() as isize;
    let f = t - b as f64;
    if f == 0.0 {
        return x[b as usize];
    }
    let mut out = 0.0;
    for a in -2isize..=3 {
        let mut w = 1.0;
        for c in -2isize..=3 {
            if c != a {
                w *= (f - c as f64) / (a - c) as f64;
            }
        }
        out += w * x[(b + a) as usize];
    }
    out
}

/// Same as [`tilted_trapezoid`] with interpolated Gauss–Hermite nodes.
fn tilted_interp(x: &[f64], inner: usize, out: usize, s: f64, m: f64) -> Vec<f64> {
    let rule = gauss_hermite(INTERP_NODES).expect("fixed rule size");
    let logw: Vec<f64> = rule.weights.iter().map(|w| w.ln()).collect();
    (-(out as isize)..=out as isize)
        .map(|i| {
            let centre = (i + inner as isize) as f64;
            let mut mx = f64::NEG_INFINITY;
            let mut acc = 0.0;
            for (g, lw) in rule.nodes.iter().zip(&logw) {
                let t = m * lagrange(x, centre + s * g) + lw;
                if t > mx {
                    acc = acc * (mx - t).exp() + 1.0;
                    mx = t;
                } else {
                    acc += (t - mx).exp();
                }
            }
            (mx + acc.ln()) / m
        })
        .collect()
}
