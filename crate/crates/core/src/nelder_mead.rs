//! Derivative-free simplex minimization with dimension-adaptive coefficients
//! (Gao and Han, 2012) and restarts around the incumbent.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Converged once the spread of simplex values falls below
    /// `f_tol·(1 + |f_best|)` and its diameter below `x_tol`.
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
    /// Extra restarts from the incumbent with a fresh simplex.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_iter: 400, f_tol: 1e-12, x_tol: 1e-8, initial_step: 0.5, restarts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0`. Non-finite values are treated as `+∞`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let mut evaluations = 0;
        let mut eval = |x: &[f64]| {
            evaluations += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if x0.is_empty() {
            let value = eval(x0);
            return Minimum { x: Vec::new(), value, iterations: 0, evaluations: 1, converged: true };
        }
        let mut best = (x0.to_vec(), eval(x0));
        let mut iterations = 0;
        let mut converged = false;
        let mut step = self.initial_step;
        for _ in 0..=self.restarts {
            let (x, v, it, ok) = self.run(&mut eval, &best.0, best.1, step);
            iterations += it;
            let improved = v < best.1 - self.f_tol * (1.0 + best.1.abs());
            if v <= best.1 {
                best = (x, v);
            }
            converged = ok;
            if ok && !improved {
                break;
            }
            step *= 0.5;
        }
        Minimum { x: best.0, value: best.1, iterations, evaluations, converged }
    }

    fn run<F: FnMut(&[f64]) -> f64>(&self, eval: &mut F, x0: &[f64], f0: f64, step: f64) -> (Vec<f64>, f64, usize, bool) {
        let n = x0.len();
        let nf = n as f64;
        let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step;
            let v = eval(&x);
            simplex.push((x, v));
        }
        let point = |c: &[f64], x: &[f64], t: f64| -> Vec<f64> { c.iter().zip(x).map(|(c, x)| c + t * (x - c)).collect() };
        for it in 0..self.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let f_best = simplex[0].1;
            let f_worst = simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                .fold(0.0f64, f64::max);
            if (f_worst - f_best).abs() <= self.f_tol * (1.0 + f_best.abs()) && diameter <= self.x_tol {
                return (simplex[0].0.clone(), f_best, it, true);
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / nf;
                }
            }
            let worst = simplex[n].0.clone();
            let xr = point(&centroid, &worst, -alpha);
            let fr = eval(&xr);
            if fr < f_best {
                let xe = point(&centroid, &worst, -alpha * gamma);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < f_worst {
                let xc = point(&centroid, &worst, -alpha * rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst, rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                simplex[n] = (xc, fc);
                continue;
            }
            let x_best = simplex[0].0.clone();
            for entry in simplex.iter_mut().skip(1) {
                let x = point(&x_best, &entry.0, sigma);
                let v = eval(&x);
                *entry = (x, v);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, v) = simplex.swap_remove(0);
        (x, v, self.max_iter, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5, &[0.0, 0.0]);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] + 2.0).abs() < 1e-6);
        assert!((m.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_and_empty() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0].exp() - 2.0).powi(2), &[3.0]);
        assert!((m.x[0] - 2f64.ln()).abs() < 1e-6);
        let e = nm.minimize(|_| 7.0, &[]);
        assert_eq!(e.value, 7.0);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead { max_iter: 5000, ..NelderMead::default() };
        let m = nm.minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-5, "{:?}", m);
    }

    #[test]
    fn nan_is_rejected() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.3).powi(2) }, &[1.0]);
        assert!((m.x[0] - 0.3).abs() < 1e-6);
    }
}
