//! Magnetizations, the constraint sets `Γ_κ(d)`, and discrete monotone paths.

use nalgebra::SymmetricEigen;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Relative slack for PSD tests: eigenvalues `≥ −PSD_TOL·(1+‖A‖₂)` count as nonnegative.
pub const PSD_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-12;
const ROW_TOL: f64 = 1e-10;

/// A probability vector on the κ symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Magnetization(Vec<f64>);

impl Magnetization {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::InvalidInput("a magnetization needs at least two entries".into()));
        }
        if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("magnetization entries must be >= 0".into()));
        }
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidInput(format!("magnetization sums to {total}, not 1")));
        }
        Ok(Self(d))
    }

    /// The balanced magnetization `(1/κ, …, 1/κ)`.
    pub fn balanced(kappa: usize) -> Self {
        Self(vec![1.0 / kappa as f64; kappa])
    }

    pub fn kappa(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_balanced(&self) -> bool {
        let k = self.kappa() as f64;
        self.0.iter().all(|x| (x - 1.0 / k).abs() <= SUM_TOL)
    }

    /// Symbol counts `N·d_k`, if they are all integers.
    pub fn counts(&self, n: usize) -> Option<Vec<usize>> {
        self.0
            .iter()
            .map(|x| {
                let c = x * n as f64;
                let r = c.round();
                ((c - r).abs() <= 1e-9).then_some(r as usize)
            })
            .collect()
    }

    /// Whether `d` is realizable by a configuration of `n` spins.
    pub fn in_dn(&self, n: usize) -> bool {
        n > 0 && self.counts(n).is_some()
    }

    pub fn diag(&self) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.0))
    }
}

impl TryFrom<Vec<f64>> for Magnetization {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Magnetization> for Vec<f64> {
    fn from(m: Magnetization) -> Self {
        m.0
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
    }
    let scale = 1.0 + a.abs().max();
    for i in 0..a.nrows() {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn min_eigenvalue(a: &Matrix) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// `A ⪯ B`, i.e. `min eig(B − A) ≥ −tol`.
pub fn psd_leq(a: &Matrix, b: &Matrix, tol: f64) -> Result<bool> {
    check_symmetric(a)?;
    check_symmetric(b)?;
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    Ok(min_eigenvalue(&(b - a)) >= -tol)
}

fn psd_slack(a: &Matrix) -> f64 {
    PSD_TOL * (1.0 + spectral_norm(a))
}

/// Symmetric PSD square root; tiny negative eigenvalues are clipped to zero.
pub fn sqrt_psd(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * (1.0 + norm) {
        return Err(Error::Monotonicity(format!("matrix has eigenvalue {min:e} below tolerance")));
    }
    let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * Matrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Thin factor `L` (κ×rank) with `L·Lᵀ = A`, dropping numerically null directions.
pub fn psd_factor(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let k = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL * (1.0 + norm) {
        return Err(Error::Monotonicity(format!("matrix has eigenvalue {min:e} below tolerance")));
    }
    let keep: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > 1e-14 * norm && eig.eigenvalues[i] > 0.0).collect();
    Ok(Matrix::from_fn(k, keep.len(), |r, c| {
        let i = keep[c];
        eig.eigenvectors[(r, i)] * eig.eigenvalues[i].sqrt()
    }))
}

/// A matrix in `Γ_κ(d)`: symmetric PSD, entries in `[0,1]`, row sums `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    gamma: Matrix,
    d: Magnetization,
}

impl ConstraintMatrix {
    pub fn new(gamma: Matrix, d: Magnetization) -> Result<Self> {
        validate_gamma(&gamma, &d)?;
        Ok(Self { gamma, d })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.gamma
    }

    pub fn magnetization(&self) -> &Magnetization {
        &self.d
    }

    pub fn into_matrix(self) -> Matrix {
        self.gamma
    }
}

fn validate_gamma(gamma: &Matrix, d: &Magnetization) -> Result<()> {
    let k = d.kappa();
    if gamma.nrows() != k || gamma.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, found: gamma.nrows() });
    }
    check_symmetric(gamma)?;
    if gamma.iter().any(|x| !(*x >= -ROW_TOL && *x <= 1.0 + ROW_TOL)) {
        return Err(Error::InvalidPath("entries must lie in [0, 1]".into()));
    }
    for (i, row) in gamma.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - d.as_slice()[i]).abs() > ROW_TOL {
            return Err(Error::InvalidPath(format!("row {i} sums to {s}, expected {}", d.as_slice()[i])));
        }
    }
    let min = min_eigenvalue(gamma);
    if min < -psd_slack(gamma) {
        return Err(Error::InvalidPath(format!("matrix is not PSD (eigenvalue {min:e})")));
    }
    Ok(())
}

/// `Φ⋆(q) = (q/κ)·I + ((1−q)/κ²)·𝟏𝟏ᵀ`.
pub fn phi_star(q: f64, kappa: usize) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("q = {q} outside [0, 1]")));
    }
    let k = kappa as f64;
    Ok(Matrix::from_fn(kappa, kappa, |a, b| {
        let off = (1.0 - q) / (k * k);
        if a == b {
            q / k + off
        } else {
            off
        }
    }))
}

fn validate_weights(m: &[f64]) -> Result<()> {
    if m.is_empty() {
        return Err(Error::InvalidPath("a path needs at least one level".into()));
    }
    let mut prev = 0.0;
    for (r, &x) in m.iter().enumerate() {
        if x.is_nan() || x <= prev {
            return Err(Error::InvalidPath(format!("weight m_{} = {x} is not above the previous weight {prev}", r + 1)));
        }
        prev = x;
    }
    if m[m.len() - 1] != 1.0 {
        return Err(Error::InvalidPath("the last weight must equal 1".into()));
    }
    Ok(())
}

/// A piecewise-constant path `π(t) = γ_r` on `(m_{r−1}, m_r]`, with `m_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    m: Vec<f64>,
    gammas: Vec<Matrix>,
    d: Magnetization,
}

impl DiscretePath {
    /// `m_upper` holds `m_1, …, m_s` (so `m_s = 1`), `gammas` holds `γ_1, …, γ_s`.
    pub fn new(m_upper: Vec<f64>, gammas: Vec<Matrix>, d: Magnetization) -> Result<Self> {
        validate_weights(&m_upper)?;
        if m_upper.len() != gammas.len() {
            return Err(Error::InvalidPath(format!("{} weights but {} matrices", m_upper.len(), gammas.len())));
        }
        for g in &gammas {
            validate_gamma(g, &d)?;
        }
        for (r, pair) in gammas.windows(2).enumerate() {
            let diff = &pair[1] - &pair[0];
            let min = min_eigenvalue(&diff);
            if min < -psd_slack(&diff) {
                return Err(Error::Monotonicity(format!(
                    "γ_{} is not ⪯ γ_{} (eigenvalue {min:e})",
                    r + 1,
                    r + 2
                )));
            }
        }
        Ok(Self { m: m_upper, gammas, d })
    }

    /// Single-level path `π ≡ diag(d)`.
    pub fn constant_terminal(d: Magnetization) -> Self {
        let g = d.diag();
        Self { m: vec![1.0], gammas: vec![g], d }
    }

    pub fn levels(&self) -> usize {
        self.m.len()
    }

    pub fn kappa(&self) -> usize {
        self.d.kappa()
    }

    /// `m_1, …, m_s`.
    pub fn weights(&self) -> &[f64] {
        &self.m
    }

    /// `γ_1, …, γ_s`.
    pub fn matrices(&self) -> &[Matrix] {
        &self.gammas
    }

    pub fn magnetization(&self) -> &Magnetization {
        &self.d
    }

    /// Whether `γ_s = diag(d)`, as required of paths in `Π_d`.
    pub fn is_terminal(&self) -> bool {
        let last = &self.gammas[self.gammas.len() - 1];
        (last - self.d.diag()).abs().max() <= ROW_TOL
    }

    /// `π(t)` for `t ∈ (0, 1]`.
    pub fn at(&self, t: f64) -> &Matrix {
        let r = self.m.iter().position(|&m| t <= m).unwrap_or(self.m.len() - 1);
        &self.gammas[r]
    }

    /// The same path on the partition `self.weights() ∪ extra`.
    pub fn refine(&self, extra: &[f64]) -> Result<Self> {
        let points = merged_partition(&self.m, extra)?;
        let gammas = points.iter().map(|&t| self.at(t).clone()).collect();
        Ok(Self { m: points, gammas, d: self.d.clone() })
    }
}

fn merged_partition(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut points: Vec<f64> = a.iter().chain(b).copied().collect();
    if points.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(Error::InvalidPath("partition points must lie in (0, 1]".into()));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    Ok(points)
}

/// `∫₀¹ ‖π₁(t) − π₂(t)‖₁ dt`, with `‖·‖₁` the entrywise absolute sum.
pub fn path_l1_distance(a: &DiscretePath, b: &DiscretePath) -> Result<f64> {
    if a.kappa() != b.kappa() {
        return Err(Error::DimensionMismatch { expected: a.kappa(), found: b.kappa() });
    }
    let points = merged_partition(&a.m, &b.m)?;
    let mut prev = 0.0;
    let mut total = 0.0;
    for t in points {
        total += (t - prev) * (a.at(t) - b.at(t)).abs().sum();
        prev = t;
    }
    Ok(total)
}

/// A path `Φ⋆(q_r)` on `(m_{r−1}, m_r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SymmetricLevel>", into = "Vec<SymmetricLevel>")]
pub struct SymmetricPath {
    m: Vec<f64>,
    q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricLevel {
    pub m_upper: f64,
    pub q: f64,
}

impl SymmetricPath {
    pub fn new(m_upper: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        validate_weights(&m_upper)?;
        if m_upper.len() != q.len() {
            return Err(Error::InvalidPath(format!("{} weights but {} atoms", m_upper.len(), q.len())));
        }
        let mut prev = 0.0;
        for &x in &q {
            if !(x >= prev && x <= 1.0) {
                return Err(Error::InvalidPath("atoms must satisfy 0 <= q_1 <= ... <= q_s <= 1".into()));
            }
            prev = x;
        }
        if q[q.len() - 1] != 1.0 {
            return Err(Error::InvalidPath("the last atom must equal 1".into()));
        }
        Ok(Self { m: m_upper, q })
    }

    /// The single-level path `q ≡ 1`.
    pub fn constant() -> Self {
        Self { m: vec![1.0], q: vec![1.0] }
    }

    pub fn levels(&self) -> usize {
        self.m.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.m
    }

    pub fn atoms(&self) -> &[f64] {
        &self.q
    }

    pub fn to_discrete(&self, kappa: usize) -> Result<DiscretePath> {
        symmetric_to_discrete(self, kappa)
    }
}

impl TryFrom<Vec<SymmetricLevel>> for SymmetricPath {
    type Error = Error;
    fn try_from(levels: Vec<SymmetricLevel>) -> Result<Self> {
        Self::new(levels.iter().map(|l| l.m_upper).collect(), levels.iter().map(|l| l.q).collect())
    }
}

impl From<SymmetricPath> for Vec<SymmetricLevel> {
    fn from(p: SymmetricPath) -> Self {
        p.m.iter().zip(&p.q).map(|(&m_upper, &q)| SymmetricLevel { m_upper, q }).collect()
    }
}

pub fn symmetric_to_discrete(path: &SymmetricPath, kappa: usize) -> Result<DiscretePath> {
    if kappa < 2 {
        return Err(Error::InvalidInput("kappa must be >= 2".into()));
    }
    let gammas = path.q.iter().map(|&q| phi_star(q, kappa)).collect::<Result<Vec<_>>>()?;
    DiscretePath::new(path.m.clone(), gammas, Magnetization::balanced(kappa))
}

/// Serialized form of a [`DiscretePath`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretePathRecord {
    pub d: Vec<f64>,
    pub levels: Vec<DiscreteLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteLevel {
    pub m_upper: f64,
    pub matrix: Vec<Vec<f64>>,
}

impl From<&DiscretePath> for DiscretePathRecord {
    fn from(p: &DiscretePath) -> Self {
        Self {
            d: p.d.as_slice().to_vec(),
            levels: p
                .m
                .iter()
                .zip(&p.gammas)
                .map(|(&m_upper, g)| DiscreteLevel {
                    m_upper,
                    matrix: g.row_iter().map(|r| r.iter().copied().collect()).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<DiscretePathRecord> for DiscretePath {
    type Error = Error;
    fn try_from(rec: DiscretePathRecord) -> Result<Self> {
        let d = Magnetization::new(rec.d)?;
        let k = d.kappa();
        let mut gammas = Vec::with_capacity(rec.levels.len());
        for l in &rec.levels {
            if l.matrix.len() != k || l.matrix.iter().any(|r| r.len() != k) {
                return Err(Error::DimensionMismatch { expected: k, found: l.matrix.len() });
            }
            gammas.push(Matrix::from_fn(k, k, |a, b| l.matrix[a][b]));
        }
        DiscretePath::new(rec.levels.iter().map(|l| l.m_upper).collect(), gammas, d)
    }
}

/// Random monotone chain `γ_1 ⪯ … ⪯ γ_s = diag(d)` in `Γ_κ(d)`.
///
/// Each `γ_r` is the overlap matrix `Σ_G μ(G) v̄_G v̄_Gᵀ` of a random nested
/// partition of weighted vertices `e_k`, where `v̄_G` is the barycenter of a
/// block. Coarsening a partition can only decrease the matrix in Loewner
/// order, and row sums stay equal to `d`.
pub fn random_gamma_chain<R: Rng + ?Sized>(d: &Magnetization, levels: usize, rng: &mut R) -> Vec<Matrix> {
    let k = d.kappa();
    let pieces = 3;
    // leaves: (symbol, mass)
    let mut leaves: Vec<(usize, f64)> = Vec::with_capacity(k * pieces);
    for (sym, &mass) in d.as_slice().iter().enumerate() {
        let cuts: Vec<f64> = (0..pieces).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = cuts.iter().sum();
        leaves.extend(cuts.iter().map(|c| (sym, mass * c / total)));
    }
    leaves.shuffle(rng);
    let n = leaves.len();
    // labels[r][leaf] is the block of `leaf` at level r; finest level is the identity
    let mut labels: Vec<Vec<usize>> = vec![(0..n).collect()];
    for _ in 1..levels {
        let prev = labels.last().unwrap();
        let blocks = prev.iter().max().map_or(1, |m| m + 1);
        let target = (blocks / 2).max(1);
        let merge: Vec<usize> = (0..blocks).map(|_| rng.random_range(0..target)).collect();
        labels.push(prev.iter().map(|&b| merge[b]).collect());
    }
    labels.reverse();
    labels
        .iter()
        .map(|lab| {
            let blocks = lab.iter().max().map_or(1, |m| m + 1);
            let mut mass = vec![0.0; blocks];
            let mut bary = vec![vec![0.0; k]; blocks];
            for (leaf, &(sym, w)) in leaves.iter().enumerate() {
                mass[lab[leaf]] += w;
                bary[lab[leaf]][sym] += w;
            }
            let mut g = Matrix::zeros(k, k);
            for (b, v) in bary.iter().enumerate() {
                if mass[b] == 0.0 {
                    continue;
                }
                for x in 0..k {
                    for y in 0..k {
                        g[(x, y)] += v[x] * v[y] / mass[b];
                    }
                }
            }
            (&g + g.transpose()) * 0.5
        })
        .collect()
}

/// Random element of `Γ_κ(d)`.
pub fn random_gamma<R: Rng + ?Sized>(d: &Magnetization, rng: &mut R) -> Matrix {
    let depth = rng.random_range(1..=4);
    random_gamma_chain(d, depth, rng).swap_remove(0)
}
