//! Degree-corrected block model: parameters, edge probabilities, sampling,
//! signal-to-noise diagnostics and the random-label lower-bound construction.
//!
//! With degree parameters `theta`, hard community labels and a `K x K`
//! community matrix `P` (unit diagonal, nonsingular), the edge probabilities
//! are
//!
//! ```text
//! Omega[i][j] = theta[i] * theta[j] * P[label(i)][label(j)]
//! ```
//!
//! and the upper-triangular entries of `A` are independent Bernoulli draws.
//! The nonzero eigenvalues of `Omega` are `||theta||^2` times those of the
//! small matrix `H P H` with `H = diag(||theta^(k)|| / ||theta||)`; every
//! spectral diagnostic here goes through that `K x K` reduction.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Exp1, Pareto, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum DcbmError {
    #[error("theta[{index}] = {value} is not positive")]
    NonPositiveTheta { index: usize, value: f64 },
    #[error("label {label} of node {node} is outside 0..{k}")]
    LabelOutOfRange { node: usize, label: usize, k: usize },
    #[error("P is {rows}x{cols}, expected {k}x{k}")]
    BadShape { rows: usize, cols: usize, k: usize },
    #[error("P is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("P has a negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },
    #[error("P[{index}][{index}] = {value}, expected 1")]
    DiagonalNotOne { index: usize, value: f64 },
    #[error("P is numerically singular (smallest singular value {sigma_min:e})")]
    Singular { sigma_min: f64 },
    #[error("Omega[{i}][{j}] = {value} is not below 1; rescale theta")]
    ProbabilityTooLarge { i: usize, j: usize, value: f64 },
    #[error("community {0} has no nodes")]
    EmptyCommunity(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("lower-bound construction needs |beta' S^-1 beta - 1| >= {tolerance}, got {value}")]
    DegenerateBase { value: f64, tolerance: f64 },
    #[error("the leading block S of the base P is singular")]
    SingularBlock,
}

/// Default tolerance on the smallest singular value of `P`.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Parameters `(theta, labels, P)` of a degree-corrected block model with
/// hard memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct DcbmParams {
    theta: Vec<f64>,
    labels: Vec<usize>,
    p: DMatrix<f64>,
}

impl DcbmParams {
    pub fn new(theta: Vec<f64>, labels: Vec<usize>, p: DMatrix<f64>) -> Result<Self, DcbmError> {
        Self::with_tolerance(theta, labels, p, SINGULAR_TOLERANCE)
    }

    pub fn with_tolerance(
        theta: Vec<f64>,
        labels: Vec<usize>,
        p: DMatrix<f64>,
        singular_tolerance: f64,
    ) -> Result<Self, DcbmError> {
        let k = p.nrows();
        check_community_matrix(&p, k)?;
        for i in 0..k {
            if (p[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(DcbmError::DiagonalNotOne { index: i, value: p[(i, i)] });
            }
        }
        let sigma_min = p.singular_values().min();
        if sigma_min <= singular_tolerance {
            return Err(DcbmError::Singular { sigma_min });
        }
        assert_eq!(theta.len(), labels.len(), "theta and labels must have one entry per node");
        if let Some((index, &value)) = theta.iter().enumerate().find(|(_, &t)| !(t > 0.0 && t.is_finite())) {
            return Err(DcbmError::NonPositiveTheta { index, value });
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(DcbmError::LabelOutOfRange { node, label, k });
        }
        let params = Self { theta, labels, p };
        if let Some((i, j, value)) = params.max_off_diagonal() {
            if value >= 1.0 {
                return Err(DcbmError::ProbabilityTooLarge { i, j, value });
            }
        }
        Ok(params)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.p.nrows()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.theta[i] * self.theta[j] * self.p[(self.labels[i], self.labels[j])]
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut theta = vec![0.0; self.n()];
        let mut labels = vec![0; self.n()];
        for (i, &p) in perm.iter().enumerate() {
            theta[p] = self.theta[i];
            labels[p] = self.labels[i];
        }
        Self { theta, labels, p: self.p.clone() }
    }

    /// Largest off-diagonal entry of `Omega`, found from the two largest
    /// `theta` values of each community.
    fn max_off_diagonal(&self) -> Option<(usize, usize, f64)> {
        let k = self.k();
        let mut top: Vec<[Option<usize>; 2]> = vec![[None, None]; k];
        for (i, (&t, &l)) in self.theta.iter().zip(&self.labels).enumerate() {
            let slot = &mut top[l];
            match slot[0] {
                Some(a) if self.theta[a] >= t => {
                    if slot[1].is_none_or(|b| self.theta[b] < t) {
                        slot[1] = Some(i);
                    }
                }
                _ => {
                    slot[1] = slot[0];
                    slot[0] = Some(i);
                }
            }
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..k {
            for b in a..k {
                let pair = if a == b {
                    top[a][0].zip(top[a][1])
                } else {
                    top[a][0].zip(top[b][0])
                };
                if let Some((i, j)) = pair {
                    let v = self.omega(i, j);
                    if best.is_none_or(|(_, _, w)| v > w) {
                        best = Some((i.min(j), i.max(j), v));
                    }
                }
            }
        }
        best
    }
}

fn check_community_matrix(p: &DMatrix<f64>, k: usize) -> Result<(), DcbmError> {
    if p.nrows() != k || p.ncols() != k || k == 0 {
        return Err(DcbmError::BadShape { rows: p.nrows(), cols: p.ncols(), k });
    }
    for r in 0..k {
        for c in 0..k {
            if p[(r, c)] < 0.0 {
                return Err(DcbmError::NegativeEntry { row: r, col: c });
            }
            if (p[(r, c)] - p[(c, r)]).abs() > 1e-12 {
                return Err(DcbmError::NotSymmetric { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Dense `Omega = Theta Pi P Pi' Theta`, diagonal included. The sampler
/// never reads the diagonal; it is kept so that the spectrum of the returned
/// matrix is exactly `||theta||^2 eig(HPH)`.
pub fn build_omega(params: &DcbmParams) -> DMatrix<f64> {
    let n = params.n();
    DMatrix::from_fn(n, n, |i, j| params.omega(i, j))
}

/// Draws a graph with independent `Bernoulli(prob(i, j))` edges for `i < j`.
/// Probabilities at or above 1 always produce an edge.
pub fn sample_bernoulli_graph<R: Rng>(n: usize, prob: impl Fn(usize, usize) -> f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = prob(i, j);
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges).expect("indices are in range").0
}

pub fn sample_adjacency<R: Rng>(params: &DcbmParams, rng: &mut R) -> Graph {
    sample_bernoulli_graph(params.n(), |i, j| params.omega(i, j), rng)
}

/// Distribution `f(theta)` of the unnormalized degree parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ThetaLaw {
    Uniform { a: f64, b: f64 },
    /// Pareto with the given shape (tail index) and scale (minimum value).
    Pareto { shape: f64, scale: f64 },
    /// Value `a` with probability `p`, otherwise `b`.
    TwoPoint { p: f64, a: f64, b: f64 },
}

impl ThetaLaw {
    fn validate(&self) -> Result<(), DcbmError> {
        let ok = match *self {
            ThetaLaw::Uniform { a, b } => a > 0.0 && b > a,
            ThetaLaw::Pareto { shape, scale } => shape > 0.0 && scale > 0.0,
            ThetaLaw::TwoPoint { p, a, b } => (0.0..=1.0).contains(&p) && a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DcbmError::Config(format!("invalid theta law {self:?}")))
        }
    }

    pub fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            ThetaLaw::Uniform { a, b } => {
                let dist = Uniform::new(a, b).expect("validated bounds");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            ThetaLaw::Pareto { shape, scale } => {
                let dist = Pareto::new(scale, shape).expect("validated parameters");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            ThetaLaw::TwoPoint { p, a, b } => (0..n).map(|_| if rng.random::<f64>() < p { a } else { b }).collect(),
        }
    }
}

/// Draws `n` values from `law` and rescales them so that `||theta|| = beta`.
pub fn sample_theta<R: Rng>(law: &ThetaLaw, n: usize, beta: f64, rng: &mut R) -> Result<Vec<f64>, DcbmError> {
    law.validate()?;
    let raw = law.draw(n, rng);
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, &t)| !(t > 0.0)) {
        return Err(DcbmError::NonPositiveTheta { index, value });
    }
    let norm = raw.iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok(raw.iter().map(|t| beta * t / norm).collect())
}

/// Structure of the community matrix as a function of `K` and `b_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum PPattern {
    /// `P[k][l] = 1 - (1 - b)(|k - l| + 1) / K` off the diagonal.
    Toeplitz,
    /// `P[k][l] = 1 - (1 - b)(|k - l| + K - 1) / (2K)` off the diagonal.
    OffsetToeplitz,
    /// `P[k][l] = 1 - |k - l| (1 - b) / divisor`.
    LinearOffdiag { divisor: f64 },
    /// `P[k][l] = b` off the diagonal.
    ConstantOffdiag,
    Custom { matrix: Vec<Vec<f64>> },
}

impl PPattern {
    pub fn build(&self, k: usize, b: f64) -> DMatrix<f64> {
        let kf = k as f64;
        let off = |r: usize, c: usize| -> f64 {
            let gap = r.abs_diff(c) as f64;
            match self {
                PPattern::Toeplitz => 1.0 - (1.0 - b) * (gap + 1.0) / kf,
                PPattern::OffsetToeplitz => 1.0 - (1.0 - b) * (gap + kf - 1.0) / (2.0 * kf),
                PPattern::LinearOffdiag { divisor } => 1.0 - gap * (1.0 - b) / divisor,
                PPattern::ConstantOffdiag => b,
                PPattern::Custom { matrix } => matrix[r][c],
            }
        };
        DMatrix::from_fn(k, k, |r, c| if r == c && !matches!(self, PPattern::Custom { .. }) { 1.0 } else { off(r, c) })
    }
}

/// How `rho_n` is computed for the outlier variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoRule {
    /// `n^-2 * sum_ij Omega_ij`: the average edge probability.
    #[default]
    MeanEntry,
    /// `n^-1 * sum_ij Omega_ij`: the average expected degree.
    MeanRowSum,
}

/// Misspecification applied on top of a hard DCBM.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MembershipVariant {
    #[default]
    Hard,
    /// Each node independently becomes a mixed node with membership drawn
    /// from `Dirichlet(1_K)` with probability `dirichlet_weight`.
    Mixed { dirichlet_weight: f64 },
    /// A `fraction` of nodes is selected and their rows and columns of
    /// `Omega` are overwritten with `rho_n`.
    Outlier {
        fraction: f64,
        #[serde(default)]
        rho: RhoRule,
    },
}

impl MembershipVariant {
    pub fn validate(&self) -> Result<(), DcbmError> {
        match *self {
            MembershipVariant::Hard => Ok(()),
            MembershipVariant::Mixed { dirichlet_weight } if (0.0..=1.0).contains(&dirichlet_weight) => Ok(()),
            MembershipVariant::Outlier { fraction, .. } if (0.0..1.0).contains(&fraction) || fraction == 1.0 => {
                Ok(())
            }
            _ => Err(DcbmError::Config(format!("invalid variant {self:?}"))),
        }
    }
}

/// Off-diagonal probabilities at or above 1 are replaced by this value.
pub const CLIP_CEILING: f64 = 1.0 - 1e-9;

/// Dense edge probabilities produced by a variant.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub omega: DMatrix<f64>,
    /// Membership vectors (rows on the simplex); `None` for hard models.
    pub memberships: Option<Vec<Vec<f64>>>,
    pub outliers: Vec<usize>,
    pub clipped: usize,
}

pub fn apply_variant<R: Rng>(params: &DcbmParams, variant: &MembershipVariant, rng: &mut R) -> Result<VariantOutcome, DcbmError> {
    variant.validate()?;
    let n = params.n();
    let k = params.k();
    let mut outcome = VariantOutcome {
        omega: build_omega(params),
        memberships: None,
        outliers: Vec::new(),
        clipped: 0,
    };
    match *variant {
        MembershipVariant::Hard => {}
        MembershipVariant::Mixed { dirichlet_weight } => {
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut pi = vec![0.0; k];
                if k > 1 && dirichlet_weight > 0.0 && rng.random::<f64>() < dirichlet_weight {
                    pi = flat_dirichlet(k, rng);
                } else {
                    pi[params.labels()[i]] = 1.0;
                }
                rows.push(pi);
            }
            let p = params.p();
            let theta = params.theta();
            let mixed: Vec<Vec<f64>> = rows
                .iter()
                .map(|pi| (0..k).map(|c| (0..k).map(|r| pi[r] * p[(r, c)]).sum()).collect())
                .collect();
            outcome.omega = DMatrix::from_fn(n, n, |i, j| {
                theta[i] * theta[j] * mixed[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            outcome.memberships = Some(rows);
        }
        MembershipVariant::Outlier { fraction, rho } => {
            let total: f64 = outcome.omega.iter().sum();
            let rho_n = match rho {
                RhoRule::MeanEntry => total / (n * n) as f64,
                RhoRule::MeanRowSum => total / n as f64,
            };
            let count = (fraction * n as f64).round() as usize;
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(rng);
            let mut selected: Vec<usize> = nodes.into_iter().take(count).collect();
            selected.sort_unstable();
            for &i in &selected {
                for j in 0..n {
                    outcome.omega[(i, j)] = rho_n;
                    outcome.omega[(j, i)] = rho_n;
                }
            }
            outcome.outliers = selected;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && outcome.omega[(i, j)] >= 1.0 {
                outcome.omega[(i, j)] = CLIP_CEILING;
                if i < j {
                    outcome.clipped += 1;
                }
            }
        }
    }
    if outcome.clipped > 0 {
        log::warn!("clipped {} edge probabilities at or above 1", outcome.clipped);
    }
    Ok(outcome)
}

/// `Dirichlet(1, ..., 1)`: normalized standard exponentials.
fn flat_dirichlet<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|x: &f64| x / total).collect()
}

/// Eigen-structure of `H P H`, ordered by decreasing `|mu|`.
#[derive(Debug, Clone)]
pub struct HphSpectrum {
    /// Diagonal of `H`: `||theta^(k)|| / ||theta||`.
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    /// Unit eigenvectors as columns; the first has positive entries.
    pub eta: DMatrix<f64>,
    /// Set when the leading eigenvalue is not simple (reducible `P`).
    pub non_simple_leading: bool,
}

pub fn hph_spectrum(params: &DcbmParams) -> Result<HphSpectrum, DcbmError> {
    let k = params.k();
    let mut block = vec![0.0; k];
    for (&t, &l) in params.theta().iter().zip(params.labels()) {
        block[l] += t * t;
    }
    if let Some(empty) = block.iter().position(|&b| b == 0.0) {
        return Err(DcbmError::EmptyCommunity(empty));
    }
    let total: f64 = block.iter().sum();
    let h: Vec<f64> = block.iter().map(|b| (b / total).sqrt()).collect();
    let hph = DMatrix::from_fn(k, k, |r, c| h[r] * params.p()[(r, c)] * h[c]);
    let (mu, mut eta) = sorted_symmetric_eigen(hph);
    if eta.column(0).sum() < 0.0 {
        eta.column_mut(0).neg_mut();
    }
    let non_simple_leading = k > 1 && (mu[0] - mu[1]).abs() <= 1e-10 * mu[0].abs().max(1.0);
    if non_simple_leading {
        log::warn!("leading eigenvalue of HPH is not simple");
    }
    Ok(HphSpectrum { h, mu, eta, non_simple_leading })
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ordered by
/// decreasing magnitude (ties: larger signed value first).
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        y.abs().total_cmp(&x.abs()).then(y.total_cmp(&x))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    /// The `K` nonzero eigenvalues of `Omega`, by decreasing magnitude.
    pub lambda: Vec<f64>,
    /// `|lambda_K| / sqrt(lambda_1)`.
    pub snr: f64,
    pub a0: f64,
    /// `a0 * snr`.
    pub s_n: f64,
    pub theta_max: f64,
    pub theta_min: f64,
    pub theta_norm: f64,
    pub theta_l1: f64,
}

pub fn snr_report(params: &DcbmParams) -> Result<SnrReport, DcbmError> {
    let spectrum = hph_spectrum(params)?;
    let theta = params.theta();
    let theta_norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    let theta_l1: f64 = theta.iter().sum();
    let theta_max = theta.iter().copied().fold(f64::MIN, f64::max);
    let theta_min = theta.iter().copied().fold(f64::MAX, f64::min);
    let lambda: Vec<f64> = spectrum.mu.iter().map(|mu| theta_norm * theta_norm * mu).collect();
    let last = lambda[lambda.len() - 1].abs();
    if last <= SINGULAR_TOLERANCE * lambda[0].abs() {
        return Err(DcbmError::Singular { sigma_min: last });
    }
    let snr = last / lambda[0].sqrt();
    let a0 = (theta_min / theta_max) * (theta_norm / (theta_max * theta_l1).sqrt());
    Ok(SnrReport {
        lambda,
        snr,
        a0,
        s_n: a0 * snr,
        theta_max,
        theta_min,
        theta_norm,
        theta_l1,
    })
}

/// A `(K0 + m)`-community random-label model built from a `K0`-community
/// base by splitting its last community, plus its unit-diagonal
/// reparametrization.
#[derive(Debug, Clone)]
pub struct LowerBoundModel {
    pub base: DcbmParams,
    pub extra: usize,
    pub b_n: f64,
    /// The enlarged community matrix before reparametrization.
    pub p: DMatrix<f64>,
    /// Labels in `0..K0 + m`.
    pub labels: Vec<usize>,
    pub theta_star: Vec<f64>,
    pub p_star: DMatrix<f64>,
}

impl LowerBoundModel {
    pub fn k(&self) -> usize {
        self.p.nrows()
    }

    /// `Omega` from `(Theta, Pi, P)`.
    pub fn omega(&self) -> DMatrix<f64> {
        let theta = self.base.theta();
        let n = theta.len();
        DMatrix::from_fn(n, n, |i, j| theta[i] * theta[j] * self.p[(self.labels[i], self.labels[j])])
    }

    /// `Omega` from `(Theta*, Pi, P*)`.
    pub fn omega_star(&self) -> DMatrix<f64> {
        let n = self.theta_star.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.theta_star[i] * self.theta_star[j] * self.p_star[(self.labels[i], self.labels[j])]
        })
    }

    /// The reparametrized model as validated DCBM parameters.
    pub fn params(&self) -> Result<DcbmParams, DcbmError> {
        DcbmParams::new(self.theta_star.clone(), self.labels.clone(), self.p_star.clone())
    }
}

pub fn build_lower_bound_model<R: Rng>(
    base: &DcbmParams,
    extra: usize,
    b_n: f64,
    tolerance: f64,
    rng: &mut R,
) -> Result<LowerBoundModel, DcbmError> {
    if extra == 0 {
        return Err(DcbmError::Config("the number of added communities must be at least 1".into()));
    }
    if !(b_n > 0.0 && b_n <= 1.0) {
        return Err(DcbmError::Config(format!("b_n = {b_n} must lie in (0, 1]")));
    }
    let k0 = base.k();
    let k = k0 + extra;
    let bf = b_n;
    let scale = (extra as f64 + 1.0) / (1.0 + extra as f64 * bf);
    let mut p = DMatrix::zeros(k, k);
    if k0 > 1 {
        let s = base.p().view((0, 0), (k0 - 1, k0 - 1)).into_owned();
        let beta = base.p().view((0, k0 - 1), (k0 - 1, 1)).into_owned();
        let s_inv = s.clone().try_inverse().ok_or(DcbmError::SingularBlock)?;
        let value = (beta.transpose() * &s_inv * &beta)[(0, 0)] - 1.0;
        if value.abs() < tolerance || !value.is_finite() {
            return Err(DcbmError::DegenerateBase { value, tolerance });
        }
        p.view_mut((0, 0), (k0 - 1, k0 - 1)).copy_from(&s);
        for r in 0..k0 - 1 {
            for c in k0 - 1..k {
                p[(r, c)] = beta[r];
                p[(c, r)] = beta[r];
            }
        }
    }
    for r in k0 - 1..k {
        for c in k0 - 1..k {
            let m_entry = if r == c { 1.0 } else { bf };
            p[(r, c)] = scale * m_entry;
        }
    }
    let labels: Vec<usize> = base
        .labels()
        .iter()
        .map(|&l| if l == k0 - 1 { k0 - 1 + rng.random_range(0..=extra) } else { l })
        .collect();
    let d: Vec<f64> = (0..k).map(|r| p[(r, r)].sqrt()).collect();
    let p_star = DMatrix::from_fn(k, k, |r, c| p[(r, c)] / (d[r] * d[c]));
    let theta_star = base
        .theta()
        .iter()
        .zip(&labels)
        .map(|(t, &l)| t * d[l])
        .collect();
    Ok(LowerBoundModel {
        base: base.clone(),
        extra,
        b_n,
        p,
        labels,
        theta_star,
        p_star,
    })
}

/// Community labels drawn iid from `weights`.
pub fn sample_labels<R: Rng>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>, DcbmError> {
    let dist = WeightedIndex::new(weights).map_err(|e| DcbmError::Config(format!("community weights: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// The `model` section of a simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub beta_n: f64,
    pub b_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSection {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub replicates: usize,
    pub seed: u64,
}

/// A complete description of one simulated DCBM setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub model: ModelSection,
    pub theta: ThetaLaw,
    pub pi: PiSection,
    #[serde(rename = "P")]
    pub p: PPattern,
    #[serde(default)]
    pub variant: MembershipVariant,
    pub run: RunSection,
}

/// One draw of the generative model for a replicate.
#[derive(Debug, Clone)]
pub struct GeneratedModel {
    pub params: DcbmParams,
    pub variant: Option<VariantOutcome>,
}

impl GeneratedModel {
    /// Ground-truth hard labels: the community of pure nodes, the argmax of
    /// the membership vector for mixed nodes.
    pub fn labels(&self) -> Vec<usize> {
        match self.variant.as_ref().and_then(|v| v.memberships.as_ref()) {
            Some(rows) => rows
                .iter()
                .map(|pi| (0..pi.len()).fold(0, |best, k| if pi[k] > pi[best] { k } else { best }))
                .collect(),
            None => self.params.labels().to_vec(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Graph {
        match &self.variant {
            Some(v) => sample_bernoulli_graph(self.params.n(), |i, j| v.omega[(i, j)], rng),
            None => sample_adjacency(&self.params, rng),
        }
    }
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<Self, DcbmError> {
        let config: Self = toml::from_str(text).map_err(|e| DcbmError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), DcbmError> {
        let m = &self.model;
        if m.n < 2 || m.k == 0 || m.k > m.n {
            return Err(DcbmError::Config(format!("need 1 <= K <= n and n >= 2, got n={} K={}", m.n, m.k)));
        }
        if !(m.beta_n > 0.0) {
            return Err(DcbmError::Config("beta_n must be positive".into()));
        }
        if !(m.b_n > 0.0 && m.b_n < 1.0) {
            return Err(DcbmError::Config(format!("b_n = {} must lie in (0, 1)", m.b_n)));
        }
        if self.pi.weights.len() != m.k {
            return Err(DcbmError::Config(format!("pi.weights has {} entries, expected K = {}", self.pi.weights.len(), m.k)));
        }
        if self.pi.weights.iter().any(|&w| !(w >= 0.0)) || (self.pi.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DcbmError::Config("pi.weights must be nonnegative and sum to 1".into()));
        }
        if let PPattern::Custom { matrix } = &self.p {
            if matrix.len() != m.k || matrix.iter().any(|row| row.len() != m.k) {
                return Err(DcbmError::Config("custom P must be K x K".into()));
            }
        }
        if self.run.replicates == 0 {
            return Err(DcbmError::Config("run.replicates must be at least 1".into()));
        }
        self.theta.validate()?;
        self.variant.validate()
    }

    pub fn community_matrix(&self) -> DMatrix<f64> {
        self.p.build(self.model.k, self.model.b_n)
    }

    /// Draws `theta`, labels and (if configured) the variant's probabilities.
    pub fn draw_model<R: Rng>(&self, rng: &mut R) -> Result<GeneratedModel, DcbmError> {
        let theta = sample_theta(&self.theta, self.model.n, self.model.beta_n, rng)?;
        let labels = sample_labels(&self.pi.weights, self.model.n, rng)?;
        let params = DcbmParams::new(theta, labels, self.community_matrix())?;
        let variant = match self.variant {
            MembershipVariant::Hard => None,
            _ => Some(apply_variant(&params, &self.variant, rng)?),
        };
        Ok(GeneratedModel { params, variant })
    }
}
