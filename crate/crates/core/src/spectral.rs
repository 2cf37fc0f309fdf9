//! Leading eigenpairs of a symmetric operator and the SCORE ratio matrix.
//!
//! Eigenpairs are ordered by decreasing `|lambda|`. Large operators use block
//! subspace iteration with a QR re-orthonormalization and a Rayleigh-Ritz
//! step every sweep; operators of dimension at most
//! [`EigenConfig::dense_below`] are solved densely.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dcbm::sorted_symmetric_eigen;
use crate::graph::Graph;
use crate::rng::stream;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("requested {m} eigenpairs of a {n}x{n} matrix; need 1 <= m <= n - 1")]
    BadCount { m: usize, n: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residuals {residuals:?})")]
    NotConverged { iterations: usize, residuals: Vec<f64> },
    #[error("the ratio matrix needs m >= 2 and at most {available} eigenvectors, got m = {m}")]
    BadRatioDimension { m: usize, available: usize },
}

/// A real symmetric linear operator.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = M x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_block(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            let mut out = vec![0.0; x.nrows()];
            self.apply(&col, &mut out);
            y.column_mut(c).copy_from_slice(&out);
        }
        y
    }
}

impl SymmetricOperator for Graph {
    fn dim(&self) -> usize {
        self.node_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenConfig {
    /// Residual bound: `||M v - lambda v|| <= tol * max(1, |lambda|)`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub seed: u64,
    /// Extra block columns beyond the requested count.
    pub oversample: usize,
    /// Operators of at most this dimension are decomposed densely.
    pub dense_below: usize,
    /// Relative gap under which `|lambda_m|` and `|lambda_{m+1}|` are
    /// flagged as near-degenerate.
    pub degeneracy_gap: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            seed: 0,
            oversample: 10,
            dense_below: 64,
            degeneracy_gap: 1e-6,
        }
    }
}

/// Entries of the leading eigenvector above this negative value are treated
/// as rounding noise and set to zero.
pub const PERRON_SNAP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Signed eigenvalues, decreasing in magnitude.
    pub lambdas: Vec<f64>,
    /// Unit-norm columns, one per eigenvalue.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Estimate of the next eigenvalue, when one was computed.
    pub next_lambda: Option<f64>,
    pub iterations: usize,
    /// Entries of the leading vector below `-PERRON_SNAP`.
    pub perron_violations: usize,
}

impl EigenPairs {
    pub fn m(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// The leading `m` pairs.
    pub fn truncated(&self, m: usize) -> EigenPairs {
        assert!(m >= 1 && m <= self.m(), "cannot truncate {} pairs to {m}", self.m());
        EigenPairs {
            lambdas: self.lambdas[..m].to_vec(),
            vectors: self.vectors.columns(0, m).into_owned(),
            residuals: self.residuals[..m].to_vec(),
            next_lambda: self.lambdas.get(m).copied().or(if m == self.m() { self.next_lambda } else { None }),
            iterations: self.iterations,
            perron_violations: self.perron_violations,
        }
    }

    /// Whether `|lambda_m|` is within `gap` (relative) of `|lambda_{m+1}|`.
    pub fn near_degenerate(&self, gap: f64) -> bool {
        let last = self.lambdas[self.m() - 1].abs();
        self.next_lambda.is_some_and(|next| (last - next.abs()).abs() <= gap * last.max(1.0))
    }
}

pub fn top_eigenpairs<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    m: usize,
    config: &EigenConfig,
) -> Result<EigenPairs, SpectralError> {
    let n = op.dim();
    if m == 0 || m + 1 > n {
        return Err(SpectralError::BadCount { m, n });
    }
    let block = (m + config.oversample).min(n);
    let (lambdas, vectors, iterations, next) = if n <= config.dense_below || block == n {
        dense_pairs(op, m)
    } else {
        subspace_iteration(op, m, block, config)?
    };
    let mut pairs = EigenPairs {
        residuals: Vec::new(),
        lambdas,
        vectors,
        next_lambda: next,
        iterations,
        perron_violations: 0,
    };
    fix_signs(&mut pairs);
    pairs.residuals = residuals(op, &pairs.vectors, &pairs.lambdas);
    if pairs.near_degenerate(config.degeneracy_gap) {
        log::warn!("|lambda_{m}| is within {} of |lambda_{}|", config.degeneracy_gap, m + 1);
    }
    Ok(pairs)
}

fn dense_pairs<Op: SymmetricOperator + ?Sized>(op: &Op, m: usize) -> (Vec<f64>, DMatrix<f64>, usize, Option<f64>) {
    let n = op.dim();
    let full = op.apply_block(&DMatrix::identity(n, n));
    let full = (&full + full.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(full);
    (values[..m].to_vec(), vectors.columns(0, m).into_owned(), 1, values.get(m).copied())
}

fn subspace_iteration<Op: SymmetricOperator + ?Sized>(
    op: &Op,
    m: usize,
    block: usize,
    config: &EigenConfig,
) -> Result<(Vec<f64>, DMatrix<f64>, usize, Option<f64>), SpectralError> {
    let n = op.dim();
    let max_iter = config.max_iter.unwrap_or(10 * n).max(1);
    let mut rng = stream(config.seed, 0);
    let start = DMatrix::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    let mut q = start.qr().q();
    let mut last = Vec::new();
    for iteration in 1..=max_iter {
        let aq = op.apply_block(&q);
        let t = q.transpose() * &aq;
        let t = (&t + t.transpose()) * 0.5;
        let (theta, w) = sorted_symmetric_eigen(t);
        let ritz = &q * &w;
        let aritz = &aq * &w;
        last = (0..m)
            .map(|k| (aritz.column(k) - ritz.column(k) * theta[k]).norm())
            .collect::<Vec<_>>();
        let done = last.iter().zip(&theta).all(|(r, l)| *r <= config.tol * l.abs().max(1.0));
        if done {
            return Ok((theta[..m].to_vec(), ritz.columns(0, m).into_owned(), iteration, theta.get(m).copied()));
        }
        q = aritz.qr().q();
    }
    Err(SpectralError::NotConverged { iterations: max_iter, residuals: last })
}

fn fix_signs(pairs: &mut EigenPairs) {
    let v = &mut pairs.vectors;
    if v.column(0).sum() < 0.0 {
        v.column_mut(0).neg_mut();
    }
    let mut violations = 0;
    for x in v.column_mut(0).iter_mut() {
        if *x < 0.0 {
            if *x > -PERRON_SNAP {
                *x = 0.0;
            } else {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        log::warn!("leading eigenvector has {violations} clearly negative entries (graph may be disconnected)");
    }
    pairs.perron_violations = violations;
    for c in 1..v.ncols() {
        let mut best = 0;
        for r in 1..v.nrows() {
            if v[(r, c)].abs() > v[(best, c)].abs() {
                best = r;
            }
        }
        if v[(best, c)] < 0.0 {
            v.column_mut(c).neg_mut();
        }
    }
}

fn residuals<Op: SymmetricOperator + ?Sized>(op: &Op, vectors: &DMatrix<f64>, lambdas: &[f64]) -> Vec<f64> {
    let av = op.apply_block(vectors);
    lambdas
        .iter()
        .enumerate()
        .map(|(k, l)| (av.column(k) - vectors.column(k) * *l).norm())
        .collect()
}

/// Denominator guard for the ratio matrix.
pub const RATIO_EPSILON: f64 = 1e-12;

/// Default clip threshold `T_n = ln(n)`.
pub fn default_clip(n: usize) -> f64 {
    (n as f64).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    pub m: usize,
    /// `n x (m - 1)`.
    pub r: DMatrix<f64>,
    pub clip: f64,
    /// Number of entries that hit `+-clip`.
    pub clipped: usize,
}

/// `R(i, k) = xi_{k+1}(i) / xi_1(i)`, clipped to `[-clip, clip]`.
pub fn score_ratio_matrix(pairs: &EigenPairs, m: usize, clip: f64) -> Result<RatioMatrix, SpectralError> {
    if m < 2 || m > pairs.m() {
        return Err(SpectralError::BadRatioDimension { m, available: pairs.m() });
    }
    let v = &pairs.vectors;
    let mut clipped = 0;
    let r = DMatrix::from_fn(v.nrows(), m - 1, |i, k| {
        let num = v[(i, k + 1)];
        let den = v[(i, 0)];
        let raw = match (den.abs() < RATIO_EPSILON, num == 0.0) {
            (true, true) => 0.0,
            (true, false) => clip.copysign(num),
            (false, _) => num / den,
        };
        if raw.abs() >= clip {
            clipped += 1;
            clip.copysign(raw)
        } else {
            raw
        }
    });
    Ok(RatioMatrix { m, r, clip, clipped })
}
