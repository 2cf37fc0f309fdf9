//! Refitting the model from estimated labels and the refitted quadrilateral
//! statistic.
//!
//! For labels with `m` classes the refit is
//!
//! ```text
//! theta_hat[i] = d[i] / (1_k' A 1_n) * sqrt(1_k' A 1_k)     (i in class k)
//! P_hat[k][l]  = 1_k' A 1_l / sqrt(1_k' A 1_k * 1_l' A 1_l)
//! Omega_hat    = Theta_hat Pi_hat P_hat Pi_hat' Theta_hat
//! ```
//!
//! `Q_n` sums `(A - Omega_hat)` around every 4-cycle of distinct nodes. With
//! `M` the residual matrix with its diagonal zeroed,
//!
//! ```text
//! Q_n = tr(M^4) - 2 sum_i (M^2)_ii^2 + sum_{i != j} M_ij^4
//! ```
//!
//! and each term is accumulated one column at a time: `x = M e_i` costs
//! `O(n)`, `M x` costs a sparse product plus a rank-`m` product, and
//! `tr(M^4) = sum_i ||M^2 e_i||^2`. No `n x n` matrix is formed.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::Graph;
use crate::spectral::SymmetricOperator;

#[derive(Debug, Error, PartialEq)]
pub enum GofError {
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("cluster {0} has no internal edges")]
    NoInternalEdges(usize),
    #[error("cluster {0} has zero total degree")]
    ZeroDegree(usize),
    #[error("label {label} is outside 0..{m}")]
    LabelOutOfRange { label: usize, m: usize },
    #[error("expected {expected} labels, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("graph has no quadrilaterals; statistic undefined")]
    NoQuadrilaterals,
    #[error("V_hat[{0}] is zero")]
    ZeroV(usize),
    #[error("adjacency matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
}

/// The inputs the refit and the statistic need from an adjacency matrix.
pub trait Adjacency: SymmetricOperator {
    /// Row sums, diagonal included.
    fn row_sums(&self) -> Vec<f64>;
    /// Writes column `i` into `out`.
    fn column(&self, i: usize, out: &mut [f64]);
    fn diagonal(&self, i: usize) -> f64;

    /// `1_k' A 1_l` for all pairs of classes.
    fn block_sums(&self, labels: &[usize], m: usize) -> DMatrix<f64> {
        let n = self.dim();
        let mut sums = DMatrix::zeros(m, m);
        let mut col = vec![0.0; n];
        for j in 0..n {
            self.column(j, &mut col);
            for (i, &a) in col.iter().enumerate() {
                sums[(labels[i], labels[j])] += a;
            }
        }
        sums
    }

    /// Sum over ordered distinct quadruples of the products around the
    /// 4-cycle; off-diagonal entries only.
    fn quadrilateral_total(&self) -> f64 {
        q_from_residuals(self, None)
    }
}

impl Adjacency for Graph {
    fn row_sums(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.degree(i) as f64).collect()
    }

    fn column(&self, i: usize, out: &mut [f64]) {
        out.fill(0.0);
        for &j in self.neighbors(i) {
            out[j] = 1.0;
        }
    }

    fn diagonal(&self, _i: usize) -> f64 {
        0.0
    }

    fn block_sums(&self, labels: &[usize], m: usize) -> DMatrix<f64> {
        let mut sums = DMatrix::zeros(m, m);
        for i in 0..self.node_count() {
            for &j in self.neighbors(i) {
                sums[(labels[i], labels[j])] += 1.0;
            }
        }
        sums
    }

    fn quadrilateral_total(&self) -> f64 {
        quadrilateral_count(self) as f64
    }
}

/// A dense real symmetric matrix standing in for `A`, diagonal allowed.
/// Feeding `Omega` itself reproduces the model parameters under the refit.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency {
    matrix: DMatrix<f64>,
}

impl WeightedAdjacency {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, GofError> {
        assert!(matrix.is_square(), "adjacency must be square");
        for r in 0..matrix.nrows() {
            for c in r + 1..matrix.ncols() {
                if (matrix[(r, c)] - matrix[(c, r)]).abs() > 1e-12 * matrix[(r, c)].abs().max(1.0) {
                    return Err(GofError::NotSymmetric { row: r, col: c });
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl SymmetricOperator for WeightedAdjacency {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.apply(x, y);
    }
}

impl Adjacency for WeightedAdjacency {
    fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    fn column(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.matrix.column(i).as_slice());
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }
}

/// Refitted parameters for one set of labels. `Omega_hat` is kept in this
/// factored form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefitModel {
    pub m: usize,
    pub labels: Vec<usize>,
    pub theta_hat: Vec<f64>,
    pub p_hat: Vec<Vec<f64>>,
    pub g_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    /// Diagonal of `V_hat = diag(P_hat g_hat)`.
    pub v_hat: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl RefitModel {
    pub fn n(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.theta_hat[i] * self.theta_hat[j] * self.p_hat[self.labels[i]][self.labels[j]]
    }

    /// `y = Omega_hat x`, diagonal included.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut s = vec![0.0; self.m];
        for ((&xi, &t), &l) in x.iter().zip(&self.theta_hat).zip(&self.labels) {
            s[l] += t * xi;
        }
        let mixed: Vec<f64> = (0..self.m)
            .map(|k| self.p_hat[k].iter().zip(&s).map(|(p, s)| p * s).sum())
            .collect();
        for ((yi, &t), &l) in y.iter_mut().zip(&self.theta_hat).zip(&self.labels) {
            *yi = t * mixed[l];
        }
    }

    pub fn dense_omega(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.n(), |i, j| self.omega(i, j))
    }

    pub fn theta_norm(&self) -> f64 {
        self.theta_hat.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

pub fn refit<A: Adjacency + ?Sized>(adj: &A, labels: &[usize], m: usize) -> Result<RefitModel, GofError> {
    let n = adj.dim();
    if labels.len() != n {
        return Err(GofError::LengthMismatch { expected: n, got: labels.len() });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= m) {
        return Err(GofError::LabelOutOfRange { label, m });
    }
    let mut sizes = vec![0; m];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(GofError::EmptyCluster(k));
    }
    let block = adj.block_sums(labels, m);
    let row_total: Vec<f64> = (0..m).map(|k| block.row(k).sum()).collect();
    for k in 0..m {
        if !(row_total[k] > 0.0) {
            return Err(GofError::ZeroDegree(k));
        }
        if !(block[(k, k)] > 0.0) {
            return Err(GofError::NoInternalEdges(k));
        }
    }
    let d = adj.row_sums();
    let theta_hat: Vec<f64> = d
        .iter()
        .zip(labels)
        .map(|(di, &k)| di / row_total[k] * block[(k, k)].sqrt())
        .collect();
    let p_hat: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| if k == l { 1.0 } else { block[(k, l)] / (block[(k, k)] * block[(l, l)]).sqrt() })
                .collect()
        })
        .collect();
    let l1: f64 = theta_hat.iter().sum();
    let l2sq: f64 = theta_hat.iter().map(|t| t * t).sum();
    let mut g_hat = vec![0.0; m];
    let mut h_sq = vec![0.0; m];
    for (&t, &k) in theta_hat.iter().zip(labels) {
        g_hat[k] += t;
        h_sq[k] += t * t;
    }
    g_hat.iter_mut().for_each(|g| *g /= l1);
    let h_hat: Vec<f64> = h_sq.iter().map(|h| (h / l2sq).sqrt()).collect();
    let v_hat: Vec<f64> = p_hat.iter().map(|row| row.iter().zip(&g_hat).map(|(p, g)| p * g).sum()).collect();
    Ok(RefitModel { m, labels: labels.to_vec(), theta_hat, p_hat, g_hat, h_hat, v_hat, sizes })
}

/// Number of ordered quadruples of distinct nodes forming a 4-cycle:
/// `tr(A^4) - 2 sum_i d_i^2 + 2 |E|`, with `tr(A^4)` the sum of squared
/// 2-path counts.
pub fn quadrilateral_count(graph: &Graph) -> u64 {
    let n = graph.node_count();
    let trace: u128 = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u64; n], Vec::new()),
            |(counts, touched), i| {
                for &u in graph.neighbors(i) {
                    for &w in graph.neighbors(u) {
                        if counts[w] == 0 {
                            touched.push(w);
                        }
                        counts[w] += 1;
                    }
                }
                let mut total: u128 = 0;
                for &w in touched.iter() {
                    total += (counts[w] as u128).pow(2);
                    counts[w] = 0;
                }
                touched.clear();
                total
            },
        )
        .sum();
    let deg_sq: u128 = (0..n).map(|i| (graph.degree(i) as u128).pow(2)).sum();
    (trace + 2 * graph.edge_count() as u128 - 2 * deg_sq) as u64
}

/// Columns processed per parallel task; partial sums are combined in a fixed
/// order so the result does not depend on scheduling.
const COLUMN_CHUNK: usize = 32;

fn q_from_residuals<A: Adjacency + ?Sized>(adj: &A, fit: Option<&RefitModel>) -> f64 {
    let n = adj.dim();
    let diag_fit: Vec<f64> = (0..n).map(|i| fit.map_or(0.0, |f| f.omega(i, i))).collect();
    let diag_adj: Vec<f64> = (0..n).map(|i| adj.diagonal(i)).collect();
    let starts: Vec<usize> = (0..n).step_by(COLUMN_CHUNK).collect();
    let partials: Vec<(f64, f64, f64)> = starts
        .par_iter()
        .map(|&start| {
            let mut x = vec![0.0; n];
            let mut ax = vec![0.0; n];
            let mut fx = vec![0.0; n];
            let (mut trace, mut diag_sq, mut fourth) = (0.0, 0.0, 0.0);
            for i in start..(start + COLUMN_CHUNK).min(n) {
                adj.column(i, &mut x);
                if let Some(f) = fit {
                    let row = &f.p_hat[f.labels[i]];
                    let ti = f.theta_hat[i];
                    for ((xj, &tj), &lj) in x.iter_mut().zip(&f.theta_hat).zip(&f.labels) {
                        *xj -= ti * tj * row[lj];
                    }
                }
                x[i] = 0.0;
                adj.apply(&x, &mut ax);
                match fit {
                    Some(f) => f.apply(&x, &mut fx),
                    None => fx.fill(0.0),
                }
                let mut y_sq = 0.0;
                for j in 0..n {
                    let yj = ax[j] - fx[j] - (diag_adj[j] - diag_fit[j]) * x[j];
                    y_sq += yj * yj;
                }
                trace += y_sq;
                diag_sq += x.iter().map(|v| v * v).sum::<f64>().powi(2);
                fourth += x.iter().map(|v| v.powi(4)).sum::<f64>();
            }
            (trace, diag_sq, fourth)
        })
        .collect();
    let (trace, diag_sq, fourth) = partials
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    trace - 2.0 * diag_sq + fourth
}

/// The refitted quadrilateral statistic `Q_n`.
pub fn q_statistic<A: Adjacency + ?Sized>(adj: &A, fit: &RefitModel) -> Result<f64, GofError> {
    if fit.n() != adj.dim() {
        return Err(GofError::LengthMismatch { expected: adj.dim(), got: fit.n() });
    }
    Ok(q_from_residuals(adj, Some(fit)))
}

/// `B_n = 2 ||theta_hat||^4 g' V^-1 (P H^2 P o P H^2 P) V^-1 g`.
pub fn bias_correction(fit: &RefitModel) -> Result<f64, GofError> {
    let m = fit.m;
    if let Some(k) = fit.v_hat.iter().position(|&v| v == 0.0) {
        return Err(GofError::ZeroV(k));
    }
    let p = &fit.p_hat;
    let h2: Vec<f64> = fit.h_hat.iter().map(|h| h * h).collect();
    let w: Vec<f64> = fit.g_hat.iter().zip(&fit.v_hat).map(|(g, v)| g / v).collect();
    let mut quad = 0.0;
    for k in 0..m {
        for l in 0..m {
            let php: f64 = (0..m).map(|s| p[k][s] * h2[s] * p[s][l]).sum();
            quad += w[k] * php * php * w[l];
        }
    }
    Ok(2.0 * fit.theta_norm().powi(4) * quad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofStatistics {
    pub m: usize,
    pub q: f64,
    pub b: f64,
    pub c: f64,
    pub psi: f64,
}

/// `psi = (Q_n - B_n) / sqrt(8 C_n)` for the given labels.
pub fn psi_statistic<A: Adjacency + ?Sized>(adj: &A, labels: &[usize], m: usize) -> Result<GofStatistics, GofError> {
    psi_with_count(adj, labels, m, adj.quadrilateral_total())
}

/// As [`psi_statistic`] with `C_n` supplied by the caller.
pub fn psi_with_count<A: Adjacency + ?Sized>(
    adj: &A,
    labels: &[usize],
    m: usize,
    c: f64,
) -> Result<GofStatistics, GofError> {
    if !(c > 0.0) {
        return Err(GofError::NoQuadrilaterals);
    }
    let fit = refit(adj, labels, m)?;
    let q = q_statistic(adj, &fit)?;
    let b = bias_correction(&fit)?;
    Ok(GofStatistics { m, q, b, c, psi: (q - b) / (8.0 * c).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcbm::{build_omega, sample_adjacency, DcbmParams};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = stream(seed, 0);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, edges).unwrap().0
    }

    fn dense(graph: &Graph) -> DMatrix<f64> {
        let n = graph.node_count();
        DMatrix::from_fn(n, n, |i, j| graph.has_edge(i, j) as u8 as f64)
    }

    /// Sum over ordered distinct quadruples of `M[a][b] M[b][c] M[c][d] M[d][a]`.
    fn brute_cycles(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                if b == a {
                    continue;
                }
                for c in 0..n {
                    if c == a || c == b {
                        continue;
                    }
                    for d in 0..n {
                        if d == a || d == b || d == c {
                            continue;
                        }
                        total += m[(a, b)] * m[(b, c)] * m[(c, d)] * m[(d, a)];
                    }
                }
            }
        }
        total
    }

    fn random_fit(n: usize, m: usize, seed: u64) -> RefitModel {
        let mut rng = stream(seed, 1);
        let labels: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
        let theta_hat: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.9)).collect();
        let mut p_hat = vec![vec![1.0; m]; m];
        for k in 0..m {
            for l in k + 1..m {
                let v = rng.random_range(0.0..1.0);
                p_hat[k][l] = v;
                p_hat[l][k] = v;
            }
        }
        RefitModel {
            m,
            labels,
            theta_hat,
            p_hat,
            g_hat: vec![1.0 / m as f64; m],
            h_hat: vec![1.0; m],
            v_hat: vec![1.0; m],
            sizes: vec![0; m],
        }
    }

    #[test]
    fn hand_counted_quadrilaterals() {
        assert_eq!(quadrilateral_count(&Graph::cycle(4)), 8);
        assert_eq!(quadrilateral_count(&Graph::complete(5)), 120);
        assert_eq!(quadrilateral_count(&Graph::path(7)), 0);
        assert_eq!(quadrilateral_count(&Graph::star(6)), 0);
        assert_eq!(quadrilateral_count(&Graph::cycle(5)), 0);
    }

    #[test]
    fn count_matches_brute_force() {
        for seed in 0..60 {
            let n = 4 + (seed as usize % 7);
            let g = random_graph(n, 0.5, seed);
            let brute = brute_cycles(&dense(&g));
            assert_eq!(quadrilateral_count(&g) as f64, brute, "seed {seed}");
            let weighted = WeightedAdjacency::new(dense(&g)).unwrap();
            assert!((weighted.quadrilateral_total() - brute).abs() < 1e-9);
        }
    }

    #[test]
    fn q_matches_brute_force() {
        for seed in 0..40 {
            let n = 5 + (seed as usize % 8);
            let m = 1 + (seed as usize % 3);
            let g = random_graph(n, 0.4, seed);
            let fit = random_fit(n, m, seed);
            let mut resid = dense(&g) - fit.dense_omega();
            resid.fill_diagonal(0.0);
            let brute = brute_cycles(&resid);
            let q = q_statistic(&g, &fit).unwrap();
            assert!((q - brute).abs() <= 1e-9 * brute.abs().max(1.0), "seed {seed}: {q} vs {brute}");
        }
    }

    #[test]
    fn q_is_zero_without_residuals() {
        let exact = WeightedAdjacency::new(DMatrix::zeros(9, 9)).unwrap();
        let zero = RefitModel { theta_hat: vec![0.0; 9], ..random_fit(9, 1, 0) };
        assert_eq!(q_statistic(&exact, &zero).unwrap(), 0.0);
    }

    #[test]
    fn zero_fit_gives_quadrilateral_count() {
        let g = random_graph(11, 0.5, 8);
        let zero = RefitModel { theta_hat: vec![0.0; 11], ..random_fit(11, 2, 0) };
        assert_eq!(q_statistic(&g, &zero).unwrap(), quadrilateral_count(&g) as f64);
    }

    #[test]
    fn refit_one_class_collapses() {
        let g = random_graph(12, 0.5, 4);
        let fit = refit(&g, &vec![0; 12], 1).unwrap();
        let total = 2.0 * g.edge_count() as f64;
        for i in 0..12 {
            assert!((fit.theta_hat[i] - g.degree(i) as f64 / total.sqrt()).abs() < 1e-12);
            for j in 0..12 {
                let direct = (g.degree(i) * g.degree(j)) as f64 / total;
                assert!((fit.omega(i, j) - direct).abs() < 1e-12);
            }
        }
        assert_eq!(fit.p_hat, vec![vec![1.0]]);
        let b = bias_correction(&fit).unwrap();
        let norm2: f64 = fit.theta_hat.iter().map(|t| t * t).sum();
        assert!((b - 2.0 * norm2 * norm2).abs() < 1e-9 * b);
    }

    #[test]
    fn refit_recovers_parameters_from_omega() {
        let mut rng = stream(6, 0);
        let n = 30;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 1.0, 0.6, 0.1, 0.6, 1.0]);
        let params = DcbmParams::new(theta.clone(), labels.clone(), p.clone()).unwrap();
        let omega = WeightedAdjacency::new(build_omega(&params)).unwrap();
        let fit = refit(&omega, &labels, 3).unwrap();
        for (a, b) in fit.theta_hat.iter().zip(&theta) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in 0..3 {
            for l in 0..3 {
                assert!((fit.p_hat[k][l] - p[(k, l)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factored_omega_matches_direct_loop() {
        let g = random_graph(25, 0.4, 12);
        let labels: Vec<usize> = (0..25).map(|i| i % 3).collect();
        let fit = refit(&g, &labels, 3).unwrap();
        let x: Vec<f64> = (0..25).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; 25];
        fit.apply(&x, &mut y);
        for i in 0..25 {
            let direct: f64 = (0..25)
                .map(|j| fit.theta_hat[i] * fit.theta_hat[j] * fit.p_hat[labels[i]][labels[j]] * x[j])
                .sum();
            assert!((y[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_errors_name_the_cluster() {
        let g = Graph::from_edges(6, vec![(0, 1), (1, 2), (0, 2), (3, 4)]).unwrap().0;
        assert_eq!(refit(&g, &[0, 0, 0, 0, 0, 0], 2).unwrap_err(), GofError::EmptyCluster(1));
        assert_eq!(refit(&g, &[0, 0, 0, 1, 1, 2], 3).unwrap_err(), GofError::ZeroDegree(2));
        assert_eq!(refit(&g, &[0, 0, 1, 2, 2, 2], 3).unwrap_err(), GofError::NoInternalEdges(1));
        assert_eq!(psi_statistic(&Graph::path(5), &[0; 5], 1).unwrap_err(), GofError::NoQuadrilaterals);
    }

    /// `B_n` written out for two classes without the matrix helpers.
    fn two_class_bias(fit: &RefitModel) -> f64 {
        let (g0, g1) = (fit.g_hat[0], fit.g_hat[1]);
        let (h0, h1) = (fit.h_hat[0].powi(2), fit.h_hat[1].powi(2));
        let p = fit.p_hat[0][1];
        let v0 = g0 + p * g1;
        let v1 = p * g0 + g1;
        let m00 = h0 + p * p * h1;
        let m11 = p * p * h0 + h1;
        let m01 = p * h0 + p * h1;
        let quad = (g0 / v0).powi(2) * m00 * m00 + 2.0 * (g0 / v0) * (g1 / v1) * m01 * m01 + (g1 / v1).powi(2) * m11 * m11;
        2.0 * fit.theta_norm().powi(4) * quad
    }

    #[test]
    fn bias_matches_independent_two_class_expression() {
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let params = DcbmParams::new(vec![0.3; 200], labels.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0])).unwrap();
        let g = sample_adjacency(&params, &mut stream(2, 0));
        let fit = refit(&g, &labels, 2).unwrap();
        let b = bias_correction(&fit).unwrap();
        assert!((b - two_class_bias(&fit)).abs() < 1e-9 * b);
    }

    #[test]
    fn noise_free_psi_is_minus_bias() {
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let params = DcbmParams::new(vec![0.4; 40], labels.clone(), DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
        let omega = WeightedAdjacency::new(build_omega(&params)).unwrap();
        let stats = psi_statistic(&omega, &labels, 2).unwrap();
        assert!(stats.q.abs() < 1e-9);
        assert!((stats.psi + stats.b / (8.0 * stats.c).sqrt()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn psi_is_relabeling_invariant(seed in 0u64..10_000, n in 20usize..50, m in 1usize..4) {
            let g = random_graph(n, 0.35, seed);
            let labels: Vec<usize> = (0..n).map(|i| i % m).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut stream(seed, 2));
            let mut moved = vec![0; n];
            for (i, &p) in perm.iter().enumerate() {
                moved[p] = labels[i];
            }
            let a = psi_statistic(&g, &labels, m);
            let b = psi_statistic(&g.permuted(&perm), &moved, m);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.c, b.c);
                    prop_assert!((a.q - b.q).abs() <= 1e-9 * a.q.abs().max(1.0));
                    prop_assert!((a.b - b.b).abs() <= 1e-9 * a.b.abs().max(1.0));
                    prop_assert!((a.psi - b.psi).abs() <= 1e-9 * a.psi.abs().max(1.0));
                }
                (Err(x), Err(y)) => prop_assert_eq!(x, y),
                (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
            }
        }

        #[test]
        fn refit_invariants(seed in 0u64..10_000, n in 15usize..40, m in 1usize..4) {
            let g = random_graph(n, 0.5, seed);
            let labels: Vec<usize> = (0..n).map(|i| i % m).collect();
            if let Ok(fit) = refit(&g, &labels, m) {
                for k in 0..m {
                    prop_assert_eq!(fit.p_hat[k][k], 1.0);
                }
                prop_assert!((fit.g_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(fit.g_hat.iter().chain(&fit.h_hat).all(|&x| x >= 0.0));
            }
        }
    }
}
