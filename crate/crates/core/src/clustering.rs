//! k-means (Lloyd's algorithm with k-means++ seeding) and the clustering
//! diagnostics used to study the no-splitting property: bottom-up pruning
//! distances, the RSS change of moving a subset between two clusters, and a
//! check that no true community is split.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{derive_seed, stream};

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("cannot form {m} clusters from {n} points")]
    TooFewPoints { n: usize, m: usize },
    #[error("m must be at least 1")]
    ZeroClusters,
    #[error("the moved subset must be a nonempty strict subset of its cluster")]
    BadSubset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 20, max_iter: 300, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster ids in `0..m`, numbered by first occurrence.
    pub labels: Vec<usize>,
    /// `m x d`.
    pub centers: DMatrix<f64>,
    pub rss: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

impl ClusterAssignment {
    pub fn m(&self) -> usize {
        self.centers.nrows()
    }
}

/// One Lloyd's run from fixed initial centers.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// RSS after each assignment step.
    pub history: Vec<f64>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols()).map(|j| (points[(i, j)] - centers[(c, j)]).powi(2)).sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, sq_dist(points, i, centers, 0));
    for c in 1..centers.nrows() {
        let d = sq_dist(points, i, centers, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn means(points: &DMatrix<f64>, labels: &[usize], m: usize) -> (DMatrix<f64>, Vec<usize>) {
    let mut centers = DMatrix::zeros(m, points.ncols());
    let mut sizes = vec![0; m];
    for (i, &l) in labels.iter().enumerate() {
        sizes[l] += 1;
        for j in 0..points.ncols() {
            centers[(l, j)] += points[(i, j)];
        }
    }
    for (l, &s) in sizes.iter().enumerate() {
        if s > 0 {
            for j in 0..points.ncols() {
                centers[(l, j)] /= s as f64;
            }
        }
    }
    (centers, sizes)
}

/// Total within-cluster sum of squares of `labels` around `centers`.
pub fn rss(points: &DMatrix<f64>, labels: &[usize], centers: &DMatrix<f64>) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| sq_dist(points, i, centers, l)).sum()
}

/// Moves, for each empty cluster, the point farthest from its center out of
/// a cluster that keeps at least one point.
fn repair_empty(points: &DMatrix<f64>, labels: &mut [usize], centers: &mut DMatrix<f64>, sizes: &mut [usize]) {
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let mut far: Option<(usize, f64)> = None;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] >= 2 {
                let d = sq_dist(points, i, centers, l);
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
        }
        let (i, _) = far.expect("n >= m guarantees a cluster with two points");
        sizes[labels[i]] -= 1;
        labels[i] = empty;
        sizes[empty] = 1;
        let (fresh, _) = means(points, labels, sizes.len());
        *centers = fresh;
    }
}

pub fn lloyd(points: &DMatrix<f64>, initial: DMatrix<f64>, max_iter: usize) -> LloydRun {
    let n = points.nrows();
    let m = initial.nrows();
    let mut centers = initial;
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let (c, _) = nearest(points, i, &centers);
            if *label != c {
                *label = c;
                changed = true;
            }
        }
        history.push(rss(points, &labels, &centers));
        if !changed {
            converged = true;
            break;
        }
        let (fresh, mut sizes) = means(points, &labels, m);
        centers = fresh;
        repair_empty(points, &mut labels, &mut centers, &mut sizes);
    }
    let (mut centers, mut sizes) = means(points, &labels, m);
    repair_empty(points, &mut labels, &mut centers, &mut sizes);
    let total = rss(points, &labels, &centers);
    LloydRun { labels, centers, rss: total, iterations, converged, history }
}

fn plus_plus_seeds<R: Rng>(points: &DMatrix<f64>, m: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| row_dist(points, i, chosen[0])).collect();
    while chosen.len() < m {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Guard against rounding landing on a zero-weight tail.
            if dist[pick] == 0.0 {
                pick = dist.iter().rposition(|&d| d > 0.0).expect("total is positive");
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(row_dist(points, i, next));
        }
    }
    DMatrix::from_fn(m, points.ncols(), |c, j| points[(chosen[c], j)])
}

fn row_dist(points: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    (0..points.ncols()).map(|j| (points[(a, j)] - points[(b, j)]).powi(2)).sum()
}

/// Renumbers clusters by first occurrence and permutes the centers to match.
fn canonicalize(labels: &[usize], centers: &DMatrix<f64>) -> (Vec<usize>, DMatrix<f64>) {
    let m = centers.nrows();
    let mut map = vec![usize::MAX; m];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for slot in map.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let relabeled = labels.iter().map(|&l| map[l]).collect();
    let mut reordered = DMatrix::zeros(m, centers.ncols());
    for (old, &new) in map.iter().enumerate() {
        reordered.row_mut(new).copy_from(&centers.row(old));
    }
    (relabeled, reordered)
}

/// Best-of-restarts k-means on the rows of `points` (`n x d`).
pub fn kmeans(points: &DMatrix<f64>, m: usize, config: &KMeansConfig) -> Result<ClusterAssignment, ClusteringError> {
    kmeans_with_candidates(points, m, config, &[])
}

/// As [`kmeans`], additionally running Lloyd's from the centers of each
/// candidate labelling. The result's RSS is never above a candidate's own.
pub fn kmeans_with_candidates(
    points: &DMatrix<f64>,
    m: usize,
    config: &KMeansConfig,
    candidates: &[Vec<usize>],
) -> Result<ClusterAssignment, ClusteringError> {
    let n = points.nrows();
    if m == 0 {
        return Err(ClusteringError::ZeroClusters);
    }
    if n < m {
        return Err(ClusteringError::TooFewPoints { n, m });
    }
    let restarts = config.restarts.max(1);
    let mut runs: Vec<LloydRun> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(derive_seed(config.seed, &[r as u64]), 0);
            lloyd(points, plus_plus_seeds(points, m, &mut rng), config.max_iter)
        })
        .collect();
    for labels in candidates {
        assert_eq!(labels.len(), n, "candidate labelling has the wrong length");
        let (centers, _) = means(points, labels, m);
        runs.push(lloyd(points, centers, config.max_iter));
    }
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.rss < best.rss { run } else { best })
        .expect("at least one run");
    let (labels, centers) = canonicalize(&best.labels, &best.centers);
    Ok(ClusterAssignment {
        rss: rss(points, &labels, &centers),
        labels,
        centers,
        restarts_used: restarts + candidates.len(),
        converged: best.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruningProfile {
    /// `d_K, d_{K-1}, ..., d_2`.
    pub d_values: Vec<f64>,
    /// Row removed at each step, in order.
    pub removed: Vec<usize>,
}

/// Bottom-up pruning of the rows of `u` (`K x d`): record the minimum
/// pairwise distance, drop the second row of the lexicographically first
/// minimizing pair, repeat until two rows remain and record their distance.
pub fn pruning_distances(u: &DMatrix<f64>) -> PruningProfile {
    let k = u.nrows();
    assert!(k >= 2, "pruning needs at least two rows");
    let dist = |a: usize, b: usize| row_dist(u, a, b).sqrt();
    let mut alive: Vec<usize> = (0..k).collect();
    let mut d_values = Vec::with_capacity(k - 1);
    let mut removed = Vec::with_capacity(k - 2);
    loop {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..alive.len() {
            for b in a + 1..alive.len() {
                let d = dist(alive[a], alive[b]);
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        d_values.push(best.2);
        if alive.len() == 2 {
            break;
        }
        removed.push(alive.remove(best.1));
    }
    PruningProfile { d_values, removed }
}

fn mean_of(points: &DMatrix<f64>, set: &[usize]) -> Vec<f64> {
    (0..points.ncols())
        .map(|j| set.iter().map(|&i| points[(i, j)]).sum::<f64>() / set.len() as f64)
        .collect()
}

fn sq_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Change in two-cluster RSS when the points `c` (a strict subset of `a`)
/// move from cluster `a` to cluster `b`.
pub fn rss_delta(points: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64, ClusteringError> {
    if c.is_empty() || c.len() >= a.len() || b.is_empty() {
        return Err(ClusteringError::BadSubset);
    }
    let (na, nb, nc) = (a.len() as f64, b.len() as f64, c.len() as f64);
    let (ya, yb, yc) = (mean_of(points, a), mean_of(points, b), mean_of(points, c));
    Ok(nb * nc / (nb + nc) * sq_norm_diff(&yc, &yb) - na * nc / (na - nc) * sq_norm_diff(&yc, &ya))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCommunity {
    pub community: usize,
    /// `(cluster, number of the community's nodes in it)`.
    pub clusters: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NspReport {
    pub holds: bool,
    pub violations: Vec<SplitCommunity>,
}

/// Whether every true community lies inside a single estimated cluster.
/// Merging communities is allowed; splitting one is a violation.
pub fn nsp_check(estimated: &[usize], truth: &[usize]) -> NspReport {
    assert_eq!(estimated.len(), truth.len(), "label vectors differ in length");
    let k = truth.iter().max().map_or(0, |&x| x + 1);
    let m = estimated.iter().max().map_or(0, |&x| x + 1);
    let mut table = vec![vec![0usize; m]; k];
    for (&e, &t) in estimated.iter().zip(truth) {
        table[t][e] += 1;
    }
    let violations: Vec<SplitCommunity> = table
        .iter()
        .enumerate()
        .filter_map(|(community, row)| {
            let clusters: Vec<(usize, usize)> = row.iter().enumerate().filter(|(_, &s)| s > 0).map(|(c, &s)| (c, s)).collect();
            (clusters.len() > 1).then_some(SplitCommunity { community, clusters })
        })
        .collect();
    NspReport { holds: violations.is_empty(), violations }
}
