//! The stepwise goodness-of-fit estimator of the number of communities.
//!
//! For `m = 1, 2, ..., k_max`: fit `m` communities (all nodes together for
//! `m = 1`, SCORE clustering otherwise), compute `psi` for the refitted model
//! and stop at the first `m` whose `psi` falls below the upper-`alpha`
//! standard normal quantile. The bootstrap variant replaces the theoretical
//! centering and scaling of `Q_n` by the mean and standard deviation of `Q_n`
//! over graphs redrawn from a low-rank fit of `A`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clustering::{kmeans, ClusteringError, KMeansConfig};
use crate::gof::{psi_with_count, quadrilateral_count, refit, q_statistic, GofError, GofStatistics};
use crate::graph::{is_connected, largest_component, Graph};
use crate::normal::upper_quantile;
use crate::rng::{derive_seed, stream};
use crate::spectral::{default_clip, score_ratio_matrix, top_eigenpairs, EigenConfig, EigenPairs, SpectralError};

#[derive(Debug, Error)]
pub enum StgofError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("graph has no quadrilaterals; statistic undefined")]
    NoQuadrilaterals,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Gof(#[from] GofError),
    #[error("bootstrap replicate {replicate} found no connected, refittable draw in {attempts} attempts")]
    DisconnectedReplicate { replicate: usize, attempts: usize },
    #[error("bootstrap standard deviation of Q_n is zero at m = {m}")]
    DegenerateBootstrap { m: usize },
}

/// What to report when every `m` up to `k_max` is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// No estimate.
    #[default]
    Error,
    /// The `m` with the smallest statistic.
    ArgminPsi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StgofConfig {
    pub alpha: f64,
    pub k_max: usize,
    /// Solver settings; the seed is replaced by one derived from `seed`.
    pub eigen: EigenConfig,
    /// Clustering settings; the seed is replaced by one derived from `seed`.
    pub kmeans: KMeansConfig,
    pub fallback: Fallback,
    /// Ratio clip threshold; `None` means `ln(n)`.
    pub clip: Option<f64>,
    pub seed: u64,
}

impl Default for StgofConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            k_max: 15,
            eigen: EigenConfig::default(),
            kmeans: KMeansConfig::default(),
            fallback: Fallback::Error,
            clip: None,
            seed: 0,
        }
    }
}

impl StgofConfig {
    pub fn validate(&self) -> Result<(), StgofError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StgofError::Config(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.k_max == 0 {
            return Err(StgofError::Config("k_max must be at least 1".into()));
        }
        Ok(())
    }

    fn eigen_config(&self) -> EigenConfig {
        EigenConfig { seed: derive_seed(self.seed, &[1]), ..self.eigen.clone() }
    }

    fn kmeans_config(&self, m: usize) -> KMeansConfig {
        KMeansConfig { seed: derive_seed(self.seed, &[2, m as u64]), ..self.kmeans.clone() }
    }
}

/// SCORE labels with `m` clusters from the leading eigenpairs.
pub fn score_labels(pairs: &EigenPairs, m: usize, clip: f64, config: &KMeansConfig) -> Result<Vec<usize>, StgofError> {
    if m == 1 {
        return Ok(vec![0; pairs.n()]);
    }
    let ratios = score_ratio_matrix(pairs, m, clip)?;
    Ok(kmeans(&ratios.r, m, config)?.labels)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "reason", rename_all = "kebab-case")]
pub enum Decision {
    Continue,
    Accept,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub u_hat: f64,
    pub sigma_hat: f64,
    pub psi_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub m: usize,
    #[serde(skip)]
    pub labels: Vec<usize>,
    #[serde(flatten)]
    pub stats: Option<StepStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    pub decision: Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub psi: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl From<GofStatistics> for StepStats {
    fn from(s: GofStatistics) -> Self {
        Self { psi: s.psi, q: s.q, b: s.b, c: s.c }
    }
}

impl StepRecord {
    /// The statistic the decision was made on.
    pub fn test_statistic(&self) -> Option<f64> {
        match &self.bootstrap {
            Some(b) => Some(b.psi_star),
            None => self.stats.map(|s| s.psi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Acceptance,
    KMax,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub nodes_in_input: usize,
    pub nodes_used: usize,
    pub restricted_to_largest_component: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub eigen_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StgofResult {
    pub k_hat: Option<usize>,
    pub alpha: f64,
    pub z_alpha: f64,
    pub steps: Vec<StepRecord>,
    pub terminated_by: Termination,
    pub argmin_suggestion: Option<usize>,
    pub component: ComponentReport,
    pub seed: u64,
    pub timings: Timings,
}

impl StgofResult {
    /// Labels fitted at the accepted step.
    pub fn labels(&self) -> Option<&[usize]> {
        let k = self.k_hat?;
        self.steps.iter().find(|s| s.m == k).map(|s| s.labels.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub max_attempts: usize,
    /// Replicate `b` draws from `stream(seed, streams[b])` when set, from
    /// `stream(seed, b)` otherwise.
    pub streams: Option<Vec<u64>>,
    /// Skip the node permutation of the residual matrix.
    pub identity_permutation: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 25, max_attempts: 50, streams: None, identity_permutation: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapNull {
    pub m: usize,
    pub u_hat: f64,
    pub sigma_hat: f64,
    pub q_values: Vec<f64>,
}

/// Edge probabilities `clip(M + S[perm, perm], 0, 1)` of a bootstrap
/// replicate, with `M` the rank-`m` spectral fit and `S = A - M`.
pub fn bootstrap_probability(graph: &Graph, pairs: &EigenPairs, m: usize, perm: &[usize], i: usize, j: usize) -> f64 {
    let low_rank = |a: usize, b: usize| -> f64 {
        (0..m).map(|k| pairs.lambdas[k] * pairs.vectors[(a, k)] * pairs.vectors[(b, k)]).sum()
    };
    let (pi, pj) = (perm[i], perm[j]);
    let residual = graph.has_edge(pi, pj) as u8 as f64 - low_rank(pi, pj);
    (low_rank(i, j) + residual).clamp(0.0, 1.0)
}

fn step_q(graph: &Graph, m: usize, config: &StgofConfig) -> Result<f64, StgofError> {
    let labels = if m == 1 {
        vec![0; graph.node_count()]
    } else {
        let pairs = top_eigenpairs(graph, m, &config.eigen_config())?;
        let clip = config.clip.unwrap_or_else(|| default_clip(graph.node_count()));
        score_labels(&pairs, m, clip, &config.kmeans_config(m))?
    };
    let fit = refit(graph, &labels, m)?;
    Ok(q_statistic(graph, &fit)?)
}

/// Mean and standard deviation of `Q_n` at step `m` over graphs drawn from
/// the permuted low-rank fit of `graph`.
pub fn bootstrap_null(
    graph: &Graph,
    m: usize,
    pairs: &EigenPairs,
    config: &StgofConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapNull, StgofError> {
    let n = graph.node_count();
    let count = boot.streams.as_ref().map_or(boot.replicates, Vec::len);
    if count < 2 {
        return Err(StgofError::Config("the bootstrap needs at least two replicates".into()));
    }
    if m == 0 || m > pairs.m() {
        return Err(StgofError::Config(format!("bootstrap step {m} needs {m} eigenpairs, have {}", pairs.m())));
    }
    let seed = derive_seed(config.seed, &[3, m as u64]);
    let q_values = (0..count)
        .into_par_iter()
        .map(|b| {
            let index = boot.streams.as_ref().map_or(b as u64, |s| s[b]);
            let mut rng = stream(seed, index);
            let mut perm: Vec<usize> = (0..n).collect();
            for _ in 0..boot.max_attempts.max(1) {
                if !boot.identity_permutation {
                    perm.shuffle(&mut rng);
                }
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        let p = bootstrap_probability(graph, pairs, m, &perm, i, j);
                        if p > 0.0 && rng.random::<f64>() < p {
                            edges.push((i, j));
                        }
                    }
                }
                let replicate = Graph::from_edges(n, edges).expect("indices are in range").0;
                if !is_connected(&replicate) {
                    continue;
                }
                let replicate_config = StgofConfig { seed: derive_seed(seed, &[index]), ..config.clone() };
                match step_q(&replicate, m, &replicate_config) {
                    // A draw whose fit cannot be refitted is redrawn like a disconnected one.
                    Err(StgofError::Gof(e)) => log::debug!("bootstrap replicate {b} redrawn: {e}"),
                    other => return other,
                }
            }
            Err(StgofError::DisconnectedReplicate { replicate: b, attempts: boot.max_attempts.max(1) })
        })
        .collect::<Result<Vec<f64>, StgofError>>()?;
    let u_hat = q_values.iter().sum::<f64>() / count as f64;
    let var = q_values.iter().map(|q| (q - u_hat).powi(2)).sum::<f64>() / (count - 1) as f64;
    let sigma_hat = var.sqrt();
    if !(sigma_hat > 0.0) {
        return Err(StgofError::DegenerateBootstrap { m });
    }
    Ok(BootstrapNull { m, u_hat, sigma_hat, q_values })
}

/// `psi` at every `m` in `1..=k_max` with no stopping rule; eigenpairs are
/// computed once. Entries are `Err` where the step could not be evaluated.
pub fn psi_profile(graph: &Graph, config: &StgofConfig) -> Result<Vec<Result<GofStatistics, String>>, StgofError> {
    config.validate()?;
    let n = graph.node_count();
    let c = quadrilateral_count(graph);
    if c == 0 {
        return Err(StgofError::NoQuadrilaterals);
    }
    let depth = config.k_max.min(n.saturating_sub(1));
    let pairs = if config.k_max >= 2 && depth >= 2 { Some(top_eigenpairs(graph, depth, &config.eigen_config())?) } else { None };
    let clip = config.clip.unwrap_or_else(|| default_clip(n));
    Ok((1..=config.k_max)
        .map(|m| {
            let labels = match (&pairs, m) {
                (_, 1) => vec![0; n],
                (Some(pairs), m) if m <= pairs.m() => {
                    score_labels(&pairs.truncated(m), m, clip, &config.kmeans_config(m)).map_err(|e| e.to_string())?
                }
                _ => return Err(format!("only {depth} eigenpairs are available")),
            };
            psi_with_count(graph, &labels, m, c as f64).map_err(|e| e.to_string())
        })
        .collect())
}

/// Runs the stepwise test with the theoretical null.
pub fn estimate_k(graph: &Graph, config: &StgofConfig) -> Result<StgofResult, StgofError> {
    run(graph, config, None)
}

/// Runs the stepwise test with the bootstrap null at every step.
pub fn estimate_k_star(graph: &Graph, config: &StgofConfig, boot: &BootstrapConfig) -> Result<StgofResult, StgofError> {
    run(graph, config, Some(boot))
}

fn run(input: &Graph, config: &StgofConfig, boot: Option<&BootstrapConfig>) -> Result<StgofResult, StgofError> {
    config.validate()?;
    let started = Instant::now();
    let restricted = !is_connected(input);
    let component;
    let graph = if restricted {
        component = largest_component(input);
        log::warn!(
            "graph is disconnected; using its largest component ({} of {} nodes)",
            component.graph.node_count(),
            input.node_count()
        );
        &component.graph
    } else {
        input
    };
    let n = graph.node_count();
    let c = quadrilateral_count(graph);
    if c == 0 {
        return Err(StgofError::NoQuadrilaterals);
    }
    let c = c as f64;
    let z_alpha = upper_quantile(config.alpha);
    let depth = config.k_max.min(n.saturating_sub(1));
    let eigen_started = Instant::now();
    let pairs = if depth >= 1 && (config.k_max >= 2 || boot.is_some()) {
        Some(top_eigenpairs(graph, depth, &config.eigen_config())?)
    } else {
        None
    };
    let eigen_ms = eigen_started.elapsed().as_secs_f64() * 1e3;
    let clip = config.clip.unwrap_or_else(|| default_clip(n));

    let mut steps = Vec::new();
    let mut k_hat = None;
    for m in 1..=config.k_max {
        let labels = match m {
            1 => Ok(vec![0; n]),
            _ if m > depth => Err(format!("only {depth} eigenpairs are available")),
            _ => {
                let pairs = pairs.as_ref().expect("depth >= 2").truncated(m);
                score_labels(&pairs, m, clip, &config.kmeans_config(m)).map_err(|e| e.to_string())
            }
        };
        let outcome = labels.and_then(|labels| {
            psi_with_count(graph, &labels, m, c).map(|stats| (labels, stats)).map_err(|e| e.to_string())
        });
        let (labels, stats) = match outcome {
            Ok(found) => found,
            Err(reason) => {
                log::info!("step {m} rejected: {reason}");
                steps.push(StepRecord { m, labels: Vec::new(), stats: None, bootstrap: None, decision: Decision::Error(reason) });
                continue;
            }
        };
        let bootstrap = match boot {
            Some(boot) => {
                let pairs = pairs.as_ref().expect("bootstrap computes eigenpairs");
                if m > pairs.m() {
                    return Err(StgofError::Config(format!("bootstrap step {m} exceeds the {} available eigenpairs", pairs.m())));
                }
                let null = bootstrap_null(graph, m, pairs, config, boot)?;
                Some(BootstrapSummary {
                    replicates: null.q_values.len(),
                    u_hat: null.u_hat,
                    sigma_hat: null.sigma_hat,
                    psi_star: (stats.q - null.u_hat) / null.sigma_hat,
                })
            }
            None => None,
        };
        let mut record = StepRecord { m, labels, stats: Some(stats.into()), bootstrap, decision: Decision::Continue };
        let accepted = record.test_statistic().is_some_and(|t| t < z_alpha);
        if accepted {
            record.decision = Decision::Accept;
            k_hat = Some(m);
        }
        steps.push(record);
        if accepted {
            break;
        }
    }
    let argmin_suggestion = steps
        .iter()
        .filter_map(|s| s.test_statistic().map(|t| (s.m, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(m, _)| m);
    let terminated_by = if k_hat.is_some() { Termination::Acceptance } else { Termination::KMax };
    if k_hat.is_none() && config.fallback == Fallback::ArgminPsi {
        k_hat = argmin_suggestion;
    }
    Ok(StgofResult {
        k_hat,
        alpha: config.alpha,
        z_alpha,
        steps,
        terminated_by,
        argmin_suggestion,
        component: ComponentReport {
            nodes_in_input: input.node_count(),
            nodes_used: n,
            restricted_to_largest_component: restricted,
        },
        seed: config.seed,
        timings: Timings { eigen_ms, total_ms: started.elapsed().as_secs_f64() * 1e3 },
    })
}

/// Dense bootstrap probability matrix for small graphs; used for inspection
/// and tests.
pub fn bootstrap_probability_matrix(graph: &Graph, pairs: &EigenPairs, m: usize, perm: &[usize]) -> DMatrix<f64> {
    let n = graph.node_count();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { bootstrap_probability(graph, pairs, m, perm, i, j) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcbm::{sample_adjacency, DcbmParams};
    use crate::graph::load_edge_list;
    use crate::graph::Indexing;

    fn karate() -> Graph {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/karate.txt");
        load_edge_list(path, Indexing::ZeroBased).unwrap().graph
    }

    fn two_block_graph(seed: u64) -> Graph {
        let n = 300;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let params = DcbmParams::new(vec![0.6; n], labels, p).unwrap();
        sample_adjacency(&params, &mut stream(seed, 0))
    }

    #[test]
    fn karate_gives_two() {
        let result = estimate_k(&karate(), &StgofConfig::default()).unwrap();
        assert_eq!(result.k_hat, Some(2), "{:?}", result.steps);
        assert_eq!(result.terminated_by, Termination::Acceptance);
    }

    #[test]
    fn tree_has_no_quadrilaterals() {
        assert!(matches!(estimate_k(&Graph::star(10), &StgofConfig::default()), Err(StgofError::NoQuadrilaterals)));
    }

    #[test]
    fn rejects_bad_config() {
        let g = karate();
        assert!(estimate_k(&g, &StgofConfig { alpha: 1.5, ..StgofConfig::default() }).is_err());
        assert!(estimate_k(&g, &StgofConfig { k_max: 0, ..StgofConfig::default() }).is_err());
    }

    #[test]
    fn stops_at_first_acceptance() {
        let g = two_block_graph(3);
        let result = estimate_k(&g, &StgofConfig::default()).unwrap();
        let z = result.z_alpha;
        let k = result.k_hat.unwrap();
        for step in &result.steps {
            let psi = step.test_statistic();
            if step.m < k {
                assert!(psi.is_none_or(|p| p >= z));
            } else {
                assert_eq!(step.m, k);
                assert!(psi.unwrap() < z);
                assert_eq!(step.decision, Decision::Accept);
            }
        }
        assert_eq!(k, 2);
    }

    #[test]
    fn exhausting_k_max_uses_fallback() {
        let g = two_block_graph(4);
        let strict = StgofConfig { k_max: 1, ..StgofConfig::default() };
        let result = estimate_k(&g, &strict).unwrap();
        assert_eq!(result.k_hat, None);
        assert_eq!(result.terminated_by, Termination::KMax);
        assert_eq!(result.argmin_suggestion, Some(1));
        let lenient = StgofConfig { fallback: Fallback::ArgminPsi, ..strict };
        assert_eq!(estimate_k(&g, &lenient).unwrap().k_hat, Some(1));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = two_block_graph(5);
        let config = StgofConfig { seed: 9, ..StgofConfig::default() };
        let a = estimate_k(&g, &config).unwrap();
        let b = estimate_k(&g, &config).unwrap();
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn disconnected_input_uses_largest_component() {
        let g = karate();
        let n = g.node_count();
        let mut edges: Vec<(usize, usize)> = g.edges().collect();
        edges.push((n, n + 1));
        let bigger = Graph::from_edges(n + 2, edges).unwrap().0;
        let result = estimate_k(&bigger, &StgofConfig::default()).unwrap();
        assert!(result.component.restricted_to_largest_component);
        assert_eq!(result.component.nodes_used, n);
        assert_eq!(result.k_hat, Some(2));
    }

    #[test]
    fn identity_permutation_reproduces_adjacency() {
        let g = karate();
        let pairs = top_eigenpairs(&g, 2, &EigenConfig::default()).unwrap();
        let perm: Vec<usize> = (0..g.node_count()).collect();
        let probs = bootstrap_probability_matrix(&g, &pairs, 2, &perm);
        for i in 0..g.node_count() {
            for j in 0..g.node_count() {
                if i != j {
                    let a = g.has_edge(i, j) as u8 as f64;
                    assert!((probs[(i, j)] - a).abs() < 1e-12);
                }
            }
        }
        // Bernoulli draws from 0/1 probabilities return the graph itself.
        let boot = BootstrapConfig { identity_permutation: true, replicates: 2, ..BootstrapConfig::default() };
        let config = StgofConfig::default();
        assert!(matches!(
            bootstrap_null(&g, 2, &pairs, &config, &boot),
            Err(StgofError::DegenerateBootstrap { m: 2 })
        ));
    }

    #[test]
    fn identical_streams_give_zero_spread() {
        let g = karate();
        let pairs = top_eigenpairs(&g, 2, &EigenConfig::default()).unwrap();
        let boot = BootstrapConfig { streams: Some(vec![7, 7]), ..BootstrapConfig::default() };
        let err = bootstrap_null(&g, 2, &pairs, &StgofConfig::default(), &boot).unwrap_err();
        assert!(matches!(err, StgofError::DegenerateBootstrap { m: 2 }));
        let boot = BootstrapConfig { streams: Some(vec![7, 8, 9]), ..BootstrapConfig::default() };
        let null = bootstrap_null(&g, 2, &pairs, &StgofConfig::default(), &boot).unwrap();
        assert_eq!(null.q_values.len(), 3);
        assert!(null.sigma_hat > 0.0);
    }

    #[test]
    fn bootstrap_karate_gives_two() {
        let result = estimate_k_star(&karate(), &StgofConfig::default(), &BootstrapConfig::default()).unwrap();
        assert_eq!(result.k_hat, Some(2), "{:?}", result.steps);
        let again = estimate_k_star(&karate(), &StgofConfig::default(), &BootstrapConfig::default()).unwrap();
        assert_eq!(result.steps, again.steps);
    }

    #[test]
    fn report_serializes_expected_fields() {
        let result = estimate_k(&karate(), &StgofConfig::default()).unwrap();
        let json = serde_json::to_value(&result).unwrap();
        assert_eq!(json["k_hat"], 2);
        assert_eq!(json["terminated_by"], "acceptance");
        let step = &json["steps"][0];
        for key in ["m", "psi", "Q", "B", "C", "decision"] {
            assert!(step.get(key).is_some(), "missing {key} in {step}");
        }
    }

    /// 200 replicates at the true K = 2. The cap of 4 steps keeps the
    /// eigensolver depth small; every replicate here stops by m = 2.
    #[test]
    fn null_replicates_bound_and_recover_k() {
        use crate::dcbm::SimulationConfig;
        use rayon::prelude::*;

        let model = SimulationConfig::from_toml(
            "[model]\nn = 600\nK = 2\nbeta_n = 12.0\nb_n = 0.25\n\
             [theta]\nlaw = \"uniform\"\na = 2.0\nb = 3.0\n\
             [pi]\nweights = [0.5, 0.5]\n[P]\npattern = \"toeplitz\"\n\
             [run]\nreplicates = 200\nseed = 4242\n",
        )
        .unwrap();
        let estimates: Vec<Option<usize>> = (0..model.run.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(model.run.seed, r);
                let g = model.draw_model(&mut rng).unwrap().sample(&mut rng);
                let result = estimate_k(&g, &StgofConfig { k_max: 4, seed: r, ..StgofConfig::default() }).unwrap();
                if let Some(k) = result.k_hat {
                    let earlier = result.steps.iter().filter(|s| s.m < k);
                    assert!(earlier.clone().all(|s| s.test_statistic().is_none_or(|t| t >= result.z_alpha)));
                }
                result.k_hat
            })
            .collect();
        let floor = 1.0 - StgofConfig::default().alpha - 0.05;
        let total = estimates.len() as f64;
        let at_most = estimates.iter().filter(|k| matches!(k, Some(k) if *k <= 2)).count() as f64 / total;
        let exact = estimates.iter().filter(|k| **k == Some(2)).count() as f64 / total;
        assert!(at_most >= floor, "P(k_hat <= K) = {at_most}");
        assert!(exact >= floor, "P(k_hat = K) = {exact}");
    }
}
