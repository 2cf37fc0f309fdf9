use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics, Statistics};

use stgof_core::dcbm::SimulationConfig;
use stgof_core::rng::{derive_seed, stream};
use stgof_core::stgof::{estimate_k, psi_profile, StgofConfig};

use crate::spec::ExperimentSpec;
use crate::CliError;

pub const ACCURACY_SCHEMA: &str = "stgof-accuracy/1";
pub const SAMPLES_SCHEMA: &str = "stgof-calibration-samples/1";
pub const SUMMARY_SCHEMA: &str = "stgof-calibration-summary/1";

/// Graph stream for replicate `r` of sweep point `point`.
fn replicate_stream(point: usize, r: usize) -> u64 {
    ((point as u64) << 32) | r as u64
}

struct ReplicateOutcome {
    k_hat: Option<usize>,
    psi: Vec<Option<f64>>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("NA".to_string(), |v| v.to_string())
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn accuracy_table(spec: &ExperimentSpec) -> Result<String, CliError> {
    let k = spec.model.k;
    let estimator = spec.estimator();
    let mut out = format!("# schema={ACCURACY_SCHEMA}\nbeta_n,b_n,replicates,accuracy,mean_k_hat,no_estimate");
    for m in 1..=k {
        write!(out, ",psi_mean_m{m}").unwrap();
    }
    out.push('\n');
    for point in 0..spec.points() {
        let config = spec.point(point)?;
        let started = Instant::now();
        let seed = config.run.seed;
        let outcomes = (0..config.run.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(seed, replicate_stream(point, r));
                let g = config.draw_model(&mut rng)?.sample(&mut rng);
                let run = StgofConfig { seed: derive_seed(seed, &[point as u64, r as u64]), ..estimator.clone() };
                Ok(match estimate_k(&g, &run) {
                    Ok(result) => ReplicateOutcome {
                        k_hat: result.k_hat,
                        psi: (1..=k)
                            .map(|m| result.steps.iter().find(|s| s.m == m).and_then(|s| s.test_statistic()))
                            .collect(),
                    },
                    Err(e) => {
                        log::warn!("point {point} replicate {r}: {e}");
                        ReplicateOutcome { k_hat: None, psi: vec![None; k] }
                    }
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let total = outcomes.len();
        let correct = outcomes.iter().filter(|o| o.k_hat == Some(k)).count();
        let missing = outcomes.iter().filter(|o| o.k_hat.is_none()).count();
        let mean_k = mean_of(outcomes.iter().filter_map(|o| o.k_hat.map(|v| v as f64)));
        write!(
            out,
            "{},{},{total},{},{},{missing}",
            config.model.beta_n,
            config.model.b_n,
            correct as f64 / total as f64,
            fmt_opt(mean_k)
        )
        .unwrap();
        for m in 0..k {
            write!(out, ",{}", fmt_opt(mean_of(outcomes.iter().filter_map(|o| o.psi[m])))).unwrap();
        }
        out.push('\n');
        eprintln!(
            "beta_n = {}: accuracy {}/{total} in {:.1} s",
            config.model.beta_n,
            correct,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(out)
}

pub fn run_experiment(spec_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let spec = ExperimentSpec::from_toml(&std::fs::read_to_string(spec_path)?)?;
    let table = accuracy_table(&spec)?;
    match out {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

/// `psi` at `m = 1..=K` for every replicate of `config`; `None` where a
/// step could not be evaluated.
pub fn calibration_samples(config: &SimulationConfig) -> Result<Vec<Vec<Option<f64>>>, CliError> {
    let seed = config.run.seed;
    let k = config.model.k;
    (0..config.run.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let g = config.draw_model(&mut rng)?.sample(&mut rng);
            let run = StgofConfig { k_max: k, seed: derive_seed(seed, &[r as u64]), ..StgofConfig::default() };
            let profile = psi_profile(&g, &run)?;
            Ok(profile.into_iter().map(|s| s.ok().map(|s| s.psi)).collect())
        })
        .collect()
}

pub fn summary_table(samples: &[Vec<Option<f64>>], k: usize) -> String {
    let mut out = format!("# schema={SUMMARY_SCHEMA}\nm,count,mean,sd,q05,q25,q50,q75,q95,frac_above_10\n");
    for m in 0..k {
        let values: Vec<f64> = samples.iter().filter_map(|row| row[m]).collect();
        let count = values.len();
        if count == 0 {
            writeln!(out, "{},0,NA,NA,NA,NA,NA,NA,NA,NA", m + 1).unwrap();
            continue;
        }
        let mean = values.iter().mean();
        let sd = if count > 1 { values.iter().std_dev() } else { f64::NAN };
        let above = values.iter().filter(|&&v| v > 10.0).count() as f64 / count as f64;
        let mut data = Data::new(values);
        let q: Vec<String> = [0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|&t| data.quantile(t).to_string()).collect();
        writeln!(out, "{},{count},{mean},{sd},{},{above}", m + 1, q.join(",")).unwrap();
    }
    out
}

pub fn run_calibration(spec_path: &Path, out: &Path, summary: Option<&Path>) -> Result<(), CliError> {
    let config = SimulationConfig::from_toml(&std::fs::read_to_string(spec_path)?)?;
    let started = Instant::now();
    let samples = calibration_samples(&config)?;
    let mut text = format!("# schema={SAMPLES_SCHEMA}\nreplicate,m,psi\n");
    for (r, row) in samples.iter().enumerate() {
        for (m, psi) in row.iter().enumerate() {
            writeln!(text, "{r},{},{}", m + 1, fmt_opt(*psi)).unwrap();
        }
    }
    std::fs::write(out, text)?;
    let table = summary_table(&samples, config.model.k);
    match summary {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    eprintln!("{} replicates in {:.1} s", samples.len(), started.elapsed().as_secs_f64());
    Ok(())
}
