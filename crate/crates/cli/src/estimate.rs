use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use stgof_core::graph::{load_edge_list, load_gml, LoadedGraph};
use stgof_core::stgof::{estimate_k, estimate_k_star, BootstrapConfig, Fallback, StgofConfig, StgofResult, Termination};

use crate::{CliError, FallbackArg, Format, IndexingArg, EXIT_KMAX};

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Edge list (`u v` per line, `#` comments) or a `.gml` file.
    #[arg(long)]
    input: PathBuf,
    /// How integer node tokens in an edge list are numbered.
    #[arg(long, value_enum, default_value = "zero")]
    indexing: IndexingArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 15)]
    kmax: usize,
    /// Bootstrap replicates per step; 0 uses the standard normal null.
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Report when no candidate is accepted.
    #[arg(long, value_enum, default_value = "error")]
    fallback: FallbackArg,
    /// Report destination; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Include wall-clock timings in the report, which makes it vary
    /// between runs.
    #[arg(long)]
    timings: bool,
    /// Write the fitted labels, one per line, to this file.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

pub fn load_graph(path: &Path, indexing: IndexingArg) -> Result<LoadedGraph, CliError> {
    let is_gml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gml"));
    Ok(if is_gml { load_gml(path)? } else { load_edge_list(path, indexing.into())? })
}

pub fn run(args: &EstimateArgs) -> Result<u8, CliError> {
    let loaded = load_graph(&args.input, args.indexing)?;
    let config = StgofConfig {
        alpha: args.alpha,
        k_max: args.kmax,
        fallback: match args.fallback {
            FallbackArg::Error => Fallback::Error,
            FallbackArg::ArgminPsi => Fallback::ArgminPsi,
        },
        seed: args.seed,
        ..StgofConfig::default()
    };
    let result = if args.bootstrap > 0 {
        let boot = BootstrapConfig { replicates: args.bootstrap, ..BootstrapConfig::default() };
        estimate_k_star(&loaded.graph, &config, &boot)?
    } else {
        estimate_k(&loaded.graph, &config)?
    };
    if result.component.restricted_to_largest_component {
        log::warn!(
            "input is disconnected; used the largest component ({} of {} nodes)",
            result.component.nodes_used,
            result.component.nodes_in_input
        );
    }

    let rendered = match args.format {
        Format::Json => render_json(&result, args.timings),
        Format::Text => render_text(&result, args.timings),
    };
    match &args.output {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    if let (Some(path), Some(labels)) = (&args.labels_out, result.labels()) {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(path, text)?;
    }
    Ok(match result.terminated_by {
        Termination::Acceptance => 0,
        Termination::KMax => EXIT_KMAX,
    })
}

fn render_json(result: &StgofResult, timings: bool) -> String {
    let mut value = serde_json::to_value(result).expect("report serializes");
    if !timings {
        value.as_object_mut().expect("report is an object").remove("timings");
    }
    serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
}

fn render_text(result: &StgofResult, timings: bool) -> String {
    let mut out = String::new();
    let k_hat = result.k_hat.map_or("none".to_string(), |k| k.to_string());
    writeln!(out, "k_hat: {k_hat}").unwrap();
    let terminated = match result.terminated_by {
        Termination::Acceptance => "acceptance",
        Termination::KMax => "k_max",
    };
    writeln!(out, "terminated_by: {terminated}").unwrap();
    writeln!(out, "alpha: {} (z = {:.8})", result.alpha, result.z_alpha).unwrap();
    if let Some(m) = result.argmin_suggestion {
        writeln!(out, "argmin_suggestion: {m}").unwrap();
    }
    if result.component.restricted_to_largest_component {
        writeln!(out, "largest_component: {} of {} nodes", result.component.nodes_used, result.component.nodes_in_input).unwrap();
    }
    writeln!(out, "seed: {}", result.seed).unwrap();
    writeln!(out, "{:>3} {:>12} {:>14} {:>14} {:>14}  decision", "m", "psi", "Q", "B", "C").unwrap();
    for step in &result.steps {
        let decision = match &step.decision {
            stgof_core::stgof::Decision::Continue => "continue".to_string(),
            stgof_core::stgof::Decision::Accept => "accept".to_string(),
            stgof_core::stgof::Decision::Error(reason) => format!("error: {reason}"),
        };
        match step.stats {
            Some(s) => {
                let psi = step.test_statistic().unwrap_or(s.psi);
                writeln!(out, "{:>3} {:>12.4} {:>14.4} {:>14.4} {:>14.0}  {decision}", step.m, psi, s.q, s.b, s.c).unwrap()
            }
            None => writeln!(out, "{:>3} {:>12} {:>14} {:>14} {:>14}  {decision}", step.m, "-", "-", "-", "-").unwrap(),
        }
    }
    if timings {
        writeln!(out, "eigen_ms: {:.1}\ntotal_ms: {:.1}", result.timings.eigen_ms, result.timings.total_ms).unwrap();
    }
    out
}
