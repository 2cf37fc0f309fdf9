use std::path::{Path, PathBuf};

use clap::Args;
use nalgebra::DMatrix;
use serde::Serialize;

use stgof_core::dcbm::{build_lower_bound_model, sample_adjacency, DcbmParams, SimulationConfig, SINGULAR_TOLERANCE};
use stgof_core::graph::{save_edge_list, Graph};
use stgof_core::rng::stream;

use crate::CliError;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML simulation spec.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Lower-bound pair mode: split the last community into this many extra
    /// communities and write both models.
    #[arg(long, value_name = "M")]
    lower_bound: Option<usize>,
}

/// A DCBM written as JSON: `Omega[i][j] = theta[i] theta[j] P[labels[i]][labels[j]]`.
#[derive(Debug, Serialize)]
struct ModelDescriptor {
    #[serde(rename = "K")]
    k: usize,
    theta: Vec<f64>,
    labels: Vec<usize>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

impl ModelDescriptor {
    fn new(theta: &[f64], labels: &[usize], p: &DMatrix<f64>) -> Self {
        Self {
            k: p.nrows(),
            theta: theta.to_vec(),
            labels: labels.to_vec(),
            p: (0..p.nrows()).map(|r| p.row(r).iter().copied().collect()).collect(),
        }
    }
}

fn write_labels(labels: &[usize], path: &Path) -> Result<(), CliError> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    Ok(std::fs::write(path, text)?)
}

fn write_graph(graph: &Graph, path: &Path) -> Result<(), CliError> {
    Ok(save_edge_list(graph, path)?)
}

fn write_json(value: &impl Serialize, path: &Path) -> Result<(), CliError> {
    Ok(std::fs::write(path, serde_json::to_string_pretty(value).expect("descriptor serializes") + "\n")?)
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    let config = SimulationConfig::from_toml(&std::fs::read_to_string(&args.spec)?)?;
    std::fs::create_dir_all(&args.out)?;
    for r in 0..config.run.replicates {
        let mut rng = stream(config.run.seed, r as u64);
        let model = config.draw_model(&mut rng)?;
        match args.lower_bound {
            None => {
                let g = model.sample(&mut rng);
                write_graph(&g, &args.out.join(format!("graph_{r:04}.txt")))?;
                write_labels(&model.labels(), &args.out.join(format!("labels_{r:04}.txt")))?;
            }
            Some(extra) => {
                let base = &model.params;
                let pair = build_lower_bound_model(base, extra, config.model.b_n, SINGULAR_TOLERANCE, &mut rng)?;
                let alt = pair.params()?;
                write_json(&ModelDescriptor::new(base.theta(), base.labels(), base.p()), &args.out.join(format!("null_{r:04}.json")))?;
                write_json(
                    &ModelDescriptor::new(base.theta(), &pair.labels, &pair.p),
                    &args.out.join(format!("alt_{r:04}.json")),
                )?;
                write_pair_graphs(base, &alt, r, &args.out, &mut rng)?;
            }
        }
    }
    Ok(())
}

fn write_pair_graphs(
    null: &DcbmParams,
    alt: &DcbmParams,
    r: usize,
    out: &Path,
    rng: &mut stgof_core::rng::StreamRng,
) -> Result<(), CliError> {
    write_graph(&sample_adjacency(null, rng), &out.join(format!("null_graph_{r:04}.txt")))?;
    write_labels(null.labels(), &out.join(format!("null_labels_{r:04}.txt")))?;
    write_graph(&sample_adjacency(alt, rng), &out.join(format!("alt_graph_{r:04}.txt")))?;
    write_labels(alt.labels(), &out.join(format!("alt_labels_{r:04}.txt")))
}
