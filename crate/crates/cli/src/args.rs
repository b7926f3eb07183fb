use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fpgw", version, about = "Fused partial Gromov-Wasserstein graph matching, clustering and distances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match a source graph into a target graph and report the assignment.
    Match(MatchArgs),
    /// FMPGW k-means over a directory of graphs.
    Cluster(ClusterArgs),
    /// Pairwise distance (or kernel) matrix over a directory of graphs.
    Distmat(DistmatArgs),
    /// Generate fixture graphs.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    FwFpgw,
    FwFmpgw,
    SinkFpgw,
    SinkFmpgw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StructureArg {
    Adjacency,
    ShortestPath,
}

// Variant names are the flag values.
#[allow(clippy::enum_variant_names)]
#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MassArg {
    UniformAll,
    UniformRegular,
    /// `1/min(n, m)` per node on both sides (match only).
    UniformMin,
}

/// `euclidean`, `sqeuclidean` or `wl:H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    Euclidean,
    SqEuclidean,
    Wl(usize),
}

fn parse_metric(s: &str) -> Result<MetricArg, String> {
    match s {
        "euclidean" => Ok(MetricArg::Euclidean),
        "sqeuclidean" => Ok(MetricArg::SqEuclidean),
        _ => match s.strip_prefix("wl:").map(str::parse::<usize>) {
            Some(Ok(h)) => Ok(MetricArg::Wl(h)),
            _ => Err("expected euclidean, sqeuclidean or wl:H with H a non-negative integer".into()),
        },
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn unit(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = finite(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("must be a positive integer, got '{s}'")),
    }
}

/// Objective and solver settings shared by match and distmat.
#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "sink-fpgw")]
    pub solver: SolverArg,
    /// Structure weight; the feature weight is 1 - omega2.
    #[arg(long, default_value = "0.5", value_parser = unit)]
    pub omega2: f64,
    #[arg(long, default_value = "1.0", value_parser = non_negative)]
    pub lambda: f64,
    /// Transported mass for the mass-constrained solvers.
    #[arg(long, value_parser = non_negative)]
    pub rho: Option<f64>,
    #[arg(long, default_value = "0.02", value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "shortest-path")]
    pub structure: StructureArg,
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    pub feature_metric: MetricArg,
    #[arg(long, value_enum, default_value = "uniform-all")]
    pub mass: MassArg,
    /// Iteration cap for the outer solver loop.
    #[arg(long, value_parser = count)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// JSON array mapping source node i to target node `m[i]`, or an array of `[i, j]` pairs.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Directory of graph JSON files, read in file-name order.
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long, value_parser = count)]
    pub k: usize,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long, default_value = "0.999", value_parser = unit)]
    pub omega2: f64,
    #[arg(long, default_value = "1.0", value_parser = positive)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "shortest-path")]
    pub structure: StructureArg,
    #[arg(long, value_enum, default_value = "uniform-regular")]
    pub mass: MassArg,
    #[arg(long, default_value = "10", value_parser = count)]
    pub max_iter: usize,
    /// Extra k-means++ starts tried after the k-medoids start; the lowest objective wins.
    #[arg(long, default_value = "0")]
    pub restarts: usize,
    /// JSON array of reference labels, one per graph file; adds the ARI to the output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistmatArgs {
    #[arg(long)]
    pub graphs: PathBuf,
    /// Emit the kernel exp(-sigma * D) instead of D.
    #[arg(long, value_parser = non_negative)]
    pub sigma: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureKindArg {
    None,
    Uniform,
    Community,
    Label,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Stochastic block model graph.
    Sbm(SbmArgs),
    /// BFS subgraph plus the node mapping into the input graph.
    Subgraph(SubgraphArgs),
    /// Append outlier nodes.
    Outliers(OutliersArgs),
    /// Clustering corpus: one graph file per graph plus a labels file.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct SbmArgs {
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Community sizes, comma separated.
    #[arg(long, default_value = "10,10,10", value_delimiter = ',', value_parser = count)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value = "0.5", value_parser = unit)]
    pub p_in: f64,
    #[arg(long, default_value = "0.05", value_parser = unit)]
    pub p_out: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    pub features: FeatureKindArg,
    #[arg(long, default_value = "2", value_parser = count)]
    pub dim: usize,
    #[arg(long, default_value = "0.0", value_parser = finite)]
    pub low: f64,
    #[arg(long, default_value = "1.0", value_parser = finite)]
    pub high: f64,
    #[arg(long, default_value = "0.1", value_parser = non_negative)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubgraphArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "0.5", value_parser = fraction)]
    pub fraction: f64,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the mapping (subgraph node i is input node `m[i]`).
    #[arg(long)]
    pub mapping: PathBuf,
}

#[derive(Debug, Args)]
pub struct OutliersArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = non_negative)]
    pub eta: f64,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Community count of each graph type, comma separated.
    #[arg(long, default_value = "1,2,3", value_delimiter = ',', value_parser = count)]
    pub communities: Vec<usize>,
    #[arg(long, default_value = "5", value_parser = count)]
    pub per_type: usize,
    #[arg(long, default_value = "0.8", value_parser = unit)]
    pub p_in: f64,
    #[arg(long, default_value = "0.05", value_parser = unit)]
    pub p_out: f64,
    #[arg(long, default_value = "0.2", value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value = "0.3", value_parser = non_negative)]
    pub eta: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}
