use std::fs;

use fpgw_core::graphio::{
    clustering_corpus, extract_bfs_subgraph, feature_cost, inject_outliers, sbm, to_mm_space, ClusterCorpusSpec,
    FeatureMetric, Graph, MassMode, SbmFeatures, SbmSpec, StructureKind,
};
use fpgw_core::tasks::{
    adjusted_rand_index, kmeans_fpgw, match_graphs, pairwise_distance_matrix, CorpusSpec, KMeansOptions, SolveOptions,
    SolverKind,
};
use fpgw_core::{Features, FusedConfig, MmSpace};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::args::{
    ClusterArgs, CorpusArgs, DistmatArgs, FeatureKindArg, MassArg, MatchArgs, MetricArg, OutliersArgs, SbmArgs,
    SolverArg, SolverArgs, StructureArg, SubgraphArgs, SynthCommand,
};
use crate::io;
use crate::Failure;

fn solver_kind(s: SolverArg) -> SolverKind {
    match s {
        SolverArg::FwFpgw => SolverKind::FwFpgw,
        SolverArg::FwFmpgw => SolverKind::FwFmpgw,
        SolverArg::SinkFpgw => SolverKind::SinkFpgw,
        SolverArg::SinkFmpgw => SolverKind::SinkFmpgw,
    }
}

fn structure_kind(s: StructureArg) -> StructureKind {
    match s {
        StructureArg::Adjacency => StructureKind::Adjacency,
        StructureArg::ShortestPath => StructureKind::ShortestPath,
    }
}

fn mass_mode(m: MassArg) -> Result<MassMode, Failure> {
    match m {
        MassArg::UniformAll => Ok(MassMode::UniformAll),
        MassArg::UniformRegular => Ok(MassMode::UniformRegular),
        MassArg::UniformMin => Err(Failure::input("--mass uniform-min is only supported by match")),
    }
}

fn metric(m: MetricArg) -> FeatureMetric {
    match m {
        MetricArg::Euclidean => FeatureMetric::Euclidean,
        MetricArg::SqEuclidean => FeatureMetric::SquaredEuclidean,
        MetricArg::Wl(h) => FeatureMetric::WlHamming(h),
    }
}

fn config(a: &SolverArgs) -> FusedConfig {
    let cfg = FusedConfig::new(a.omega2).with_lambda(a.lambda).with_epsilon(a.epsilon);
    match a.rho {
        Some(r) => cfg.with_rho(r),
        None => cfg,
    }
}

fn solve_options(max_iter: Option<usize>) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(n) = max_iter {
        opts.fw.max_iter = n;
        opts.entropic.max_iter = n;
    }
    opts
}

fn space(g: &Graph, structure: StructureArg, mass: &MassMode, path: &std::path::Path) -> Result<MmSpace, Failure> {
    to_mm_space(g, structure_kind(structure), mass).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GroundTruth {
    Mapping(Vec<usize>),
    Pairs(Vec<[usize; 2]>),
}

#[derive(Serialize)]
struct MatchReport {
    solver: SolverKind,
    objective: f64,
    iterations: usize,
    transported_mass: f64,
    accuracy: Option<f64>,
    assignment: Vec<Option<usize>>,
    plan: String,
}

pub fn run_match(a: &MatchArgs) -> Result<(), Failure> {
    let src_graph = io::read_graph(&a.source)?;
    let tgt_graph = io::read_graph(&a.target)?;
    let s = &a.solver;
    let (src_mass, tgt_mass) = match s.mass {
        MassArg::UniformMin => {
            let (n, m) = (src_graph.node_count(), tgt_graph.node_count());
            let unit = 1.0 / n.min(m).max(1) as f64;
            (MassMode::Explicit(Array1::from_elem(n, unit)), MassMode::Explicit(Array1::from_elem(m, unit)))
        }
        other => (mass_mode(other)?, mass_mode(other)?),
    };
    let source = space(&src_graph, s.structure, &src_mass, &a.source)?;
    let target = space(&tgt_graph, s.structure, &tgt_mass, &a.target)?;
    let cost =
        feature_cost(&src_graph, &tgt_graph, metric(s.feature_metric)).map_err(|e| Failure::input(e.to_string()))?;
    let truth = match &a.ground_truth {
        None => None,
        Some(path) => {
            let pairs: Vec<(usize, usize)> = match io::read_json::<GroundTruth>(path)? {
                GroundTruth::Mapping(m) => m.into_iter().enumerate().collect(),
                GroundTruth::Pairs(p) => p.into_iter().map(|[i, j]| (i, j)).collect(),
            };
            if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= source.len() || j >= target.len()) {
                return Err(Failure::input(format!("{}: pair ({i}, {j}) is out of range", path.display())));
            }
            Some(pairs)
        }
    };
    let solver = solver_kind(s.solver);
    let mut cfg = config(s);
    if solver.is_mass_constrained() && cfg.rho.is_none() {
        cfg = cfg.with_rho(source.total_mass().min(target.total_mass()));
    }
    cfg.validate_for(source.mass().view(), target.mass().view()).map_err(|e| Failure::input(e.to_string()))?;
    let r =
        match_graphs(&source, &target, cost.view(), &cfg, solver, None, truth.as_deref(), solve_options(s.max_iter))
            .map_err(|e| Failure::solver(e.to_string()))?;
    let plan_path = io::sibling(&a.out, "plan.csv");
    io::write_matrix_csv(&plan_path, r.plan.entries(), None)?;
    let report = MatchReport {
        solver,
        objective: r.objective,
        iterations: r.iterations,
        transported_mass: r.plan.total_mass(),
        accuracy: r.accuracy,
        assignment: r.assignment,
        plan: io::file_name(&plan_path),
    };
    io::write_json(&a.out, &report)
}

#[derive(Serialize)]
struct CentroidReport {
    structure: String,
    features: String,
    mass: Vec<f64>,
}

#[derive(Serialize)]
struct ClusterReport {
    k: usize,
    seed: u64,
    graphs: Vec<String>,
    labels: Vec<usize>,
    distances: Vec<f64>,
    objective_trace: Vec<f64>,
    ari: Option<f64>,
    centroids: Vec<CentroidReport>,
}

pub fn run_cluster(a: &ClusterArgs) -> Result<(), Failure> {
    let (names, graphs) = io::read_graphs(&a.graphs)?;
    if a.k > graphs.len() {
        return Err(Failure::input(format!(
            "--k {} exceeds the {} graphs in {}",
            a.k,
            graphs.len(),
            a.graphs.display()
        )));
    }
    let mass = mass_mode(a.mass)?;
    let mut spaces = Vec::with_capacity(graphs.len());
    for (g, name) in graphs.iter().zip(&names) {
        if !matches!(g.features(), Some(Features::Real(_))) {
            return Err(Failure::input(format!("graph {name} needs real node features")));
        }
        let s =
            to_mm_space(g, structure_kind(a.structure), &mass).map_err(|e| Failure::input(format!("{name}: {e}")))?;
        if s.total_mass() + 1e-8 < a.rho {
            return Err(Failure::input(format!("--rho {} exceeds the mass {} of graph {name}", a.rho, s.total_mass())));
        }
        spaces.push(s);
    }
    let truth = match &a.truth {
        None => None,
        Some(path) => {
            let labels: Vec<usize> = io::read_json(path)?;
            if labels.len() != graphs.len() {
                return Err(Failure::input(format!(
                    "{}: {} labels for {} graphs",
                    path.display(),
                    labels.len(),
                    graphs.len()
                )));
            }
            Some(labels)
        }
    };
    let cfg = FusedConfig::new(a.omega2).with_rho(a.rho);
    let opts = KMeansOptions { max_iter: a.max_iter, restarts: a.restarts, ..KMeansOptions::default() };
    let r = kmeans_fpgw(&spaces, a.k, &cfg, opts, a.seed).map_err(|e| Failure::solver(e.to_string()))?;
    let ari = match &truth {
        Some(t) => Some(adjusted_rand_index(&r.labels, t).map_err(|e| Failure::input(e.to_string()))?),
        None => None,
    };
    let mut centroids = Vec::with_capacity(r.centroids.len());
    for (c, cent) in r.centroids.iter().enumerate() {
        let structure = io::sibling(&a.out, &format!("centroid{c}.structure.csv"));
        let features = io::sibling(&a.out, &format!("centroid{c}.features.csv"));
        io::write_matrix_csv(&structure, &cent.structure, None)?;
        io::write_matrix_csv(&features, &cent.features, None)?;
        centroids.push(CentroidReport {
            structure: io::file_name(&structure),
            features: io::file_name(&features),
            mass: cent.mass.to_vec(),
        });
    }
    let report = ClusterReport {
        k: a.k,
        seed: a.seed,
        graphs: names,
        labels: r.labels,
        distances: r.distances,
        objective_trace: r.objective_trace,
        ari,
        centroids,
    };
    io::write_json(&a.out, &report)
}

pub fn run_distmat(a: &DistmatArgs) -> Result<(), Failure> {
    let (names, graphs) = io::read_graphs(&a.graphs)?;
    let s = &a.solver;
    let spec = CorpusSpec {
        structure: structure_kind(s.structure),
        mass: mass_mode(s.mass)?,
        metric: metric(s.feature_metric),
    };
    // Surface conversion problems as input errors before any solve.
    for (g, name) in graphs.iter().zip(&names) {
        to_mm_space(g, spec.structure, &spec.mass).map_err(|e| Failure::input(format!("{name}: {e}")))?;
    }
    for (i, a_graph) in graphs.iter().enumerate() {
        feature_cost(a_graph, &graphs[0], spec.metric).map_err(|e| Failure::input(format!("{}: {e}", names[i])))?;
    }
    let cfg = config(s);
    cfg.validate().map_err(|e| Failure::input(e.to_string()))?;
    let d = pairwise_distance_matrix(&graphs, &spec, &cfg, solver_kind(s.solver), a.sigma, solve_options(s.max_iter))
        .map_err(|e| Failure::solver(e.to_string()))?;
    io::write_matrix_csv(&a.out, &d, Some(&names))
}

pub fn run_synth(cmd: &SynthCommand) -> Result<(), Failure> {
    match cmd {
        SynthCommand::Sbm(a) => synth_sbm(a),
        SynthCommand::Subgraph(a) => synth_subgraph(a),
        SynthCommand::Outliers(a) => synth_outliers(a),
        SynthCommand::Corpus(a) => synth_corpus(a),
    }
}

fn synth_sbm(a: &SbmArgs) -> Result<(), Failure> {
    let features = match a.features {
        FeatureKindArg::None => SbmFeatures::None,
        FeatureKindArg::Uniform => SbmFeatures::Uniform { dim: a.dim, low: a.low, high: a.high },
        FeatureKindArg::Community => SbmFeatures::Community { dim: a.dim, low: a.low, high: a.high, noise: a.noise },
        FeatureKindArg::Label => SbmFeatures::CommunityLabel,
    };
    let spec = SbmSpec { sizes: a.sizes.clone(), p_in: a.p_in, p_out: a.p_out, features };
    let g = sbm(&spec, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    io::write_text(&a.out, &g.to_json())
}

fn synth_subgraph(a: &SubgraphArgs) -> Result<(), Failure> {
    let g = io::read_graph(&a.input)?;
    let (sub, mapping) = extract_bfs_subgraph(&g, a.fraction, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    io::write_text(&a.out, &sub.to_json())?;
    io::write_json(&a.mapping, &mapping)
}

fn synth_outliers(a: &OutliersArgs) -> Result<(), Failure> {
    let g = io::read_graph(&a.input)?;
    let h = inject_outliers(&g, a.eta, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    io::write_text(&a.out, &h.to_json())
}

fn synth_corpus(a: &CorpusArgs) -> Result<(), Failure> {
    let spec = ClusterCorpusSpec {
        communities: a.communities.clone(),
        per_type: a.per_type,
        p_in: a.p_in,
        p_out: a.p_out,
        noise: a.noise,
        outlier_eta: a.eta,
    };
    let (graphs, labels) = clustering_corpus(&spec, a.seed).map_err(|e| Failure::input(e.to_string()))?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let width = graphs.len().to_string().len().max(2);
    for (i, g) in graphs.iter().enumerate() {
        io::write_text(&a.out_dir.join(format!("g{i:0width$}.json")), &g.to_json())?;
    }
    io::write_json(&a.out_dir.join(io::LABELS_FILE), &labels)
}
