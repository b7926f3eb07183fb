//! Graphs as attributed metric-measure spaces: structure matrices, node masses,
//! feature costs (Euclidean or Weisfeiler-Lehman Hamming), BFS subgraphs,
//! outlier injection, stochastic block models and the JSON graph format.

use std::collections::{HashMap, VecDeque};

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Features, MmSpace, Result};

/// Undirected simple graph with optional node features and known regular-node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    /// Sorted, deduplicated, each stored as `(i, j)` with `i < j`.
    edges: Vec<(usize, usize)>,
    features: Option<Features>,
    regular_count: Option<usize>,
}

impl Graph {
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::Graph(format!("edge ({a},{b}) out of range for {node_count} nodes")));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop at node {a}")));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self { node_count, edges: out, features: None, regular_count: None })
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.len() != self.node_count {
            return Err(Error::Graph(format!("{} feature rows for {} nodes", features.len(), self.node_count)));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_regular_count(mut self, regular_count: usize) -> Result<Self> {
        if regular_count > self.node_count {
            return Err(Error::Graph(format!("regular_count {regular_count} exceeds node count {}", self.node_count)));
        }
        self.regular_count = Some(regular_count);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    pub fn regular_count(&self) -> Option<usize> {
        self.regular_count
    }

    /// Sorted neighbor lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: GraphJson = serde_json::from_str(text)?;
        raw.into_graph()
    }

    pub fn to_json(&self) -> String {
        let json = GraphJson::from_graph(self);
        let mut s = serde_json::to_string_pretty(&json).expect("graph json is always serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    nodes: Vec<NodeJson>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regular_count: Option<usize>,
}

impl GraphJson {
    fn from_graph(g: &Graph) -> Self {
        let nodes = (0..g.node_count)
            .map(|i| match &g.features {
                Some(Features::Real(x)) => NodeJson { id: i, feature: Some(x.row(i).to_vec()), label: None },
                Some(Features::Labels(l)) => NodeJson { id: i, feature: None, label: Some(l[i].clone()) },
                None => NodeJson { id: i, feature: None, label: None },
            })
            .collect();
        Self { nodes, edges: g.edges.iter().map(|&(a, b)| [a, b]).collect(), regular_count: g.regular_count }
    }

    fn into_graph(self) -> Result<Graph> {
        let n = self.nodes.len();
        let mut order = vec![usize::MAX; n];
        for (pos, node) in self.nodes.iter().enumerate() {
            if node.id >= n || order[node.id] != usize::MAX {
                return Err(Error::Graph(format!("node ids must be a permutation of 0..{n}, saw {}", node.id)));
            }
            order[node.id] = pos;
        }
        let nodes: Vec<&NodeJson> = order.iter().map(|&pos| &self.nodes[pos]).collect();
        let has_feature = nodes.iter().filter(|v| v.feature.is_some()).count();
        let has_label = nodes.iter().filter(|v| v.label.is_some()).count();
        let features = match (has_feature, has_label) {
            (0, 0) => None,
            (k, 0) if k == n => {
                let d = nodes[0].feature.as_ref().map_or(0, Vec::len);
                let mut x = Array2::zeros((n, d));
                for (i, v) in nodes.iter().enumerate() {
                    let f = v.feature.as_ref().expect("counted above");
                    if f.len() != d {
                        return Err(Error::Graph(format!("node {i} has {} feature entries, expected {d}", f.len())));
                    }
                    if f.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Graph(format!("node {i} has a non-finite feature")));
                    }
                    x.row_mut(i).assign(&Array1::from(f.clone()));
                }
                Some(Features::Real(x))
            }
            (0, k) if k == n => {
                Some(Features::Labels(nodes.iter().map(|v| v.label.clone().expect("counted above")).collect()))
            }
            _ => return Err(Error::Graph("every node needs the same feature kind".into())),
        };
        let mut g = Graph::new(n, self.edges.iter().map(|e| (e[0], e[1])))?;
        if let Some(f) = features {
            g = g.with_features(f)?;
        }
        if let Some(r) = self.regular_count {
            g = g.with_regular_count(r)?;
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Adjacency,
    ShortestPath,
}

/// Hop distances from `start`; `usize::MAX` marks unreachable nodes.
fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Default distance for disconnected pairs: twice the diameter of the largest
/// component, at least 1.
pub fn default_disconnect_value(g: &Graph) -> f64 {
    let adj = g.neighbors();
    let all: Vec<Vec<usize>> = (0..g.node_count).map(|s| bfs(&adj, s)).collect();
    disconnect_from_distances(&all)
}

fn disconnect_from_distances(all: &[Vec<usize>]) -> f64 {
    let mut best = (0usize, 0usize);
    for d in all {
        let size = d.iter().filter(|&&x| x != usize::MAX).count();
        let diam = d.iter().filter(|&&x| x != usize::MAX).max().copied().unwrap_or(0);
        if size > best.0 {
            best = (size, diam);
        } else if size == best.0 {
            best.1 = best.1.max(diam);
        }
    }
    (2.0 * best.1 as f64).max(1.0)
}

pub fn structure_matrix(g: &Graph, kind: StructureKind, disconnect_value: Option<f64>) -> Array2<f64> {
    let n = g.node_count;
    match kind {
        StructureKind::Adjacency => {
            let mut a = Array2::zeros((n, n));
            for &(i, j) in &g.edges {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
            a
        }
        StructureKind::ShortestPath => {
            let adj = g.neighbors();
            let all: Vec<Vec<usize>> = (0..n).map(|s| bfs(&adj, s)).collect();
            let fill = disconnect_value.unwrap_or_else(|| disconnect_from_distances(&all));
            Array2::from_shape_fn((n, n), |(i, j)| match all[i][j] {
                usize::MAX => fill,
                d => d as f64,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MassMode {
    /// `1/n` per node.
    UniformAll,
    /// `1/N_G` per node, `N_G` the regular-node count.
    UniformRegular,
    Explicit(Array1<f64>),
}

pub fn node_masses(g: &Graph, mode: &MassMode) -> Result<Array1<f64>> {
    let n = g.node_count;
    match mode {
        MassMode::UniformAll => Ok(Array1::from_elem(n, 1.0 / n as f64)),
        MassMode::UniformRegular => {
            let r = g.regular_count.ok_or_else(|| Error::Graph("uniform-regular masses need regular_count".into()))?;
            if r == 0 {
                return Err(Error::Graph("regular_count must be positive".into()));
            }
            Ok(Array1::from_elem(n, 1.0 / r as f64))
        }
        MassMode::Explicit(p) => {
            if p.len() != n {
                return Err(Error::Shape(format!("{} masses for {n} nodes", p.len())));
            }
            Ok(p.clone())
        }
    }
}

pub fn to_mm_space(g: &Graph, kind: StructureKind, mass: &MassMode) -> Result<MmSpace> {
    let space = MmSpace::new(structure_matrix(g, kind, None), node_masses(g, mass)?)?;
    match &g.features {
        Some(f) => space.with_features(f.clone()),
        None => Ok(space),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMetric {
    Euclidean,
    SquaredEuclidean,
    /// Hamming distance over `H` Weisfeiler-Lehman refinement rounds.
    WlHamming(usize),
}

/// Pairwise (squared) Euclidean distances between feature rows.
pub fn real_feature_cost(xa: ArrayView2<f64>, xb: ArrayView2<f64>, metric: FeatureMetric) -> Result<Array2<f64>> {
    if xa.ncols() != xb.ncols() {
        return Err(Error::Shape(format!("feature dimensions {} and {} differ", xa.ncols(), xb.ncols())));
    }
    let sq = Array2::from_shape_fn((xa.nrows(), xb.nrows()), |(i, j)| {
        xa.row(i).iter().zip(xb.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    });
    match metric {
        FeatureMetric::Euclidean => Ok(sq.mapv(f64::sqrt)),
        FeatureMetric::SquaredEuclidean => Ok(sq),
        FeatureMetric::WlHamming(_) => Err(Error::InvalidParameter("WL Hamming cost needs label features".into())),
    }
}

/// Feature cost between the nodes of two graphs.
pub fn feature_cost(a: &Graph, b: &Graph, metric: FeatureMetric) -> Result<Array2<f64>> {
    match metric {
        FeatureMetric::WlHamming(h) => {
            let labels = wl_labels(&[a, b], h)?;
            Ok(hamming(&labels[0], &labels[1]))
        }
        _ => match (&a.features, &b.features) {
            (Some(Features::Real(xa)), Some(Features::Real(xb))) => real_feature_cost(xa.view(), xb.view(), metric),
            _ => Err(Error::InvalidParameter("Euclidean costs need real features on both graphs".into())),
        },
    }
}

/// Number of rounds where the per-node WL labels differ.
pub fn hamming(a: &[Vec<u32>], b: &[Vec<u32>]) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i].iter().zip(&b[j]).filter(|(x, y)| x != y).count() as f64)
}

/// WL labels after refinement rounds `1..=h` for every node of every graph,
/// indexed `[graph][node][round − 1]`. Label ids come from dictionaries shared
/// across all given graphs, so equal ids mean equal rooted neighborhoods.
pub fn wl_labels(graphs: &[&Graph], h: usize) -> Result<Vec<Vec<Vec<u32>>>> {
    let mut initial: HashMap<&str, u32> = HashMap::new();
    let mut current: Vec<Vec<u32>> = Vec::with_capacity(graphs.len());
    for g in graphs {
        let Some(Features::Labels(labels)) = &g.features else {
            return Err(Error::InvalidParameter("WL refinement needs label features".into()));
        };
        current.push(
            labels
                .iter()
                .map(|l| {
                    let next = initial.len() as u32;
                    *initial.entry(l.as_str()).or_insert(next)
                })
                .collect(),
        );
    }
    let adj: Vec<Vec<Vec<usize>>> = graphs.iter().map(|g| g.neighbors()).collect();
    let mut out: Vec<Vec<Vec<u32>>> = graphs.iter().map(|g| vec![Vec::with_capacity(h); g.node_count]).collect();
    for _ in 0..h {
        let mut dict: HashMap<(u32, Vec<u32>), u32> = HashMap::new();
        let mut next_round = Vec::with_capacity(graphs.len());
        for (gi, labels) in current.iter().enumerate() {
            let refined: Vec<u32> = (0..labels.len())
                .map(|v| {
                    let mut nb: Vec<u32> = adj[gi][v].iter().map(|&u| labels[u]).collect();
                    nb.sort_unstable();
                    let next = dict.len() as u32;
                    *dict.entry((labels[v], nb)).or_insert(next)
                })
                .collect();
            for (v, &l) in refined.iter().enumerate() {
                out[gi][v].push(l);
            }
            next_round.push(refined);
        }
        current = next_round;
    }
    Ok(out)
}

/// BFS subgraph with `⌈fraction·n⌉` nodes from a seeded random start.
/// Returns the induced subgraph (nodes in original index order) and, for each
/// of its nodes, the original index.
pub fn extract_bfs_subgraph(g: &Graph, fraction: f64, seed: u64) -> Result<(Graph, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if g.node_count == 0 {
        return Err(Error::Graph("cannot sample from an empty graph".into()));
    }
    let start = rng.gen_range(0..g.node_count);
    extract_bfs_subgraph_from(g, fraction, start, &mut rng)
}

/// As [`extract_bfs_subgraph`] with an explicit start node.
pub fn extract_bfs_subgraph_from(
    g: &Graph,
    fraction: f64,
    start: usize,
    rng: &mut impl Rng,
) -> Result<(Graph, Vec<usize>)> {
    let n = g.node_count;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("fraction must lie in (0,1], got {fraction}")));
    }
    if start >= n {
        return Err(Error::Graph(format!("start node {start} out of range")));
    }
    let want = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let adj = g.neighbors();
    let mut seen = vec![false; n];
    let mut picked = Vec::with_capacity(want);
    let mut queue = VecDeque::new();
    seen[start] = true;
    picked.push(start);
    queue.push_back(start);
    while picked.len() < want {
        let u = match queue.pop_front() {
            Some(u) => u,
            None => {
                let rest: Vec<usize> = (0..n).filter(|&v| !seen[v]).collect();
                let v = rest[rng.gen_range(0..rest.len())];
                seen[v] = true;
                picked.push(v);
                queue.push_back(v);
                continue;
            }
        };
        let mut fresh: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
        fresh.shuffle(rng);
        for v in fresh {
            if picked.len() == want {
                break;
            }
            seen[v] = true;
            picked.push(v);
            queue.push_back(v);
        }
    }
    picked.sort_unstable();
    Ok((induced(g, &picked)?, picked))
}

/// Subgraph induced by `nodes` (sorted, distinct), renumbered in that order.
pub fn induced(g: &Graph, nodes: &[usize]) -> Result<Graph> {
    let mut index = vec![usize::MAX; g.node_count];
    for (k, &v) in nodes.iter().enumerate() {
        index[v] = k;
    }
    let edges = g
        .edges
        .iter()
        .filter(|(a, b)| index[*a] != usize::MAX && index[*b] != usize::MAX)
        .map(|&(a, b)| (index[a], index[b]));
    let mut sub = Graph::new(nodes.len(), edges)?;
    if let Some(f) = &g.features {
        sub = sub.with_features(match f {
            Features::Real(x) => Features::Real(x.select(ndarray::Axis(0), nodes)),
            Features::Labels(l) => Features::Labels(nodes.iter().map(|&v| l[v].clone()).collect()),
        })?;
    }
    if let Some(r) = g.regular_count {
        sub = sub.with_regular_count(nodes.iter().filter(|&&v| v < r).count())?;
    }
    Ok(sub)
}

/// Appends `⌊eta·n⌋` outlier nodes, each wired to 1–3 random earlier nodes.
/// Real outlier features are drawn per dimension from `(y, y + 2·sd]`, with `y`
/// the largest regular value (or `upper[d]` when given) and `sd` the regular
/// standard deviation; label outliers get a label unused by regular nodes.
pub fn inject_outliers(g: &Graph, eta: f64, seed: u64) -> Result<Graph> {
    inject_outliers_bounded(g, eta, seed, None)
}

pub fn inject_outliers_bounded(g: &Graph, eta: f64, seed: u64, upper: Option<&[f64]>) -> Result<Graph> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!("eta must be finite and >= 0, got {eta}")));
    }
    let n = g.node_count;
    let regular = g.regular_count.unwrap_or(n);
    let extra = (eta * n as f64 + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges.clone();
    for k in 0..extra {
        let id = n + k;
        let degree = rng.gen_range(1..=3usize).min(id);
        for v in rand::seq::index::sample(&mut rng, id, degree).into_iter() {
            edges.push((v, id));
        }
    }
    let features = match &g.features {
        None => None,
        Some(Features::Real(x)) => {
            let d = x.ncols();
            if let Some(u) = upper {
                if u.len() != d {
                    return Err(Error::Shape(format!("{} upper bounds for {d} feature dimensions", u.len())));
                }
            }
            let reg = x.slice(ndarray::s![..regular, ..]);
            let mut out = Array2::zeros((n + extra, d));
            out.slice_mut(ndarray::s![..n, ..]).assign(x);
            for c in 0..d {
                let col = reg.column(c);
                let len = col.len().max(1) as f64;
                let mean = col.sum() / len;
                let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len).sqrt();
                let top = upper.map_or_else(|| col.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)), |u| u[c]);
                let top = if top.is_finite() { top } else { 0.0 };
                for k in 0..extra {
                    let t: f64 = rng.gen_range(0.0..1.0);
                    out[[n + k, c]] = top + 2.0 * sd * (1.0 - t);
                }
            }
            Some(Features::Real(out))
        }
        Some(Features::Labels(l)) => {
            let mut fresh = String::from("outlier");
            while l[..regular.min(l.len())].contains(&fresh) {
                fresh.push('_');
            }
            let mut out = l.clone();
            out.extend(std::iter::repeat_n(fresh, extra));
            Some(Features::Labels(out))
        }
    };
    let mut h = Graph::new(n + extra, edges)?.with_regular_count(regular)?;
    if let Some(f) = features {
        h = h.with_features(f)?;
    }
    Ok(h)
}

/// Node attributes of a stochastic block model graph.
#[derive(Debug, Clone, PartialEq)]
pub enum SbmFeatures {
    None,
    /// Independent uniform vectors in `[low, high]^dim`.
    Uniform {
        dim: usize,
        low: f64,
        high: f64,
    },
    /// Per-community uniform centers in `[low, high]^dim` plus Gaussian noise,
    /// clipped to the box.
    Community {
        dim: usize,
        low: f64,
        high: f64,
        noise: f64,
    },
    /// Given per-community centers (one row each) plus Gaussian noise, clipped to the box.
    Centered {
        centers: Array2<f64>,
        low: f64,
        high: f64,
        noise: f64,
    },
    /// Community index as a string label.
    CommunityLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub features: SbmFeatures,
}

/// Samples a stochastic block model graph; nodes are numbered community by community.
pub fn sbm(spec: &SbmSpec, seed: u64) -> Result<Graph> {
    for (name, p) in [("p_in", spec.p_in), ("p_out", spec.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("{name} must lie in [0,1], got {p}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block: Vec<usize> = spec.sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = block.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block[i] == block[j] { spec.p_in } else { spec.p_out };
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::new(n, edges)?;
    let features = match spec.features {
        SbmFeatures::None => return Ok(g),
        SbmFeatures::Uniform { dim, low, high } => {
            check_box(low, high)?;
            Features::Real(Array2::from_shape_fn((n, dim), |_| rng.gen_range(low..=high)))
        }
        SbmFeatures::Community { dim, low, high, noise } => {
            check_box(low, high)?;
            let normal =
                Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
            let centers = Array2::from_shape_fn((spec.sizes.len(), dim), |_| rng.gen_range(low..=high));
            Features::Real(Array2::from_shape_fn((n, dim), |(i, d)| {
                (centers[[block[i], d]] + normal.sample(&mut rng)).clamp(low, high)
            }))
        }
        SbmFeatures::Centered { ref centers, low, high, noise } => {
            check_box(low, high)?;
            if centers.nrows() != spec.sizes.len() {
                return Err(Error::Shape(format!("{} centers for {} communities", centers.nrows(), spec.sizes.len())));
            }
            let normal =
                Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
            Features::Real(Array2::from_shape_fn((n, centers.ncols()), |(i, d)| {
                (centers[[block[i], d]] + normal.sample(&mut rng)).clamp(low, high)
            }))
        }
        SbmFeatures::CommunityLabel => Features::Labels(block.iter().map(|c| format!("c{c}")).collect()),
    };
    g.with_features(features)
}

/// Clustering corpus: graph type `t` has `communities[t]` communities whose
/// scalar features sit at evenly spaced centers in `[-2, 2]`. Each graph has 30
/// or 40 regular nodes and is redrawn until connected; a random half of the
/// graphs (rounded down) gets `outlier_eta · n` outliers with features above 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCorpusSpec {
    pub communities: Vec<usize>,
    pub per_type: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub noise: f64,
    pub outlier_eta: f64,
}

impl Default for ClusterCorpusSpec {
    fn default() -> Self {
        Self { communities: vec![1, 2, 3], per_type: 5, p_in: 0.8, p_out: 0.05, noise: 0.2, outlier_eta: 0.3 }
    }
}

/// Returns the graphs and their generative type labels.
pub fn clustering_corpus(spec: &ClusterCorpusSpec, seed: u64) -> Result<(Vec<Graph>, Vec<usize>)> {
    if spec.communities.is_empty() || spec.communities.contains(&0) || spec.per_type == 0 {
        return Err(Error::InvalidParameter("corpus needs at least one type and one graph per type".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = spec.communities.len() * spec.per_type;
    let mut corrupted: Vec<usize> = (0..total).collect();
    corrupted.shuffle(&mut rng);
    corrupted.truncate(total / 2);
    let mut graphs = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for idx in 0..total {
        let t = idx / spec.per_type;
        let k = spec.communities[t];
        let n: usize = if rng.gen_bool(0.5) { 30 } else { 40 };
        let sizes: Vec<usize> = (0..k).map(|c| n / k + usize::from(c < n % k)).collect();
        let centers =
            Array2::from_shape_fn((k, 1), |(c, _)| if k == 1 { 0.0 } else { -2.0 + 4.0 * c as f64 / (k - 1) as f64 });
        let sbm_spec = SbmSpec {
            sizes,
            p_in: spec.p_in,
            p_out: spec.p_out,
            features: SbmFeatures::Centered { centers, low: -2.0, high: 2.0, noise: spec.noise },
        };
        // Redraw disconnected samples; shortest paths would otherwise hit the fill value.
        let mut g = sbm(&sbm_spec, rng.gen())?;
        for _ in 0..1000 {
            if bfs(&g.neighbors(), 0).iter().all(|&d| d != usize::MAX) {
                break;
            }
            g = sbm(&sbm_spec, rng.gen())?;
        }
        let g = g.with_regular_count(n)?;
        let g = if corrupted.contains(&idx) {
            inject_outliers_bounded(&g, spec.outlier_eta, rng.gen(), Some(&[2.0]))?
        } else {
            g
        };
        graphs.push(g);
        labels.push(t);
    }
    Ok((graphs, labels))
}

fn check_box(low: f64, high: f64) -> Result<()> {
    if low.is_finite() && high.is_finite() && low <= high {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("feature range [{low}, {high}] is invalid")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path(n: usize) -> Graph {
        Graph::new(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    fn labeled(n: usize, edges: &[(usize, usize)], labels: &[&str]) -> Graph {
        Graph::new(n, edges.iter().copied())
            .unwrap()
            .with_features(Features::Labels(labels.iter().map(|s| s.to_string()).collect()))
            .unwrap()
    }

    #[test]
    fn path_shortest_paths() {
        let s = structure_matrix(&path(3), StructureKind::ShortestPath, None);
        assert_eq!(s, array![[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]);
    }

    #[test]
    fn triangle_adjacency() {
        let g = Graph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let a = structure_matrix(&g, StructureKind::Adjacency, None);
        assert_eq!(a, array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
    }

    #[test]
    fn disconnected_blocks() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        let s = structure_matrix(&g, StructureKind::ShortestPath, Some(10.0));
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(s[[i, j]], 10.0);
                assert_eq!(s[[j, i]], 10.0);
            }
        }
        assert_eq!(s[[0, 1]], 1.0);
        assert_eq!(default_disconnect_value(&g), 2.0);
        assert_eq!(default_disconnect_value(&Graph::new(2, []).unwrap()), 1.0);
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(2, [(1, 1)]).is_err());
        assert_eq!(Graph::new(3, [(1, 0), (0, 1)]).unwrap().edges(), &[(0, 1)]);
    }

    #[test]
    fn masses() {
        let g = path(4);
        assert_eq!(node_masses(&g, &MassMode::UniformAll).unwrap(), array![0.25, 0.25, 0.25, 0.25]);
        assert!(node_masses(&g, &MassMode::UniformRegular).is_err());
        let g = g.with_regular_count(3).unwrap();
        let p = node_masses(&g, &MassMode::UniformRegular).unwrap();
        assert!(p.iter().all(|&v| v == 1.0 / 3.0));
        assert!((p.sum() - 4.0 / 3.0).abs() < 1e-15);
        let two = path(2);
        assert_eq!(node_masses(&two, &MassMode::Explicit(array![0.1, 0.9])).unwrap(), array![0.1, 0.9]);
        assert!(node_masses(&two, &MassMode::Explicit(array![1.0])).is_err());
    }

    #[test]
    fn euclidean_costs() {
        let c = real_feature_cost(array![[0.0]].view(), array![[3.0]].view(), FeatureMetric::Euclidean).unwrap();
        assert_eq!(c[[0, 0]], 3.0);
        let c = real_feature_cost(array![[0.0]].view(), array![[3.0]].view(), FeatureMetric::SquaredEuclidean).unwrap();
        assert_eq!(c[[0, 0]], 9.0);
        assert!(real_feature_cost(array![[0.0]].view(), array![[3.0, 1.0]].view(), FeatureMetric::Euclidean).is_err());
    }

    #[test]
    fn wl_self_cost_has_zero_diagonal() {
        let g = labeled(4, &[(0, 1), (1, 2), (2, 3), (0, 2)], &["a", "b", "a", "c"]);
        let c = feature_cost(&g, &g, FeatureMetric::WlHamming(3)).unwrap();
        assert!((0..4).all(|i| c[[i, i]] == 0.0));
        assert!(c.iter().all(|&v| (0.0..=3.0).contains(&v)));
    }

    #[test]
    fn wl_matches_string_oracle() {
        let a = labeled(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)], &["x", "y", "x", "y", "z"]);
        let b = labeled(4, &[(0, 1), (1, 2), (2, 3), (0, 3)], &["y", "x", "y", "x"]);
        for h in 0..4 {
            let fast = feature_cost(&a, &b, FeatureMetric::WlHamming(h)).unwrap();
            let slow = crate::oracle::wl_reference_cost(&a, &b, h).unwrap();
            assert_eq!(fast, slow, "h = {h}");
        }
    }

    #[test]
    fn wl_is_permutation_invariant() {
        let g = labeled(4, &[(0, 1), (1, 2), (2, 3)], &["a", "b", "b", "c"]);
        let perm = [2, 0, 3, 1];
        // node k of h is node perm[k] of g
        let mut inv = [0; 4];
        for (k, &v) in perm.iter().enumerate() {
            inv[v] = k;
        }
        let h = labeled(4, &[(inv[0], inv[1]), (inv[1], inv[2]), (inv[2], inv[3])], &["b", "a", "c", "b"]);
        let cg = feature_cost(&g, &g, FeatureMetric::WlHamming(2)).unwrap();
        let ch = feature_cost(&h, &h, FeatureMetric::WlHamming(2)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(ch[[i, j]], cg[[perm[i], perm[j]]]);
            }
        }
    }

    #[test]
    fn full_fraction_is_identity() {
        let g = path(6);
        let (sub, map) = extract_bfs_subgraph(&g, 1.0, 4).unwrap();
        assert_eq!(sub, g);
        assert_eq!(map, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn path_half_from_the_end() {
        let g = path(8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (sub, map) = extract_bfs_subgraph_from(&g, 0.5, 0, &mut rng).unwrap();
        assert_eq!(map, vec![0, 1, 2, 3]);
        assert_eq!(sub, path(4));
    }

    #[test]
    fn star_keeps_hub_and_leaves() {
        let g = Graph::new(7, (1..7).map(|i| (0, i))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (sub, map) = extract_bfs_subgraph_from(&g, 0.5, 0, &mut rng).unwrap();
        assert_eq!(map.len(), 4);
        assert_eq!(map[0], 0);
        assert_eq!(sub.edges().len(), 3);
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(extract_bfs_subgraph_from(&g, 0.5, 0, &mut rng2).unwrap().1, map);
    }

    #[test]
    fn disconnected_graphs_restart_bfs() {
        let g = Graph::new(6, [(0, 1), (2, 3), (4, 5)]).unwrap();
        for seed in 0..20 {
            let (sub, map) = extract_bfs_subgraph(&g, 0.7, seed).unwrap();
            assert_eq!(sub.node_count(), 5);
            assert!(map.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(extract_bfs_subgraph(&g, 0.0, 1).is_err());
        assert!(extract_bfs_subgraph(&g, 1.5, 1).is_err());
    }

    #[test]
    fn outliers_without_eta_change_nothing() {
        let g = path(5).with_features(Features::Real(array![[0.0], [1.0], [2.0], [3.0], [4.0]])).unwrap();
        let h = inject_outliers(&g, 0.0, 1).unwrap();
        assert_eq!(h.regular_count(), Some(5));
        assert_eq!(h.edges(), g.edges());
        assert_eq!(h.features(), g.features());
    }

    #[test]
    fn outliers_extend_the_graph() {
        let x = Array2::from_shape_fn((10, 2), |(i, d)| -2.0 + 0.4 * i as f64 + d as f64 * 0.1);
        let g = path(10).with_features(Features::Real(x)).unwrap();
        let h = inject_outliers_bounded(&g, 0.3, 5, Some(&[2.0, 2.0])).unwrap();
        assert_eq!(h.node_count(), 13);
        assert_eq!(h.regular_count(), Some(10));
        let f = h.features().and_then(Features::as_real).unwrap();
        assert!(f.slice(ndarray::s![10.., ..]).iter().all(|&v| v > 2.0));
        let adj = h.neighbors();
        assert!((10..13).all(|v| !adj[v].is_empty()));
        assert_eq!(inject_outliers_bounded(&g, 0.3, 5, Some(&[2.0, 2.0])).unwrap(), h);

        let l = labeled(3, &[(0, 1)], &["outlier", "a", "b"]);
        let lh = inject_outliers(&l, 1.0, 2).unwrap();
        let Some(Features::Labels(labels)) = lh.features() else { panic!() };
        assert_eq!(labels[3], "outlier_");
        assert!(labels[3..].iter().all(|s| s == "outlier_"));
    }

    #[test]
    fn json_round_trip() {
        let g = path(3).with_features(Features::Real(array![[0.5, 1.0], [0.25, -1.0], [1e-3, 2.0]])).unwrap();
        let g = g.with_regular_count(2).unwrap();
        let back = Graph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_json(), g.to_json());
        let l = labeled(2, &[(0, 1)], &["a", "b"]);
        assert_eq!(Graph::from_json(&l.to_json()).unwrap(), l);
        assert!(Graph::from_json(r#"{"nodes":[{"id":0}],"edges":[],"extra":1}"#).is_err());
        assert!(Graph::from_json(r#"{"nodes":[{"id":1}],"edges":[]}"#).is_err());
        assert!(Graph::from_json(r#"{"nodes":[{"id":0,"label":"a"},{"id":1}],"edges":[]}"#).is_err());
    }

    #[test]
    fn sbm_is_seeded_and_sized() {
        let spec = SbmSpec {
            sizes: vec![5, 5, 4],
            p_in: 0.8,
            p_out: 0.05,
            features: SbmFeatures::Community { dim: 2, low: 0.0, high: 1.0, noise: 0.05 },
        };
        let a = sbm(&spec, 3).unwrap();
        assert_eq!(a.node_count(), 14);
        assert_eq!(a, sbm(&spec, 3).unwrap());
        assert_ne!(a, sbm(&spec, 4).unwrap());
        let f = a.features().and_then(Features::as_real).unwrap();
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        let bad = SbmSpec { p_in: 1.5, ..spec };
        assert!(sbm(&bad, 0).is_err());
    }

    #[test]
    fn centered_features_follow_communities() {
        let centers = array![[-2.0], [2.0]];
        let spec = SbmSpec {
            sizes: vec![4, 4],
            p_in: 1.0,
            p_out: 0.0,
            features: SbmFeatures::Centered { centers, low: -2.0, high: 2.0, noise: 0.0 },
        };
        let g = sbm(&spec, 1).unwrap();
        let x = g.features().and_then(Features::as_real).unwrap();
        assert!((0..4).all(|i| x[[i, 0]] == -2.0) && (4..8).all(|i| x[[i, 0]] == 2.0));
        let bad = SbmSpec {
            features: SbmFeatures::Centered { centers: array![[0.0]], low: -2.0, high: 2.0, noise: 0.0 },
            ..spec
        };
        assert!(sbm(&bad, 1).is_err());
    }

    #[test]
    fn corpus_protocol() {
        let spec = ClusterCorpusSpec::default();
        let (graphs, labels) = clustering_corpus(&spec, 7).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
        let corrupted = graphs.iter().filter(|g| g.node_count() > g.regular_count().unwrap()).count();
        assert_eq!(corrupted, 7);
        for g in &graphs {
            let r = g.regular_count().unwrap();
            assert!(r == 30 || r == 40);
            let extra = g.node_count() - r;
            assert!(extra == 0 || extra == (0.3 * r as f64 + 1e-9).floor() as usize);
            let x = g.features().and_then(Features::as_real).unwrap();
            assert!((0..r).all(|i| (-2.0..=2.0).contains(&x[[i, 0]])));
            assert!((r..g.node_count()).all(|i| x[[i, 0]] >= 2.0));
            let d = structure_matrix(g, StructureKind::ShortestPath, Some(f64::INFINITY));
            assert!(d.iter().all(|v| v.is_finite()), "corpus graphs are connected");
        }
        assert_eq!(clustering_corpus(&spec, 7).unwrap().0, graphs);
        assert!(clustering_corpus(&ClusterCorpusSpec { communities: vec![], ..spec }, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn structure_is_symmetric_with_zero_diagonal(
            n in 1usize..9,
            raw in proptest::collection::vec((0usize..9, 0usize..9), 0..20),
        ) {
            let edges = raw.into_iter().filter(|(a, b)| a < &n && b < &n && a != b);
            let g = Graph::new(n, edges).unwrap();
            for kind in [StructureKind::Adjacency, StructureKind::ShortestPath] {
                let s = structure_matrix(&g, kind, None);
                proptest::prop_assert_eq!(&s, &s.t());
                proptest::prop_assert!((0..n).all(|i| s[[i, i]] == 0.0));
            }
        }

        #[test]
        fn bfs_mapping_is_injective_with_requested_size(seed in 0u64..1000, frac in 0.05f64..1.0) {
            let g = sbm(&SbmSpec { sizes: vec![6, 6], p_in: 0.5, p_out: 0.1, features: SbmFeatures::None }, seed).unwrap();
            let (sub, map) = extract_bfs_subgraph(&g, frac, seed).unwrap();
            let want = ((frac * 12.0 - 1e-9).ceil() as usize).clamp(1, 12);
            proptest::prop_assert_eq!(map.len(), want);
            proptest::prop_assert_eq!(sub.node_count(), want);
            proptest::prop_assert!(map.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
