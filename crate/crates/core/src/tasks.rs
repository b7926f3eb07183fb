//! End-user workflows: graph matching with accuracy, FMPGW k-means with
//! barycenter centroids, and pairwise distance / kernel matrices.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{solve_barycenter_fmpgw, BarycenterOptions, BarycenterProblem};
use crate::esolver::{solve_sink_fmpgw, solve_sink_fpgw, EntropicOptions};
use crate::fw::{solve_fw_fmpgw, solve_fw_fpgw, FwOptions};
use crate::graphio::{feature_cost, real_feature_cost, to_mm_space, FeatureMetric, Graph, MassMode, StructureKind};
use crate::pot::{solve_exact, PotMode, PotProblem};
use crate::{Error, Features, FusedConfig, MmSpace, Result, SolverReport, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    FwFpgw,
    FwFmpgw,
    SinkFpgw,
    SinkFmpgw,
}

impl SolverKind {
    pub fn is_mass_constrained(self) -> bool {
        matches!(self, Self::FwFmpgw | Self::SinkFmpgw)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveOptions {
    pub fw: FwOptions,
    pub entropic: EntropicOptions,
}

/// Product start of the right mass for `solver`.
pub fn default_plan(
    source: &MmSpace,
    target: &MmSpace,
    cfg: &FusedConfig,
    solver: SolverKind,
) -> Result<TransportPlan> {
    Ok(if solver.is_mass_constrained() {
        TransportPlan::product_with_mass(source.mass().view(), target.mass().view(), cfg.require_rho()?)
    } else {
        TransportPlan::product(source.mass().view(), target.mass().view())
    })
}

/// Runs `solver` from `init`, or from [`default_plan`] when absent.
pub fn solve_pair(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    solver: SolverKind,
    init: Option<&TransportPlan>,
    opts: SolveOptions,
) -> Result<SolverReport> {
    let fallback;
    let init = match init {
        Some(p) => p,
        None => {
            fallback = default_plan(source, target, cfg, solver)?;
            &fallback
        }
    };
    match solver {
        SolverKind::FwFpgw => solve_fw_fpgw(source, target, feature_cost, cfg, init, opts.fw),
        SolverKind::FwFmpgw => solve_fw_fmpgw(source, target, feature_cost, cfg, init, opts.fw),
        SolverKind::SinkFpgw => solve_sink_fpgw(source, target, feature_cost, cfg, init, opts.entropic),
        SolverKind::SinkFmpgw => solve_sink_fmpgw(source, target, feature_cost, cfg, init, opts.entropic),
    }
}

/// Linear OT on the feature cost alone, at the mass `solver` will use
/// (`min(|p|,|q|)` for penalty solvers).
pub fn feature_plan(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    solver: SolverKind,
) -> Result<TransportPlan> {
    let rho =
        if solver.is_mass_constrained() { cfg.require_rho()? } else { source.total_mass().min(target.total_mass()) };
    let prob = PotProblem::new(
        feature_cost.to_owned(),
        source.mass().clone(),
        target.mass().clone(),
        PotMode::MassConstrained(rho),
    )?;
    solve_exact(&prob)
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    /// For each source point, the target with the most mass (lowest index on ties),
    /// or `None` when the row carries no mass.
    pub assignment: Vec<Option<usize>>,
    /// Fraction of ground-truth pairs recovered; `None` without ground truth.
    pub accuracy: Option<f64>,
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
}

pub fn argmax_assignment(plan: &TransportPlan) -> Vec<Option<usize>> {
    plan.entries()
        .rows()
        .into_iter()
        .map(|row| {
            if row.sum() <= 1e-9 {
                return None;
            }
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            Some(best)
        })
        .collect()
}

/// `|{(i,j) ∈ truth : assignment[i] = j}| / |truth|`.
pub fn accuracy(assignment: &[Option<usize>], truth: &[(usize, usize)]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let hits = truth.iter().filter(|&&(i, j)| assignment.get(i).copied().flatten() == Some(j)).count();
    Some(hits as f64 / truth.len() as f64)
}

/// Solves from `init`, or without one from both a product start and a
/// feature-OT start, keeping the lower objective; then reads off the argmax
/// assignment.
#[allow(clippy::too_many_arguments)]
pub fn match_graphs(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    solver: SolverKind,
    init: Option<&TransportPlan>,
    truth: Option<&[(usize, usize)]>,
    opts: SolveOptions,
) -> Result<MatchResult> {
    let report = match init {
        Some(p) => solve_pair(source, target, feature_cost, cfg, solver, Some(p), opts)?,
        None => {
            let product = solve_pair(source, target, feature_cost, cfg, solver, None, opts)?;
            let start = feature_plan(source, target, feature_cost, cfg, solver)?;
            let featured = solve_pair(source, target, feature_cost, cfg, solver, Some(&start), opts)?;
            if featured.objective < product.objective {
                featured
            } else {
                product
            }
        }
    };
    let assignment = argmax_assignment(&report.plan);
    let accuracy = truth.and_then(|t| accuracy(&assignment, t));
    Ok(MatchResult {
        assignment,
        accuracy,
        plan: report.plan,
        objective: report.objective,
        iterations: report.iterations,
    })
}

pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("label vectors of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |k: u64| (k * k.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&k| pairs(k)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    let expected = if total > 0.0 { rows * cols / total } else { 0.0 };
    let max = 0.5 * (rows + cols);
    if max == expected {
        // Both partitions trivial in the same way.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Extra k-means++ seedings tried after the medoid seeding; the run with
    /// the lowest final objective wins.
    pub restarts: usize,
    pub fw: FwOptions,
    pub barycenter: BarycenterOptions,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 10,
            restarts: 0,
            fw: FwOptions::default(),
            barycenter: BarycenterOptions { outer_iters: 10, ..BarycenterOptions::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Centroid {
    pub structure: Array2<f64>,
    pub features: Array2<f64>,
    pub mass: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Centroid>,
    /// `Σ_g d(g, centroid(g))` after each assignment step.
    pub objective_trace: Vec<f64>,
    pub distances: Vec<f64>,
}

fn centroid_space(c: &Centroid) -> Result<MmSpace> {
    MmSpace::with_free_diagonal(c.structure.clone(), c.mass.clone())?.with_features(Features::Real(c.features.clone()))
}

fn real_features(s: &MmSpace, idx: usize) -> Result<&Array2<f64>> {
    s.features()
        .and_then(Features::as_real)
        .ok_or_else(|| Error::InvalidParameter(format!("graph {idx} needs real features")))
}

/// Centroid copied from a graph: same structure and features, uniform mass summing to `rho`.
fn seed_centroid(g: &MmSpace, idx: usize, rho: f64) -> Result<Centroid> {
    let n = g.len();
    Ok(Centroid {
        structure: g.structure().clone(),
        features: real_features(g, idx)?.clone(),
        mass: Array1::from_elem(n, rho / n as f64),
    })
}

fn identity_plan(c: &Centroid, g: &MmSpace) -> Result<TransportPlan> {
    let n = c.mass.len();
    TransportPlan::new(Array2::from_shape_fn(
        (n, g.len()),
        |(i, j)| if i == j { c.mass[i].min(g.mass()[j]) } else { 0.0 },
    ))
}

/// FMPGW distance from centroid to graph: the better of a product start and `warm`.
fn centroid_distance(
    c: &MmSpace,
    g: &MmSpace,
    idx: usize,
    cfg: &FusedConfig,
    warm: Option<&TransportPlan>,
    fw: FwOptions,
) -> Result<(f64, TransportPlan)> {
    let cost = real_feature_cost(
        real_features(c, usize::MAX)?.view(),
        real_features(g, idx)?.view(),
        FeatureMetric::SquaredEuclidean,
    )?;
    let rho = cfg.require_rho()?;
    let fresh = TransportPlan::product_with_mass(c.mass().view(), g.mass().view(), rho);
    let mut best = solve_fw_fmpgw(c, g, cost.view(), cfg, &fresh, fw)?;
    if let Some(w) = warm {
        if (w.total_mass() - rho).abs() <= crate::tol::MASS_EQ {
            let r = solve_fw_fmpgw(c, g, cost.view(), cfg, w, fw)?;
            if r.objective < best.objective {
                best = r;
            }
        }
    }
    Ok((best.objective, best.plan))
}

/// FMPGW k-means with `ρ = cfg.rho` (1 in the clustering protocol) and
/// squared-Euclidean feature cost. Centroids start as copies of data graphs
/// chosen by k-medoids (greedy build, then swaps) on the graph-to-graph
/// distance table, followed by `opts.restarts` k-means++ seedings; each run
/// alternates assignment with FMPGW barycenter updates, and the run with the
/// lowest final objective is returned. An empty cluster is re-seeded from the
/// graph farthest from its centroid.
pub fn kmeans_fpgw(
    graphs: &[MmSpace],
    k: usize,
    cfg: &FusedConfig,
    opts: KMeansOptions,
    seed: u64,
) -> Result<ClusterResult> {
    use rand::{Rng, SeedableRng};
    let count = graphs.len();
    if k == 0 || k > count {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in [1, {count}]")));
    }
    let rho = cfg.require_rho()?;
    for (idx, g) in graphs.iter().enumerate() {
        real_features(g, idx)?;
        if g.total_mass() + crate::tol::MASS_EQ < rho {
            return Err(Error::Infeasible(format!("graph {idx} has mass {} < rho = {rho}", g.total_mass())));
        }
    }
    let mut best = medoid_run(graphs, k, cfg, opts)?;
    let score = |r: &ClusterResult| r.objective_trace.last().copied().unwrap_or(f64::INFINITY);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..opts.restarts {
        let run = kmeans_run(graphs, k, cfg, opts, rng.gen())?;
        if score(&run) < score(&best) {
            best = run;
        }
    }
    Ok(best)
}

/// k-medoids on `d` (rows: candidate centers, columns: graphs): greedy build
/// then first-improvement swaps. Returns the medoids in selection order.
pub fn k_medoids(d: &Array2<f64>, k: usize) -> Vec<usize> {
    let n = d.ncols();
    let cost =
        |set: &[usize]| -> f64 { (0..n).map(|g| set.iter().map(|&c| d[[c, g]]).fold(f64::INFINITY, f64::min)).sum() };
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut pick = None;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let mut trial = medoids.clone();
            trial.push(c);
            let v = cost(&trial);
            if pick.is_none_or(|(_, bv)| v < bv) {
                pick = Some((c, v));
            }
        }
        medoids.push(pick.expect("k <= n leaves a candidate").0);
    }
    let mut current = cost(&medoids);
    loop {
        let mut improved = false;
        for slot in 0..k {
            for c in 0..n {
                if medoids.contains(&c) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = c;
                let v = cost(&trial);
                if v < current - 1e-12 {
                    medoids = trial;
                    current = v;
                    improved = true;
                }
            }
        }
        if !improved {
            return medoids;
        }
    }
}

fn medoid_run(graphs: &[MmSpace], k: usize, cfg: &FusedConfig, opts: KMeansOptions) -> Result<ClusterResult> {
    let count = graphs.len();
    let rho = cfg.require_rho()?;
    let seeds: Vec<Centroid> =
        graphs.iter().enumerate().map(|(i, g)| seed_centroid(g, i, rho)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..count).flat_map(|c| (0..count).map(move |g| (c, g))).collect();
    let solved: Vec<(f64, TransportPlan)> = cells
        .par_iter()
        .map(|&(c, g)| {
            let warm = if c == g { Some(identity_plan(&seeds[c], &graphs[g])?) } else { None };
            centroid_distance(&centroid_space(&seeds[c])?, &graphs[g], g, cfg, warm.as_ref(), opts.fw)
        })
        .collect::<Result<_>>()?;
    let d = Array2::from_shape_fn((count, count), |(c, g)| solved[c * count + g].0);
    let medoids = k_medoids(&d, k);
    let mut state = Lloyd::new(graphs, k, cfg, opts);
    for (slot, &m) in medoids.iter().enumerate() {
        state.centroids.push(seeds[m].clone());
        for g in 0..count {
            state.plans[g][slot] = Some(solved[m * count + g].1.clone());
        }
    }
    state.iterate(vec![usize::MAX; count])
}

/// Lloyd iterations from a given partition: each centroid starts as a copy of
/// the lowest-indexed member of its cluster, then is refined as the FMPGW
/// barycenter of the cluster before the first reassignment.
pub fn kmeans_fpgw_from_labels(
    graphs: &[MmSpace],
    labels: &[usize],
    cfg: &FusedConfig,
    opts: KMeansOptions,
) -> Result<ClusterResult> {
    if labels.len() != graphs.len() {
        return Err(Error::Shape(format!("{} labels for {} graphs", labels.len(), graphs.len())));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let rho = cfg.require_rho()?;
    let mut state = Lloyd::new(graphs, k, cfg, opts);
    for c in 0..k {
        let first = labels
            .iter()
            .position(|&l| l == c)
            .ok_or_else(|| Error::InvalidParameter(format!("cluster {c} has no members")))?;
        state.centroids.push(seed_centroid(&graphs[first], first, rho)?);
    }
    for (idx, &c) in labels.iter().enumerate() {
        let space = centroid_space(&state.centroids[c])?;
        let warm = if labels.iter().position(|&l| l == c) == Some(idx) {
            Some(identity_plan(&state.centroids[c], &graphs[idx])?)
        } else {
            None
        };
        state.plans[idx][c] = Some(centroid_distance(&space, &graphs[idx], idx, cfg, warm.as_ref(), opts.fw)?.1);
    }
    state.update(labels)?;
    state.iterate(labels.to_vec())
}

struct Lloyd<'a> {
    graphs: &'a [MmSpace],
    k: usize,
    cfg: &'a FusedConfig,
    opts: KMeansOptions,
    centroids: Vec<Centroid>,
    /// `plans[g][c]`: latest plan from centroid `c` to graph `g`.
    plans: Vec<Vec<Option<TransportPlan>>>,
}

impl<'a> Lloyd<'a> {
    fn new(graphs: &'a [MmSpace], k: usize, cfg: &'a FusedConfig, opts: KMeansOptions) -> Self {
        Self { graphs, k, cfg, opts, centroids: Vec::with_capacity(k), plans: vec![vec![None; k]; graphs.len()] }
    }

    /// Distances from every graph to every centroid; stores the plans.
    fn distances(&mut self) -> Result<Vec<Vec<f64>>> {
        let spaces: Vec<MmSpace> = self.centroids.iter().map(centroid_space).collect::<Result<_>>()?;
        let (cfg, fw, plans) = (self.cfg, self.opts.fw, &self.plans);
        let rows: Vec<Vec<(f64, TransportPlan)>> = self
            .graphs
            .par_iter()
            .enumerate()
            .map(|(idx, g)| {
                spaces
                    .iter()
                    .enumerate()
                    .map(|(c, s)| centroid_distance(s, g, idx, cfg, plans[idx][c].as_ref(), fw))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(rows
            .into_iter()
            .enumerate()
            .map(|(idx, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(c, (d, plan))| {
                        self.plans[idx][c] = Some(plan);
                        d
                    })
                    .collect()
            })
            .collect())
    }

    /// Replaces every centroid by the barycenter of its members.
    fn update(&mut self, labels: &[usize]) -> Result<()> {
        let (graphs, cfg, opts, centroids, plans) = (self.graphs, self.cfg, self.opts, &self.centroids, &self.plans);
        let updated: Vec<(Centroid, Vec<(usize, TransportPlan)>)> = (0..self.k)
            .into_par_iter()
            .map(|c| {
                let members: Vec<usize> = (0..graphs.len()).filter(|&i| labels[i] == c).collect();
                let w = 1.0 / members.len() as f64;
                let prob = BarycenterProblem {
                    inputs: members.iter().map(|&i| graphs[i].clone()).collect(),
                    weights: vec![w; members.len()],
                    mass: centroids[c].mass.clone(),
                    configs: vec![*cfg; members.len()],
                };
                let warm: Vec<TransportPlan> =
                    members.iter().map(|&i| plans[i][c].clone().expect("member plans are stored")).collect();
                let init = (centroids[c].structure.clone(), centroids[c].features.clone());
                let r = solve_barycenter_fmpgw(&prob, init, Some(warm), opts.barycenter)?;
                let cent = Centroid { structure: r.structure, features: r.features, mass: centroids[c].mass.clone() };
                Ok((cent, members.into_iter().zip(r.plans).collect()))
            })
            .collect::<Result<_>>()?;
        for (c, (cent, member_plans)) in updated.into_iter().enumerate() {
            self.centroids[c] = cent;
            for (i, plan) in member_plans {
                self.plans[i][c] = Some(plan);
            }
        }
        Ok(())
    }

    /// Alternates assignment and update until labels repeat or `max_iter` assignments ran.
    fn iterate(mut self, mut labels: Vec<usize>) -> Result<ClusterResult> {
        let (count, k) = (self.graphs.len(), self.k);
        let rho = self.cfg.require_rho()?;
        let mut trace = Vec::new();
        let mut distances = vec![0.0; count];
        for _ in 0..self.opts.max_iter {
            let table = self.distances()?;
            let mut next = vec![0; count];
            for (idx, row) in table.iter().enumerate() {
                next[idx] = (0..k).fold(0, |b, c| if row[c] < row[b] { c } else { b });
                distances[idx] = row[next[idx]];
            }
            // Empty clusters take the worst-fit graph of a cluster with at least two members.
            for c in 0..k {
                if next.contains(&c) {
                    continue;
                }
                let donor = (0..count).filter(|&i| next.iter().filter(|&&l| l == next[i]).count() > 1).fold(
                    None,
                    |best: Option<usize>, i| match best {
                        Some(b) if distances[b] >= distances[i] => Some(b),
                        _ => Some(i),
                    },
                );
                let Some(g) = donor else { break };
                self.centroids[c] = seed_centroid(&self.graphs[g], g, rho)?;
                self.plans[g][c] = Some(identity_plan(&self.centroids[c], &self.graphs[g])?);
                next[g] = c;
                distances[g] = 0.0;
            }
            trace.push(distances.iter().sum::<f64>());
            let stable = next == labels;
            labels = next;
            if stable {
                break;
            }
            self.update(&labels)?;
        }
        Ok(ClusterResult { labels, centroids: self.centroids, objective_trace: trace, distances })
    }
}

fn kmeans_run(
    graphs: &[MmSpace],
    k: usize,
    cfg: &FusedConfig,
    opts: KMeansOptions,
    seed: u64,
) -> Result<ClusterResult> {
    use rand::distributions::{Distribution, WeightedIndex};
    use rand::{Rng, SeedableRng};
    let count = graphs.len();
    let rho = cfg.require_rho()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut state = Lloyd::new(graphs, k, cfg, opts);

    // k-means++ seeding.
    let first = rng.gen_range(0..count);
    state.centroids.push(seed_centroid(&graphs[first], first, rho)?);
    state.plans[first][0] = Some(identity_plan(&state.centroids[0], &graphs[first])?);
    let mut nearest = vec![f64::INFINITY; count];
    while state.centroids.len() < k {
        let c = state.centroids.len() - 1;
        let space = centroid_space(&state.centroids[c])?;
        let plans = &state.plans;
        let fresh: Vec<(f64, TransportPlan)> = graphs
            .par_iter()
            .enumerate()
            .map(|(idx, g)| centroid_distance(&space, g, idx, cfg, plans[idx][c].as_ref(), opts.fw))
            .collect::<Result<_>>()?;
        for (idx, (d, plan)) in fresh.into_iter().enumerate() {
            nearest[idx] = nearest[idx].min(d);
            state.plans[idx][c] = Some(plan);
        }
        let weights: Vec<f64> = nearest.iter().map(|&d| d.max(0.0)).collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(&mut rng),
            Err(_) => rng.gen_range(0..count),
        };
        let slot = state.centroids.len();
        state.centroids.push(seed_centroid(&graphs[next], next, rho)?);
        state.plans[next][slot] = Some(identity_plan(&state.centroids[slot], &graphs[next])?);
    }
    state.iterate(vec![usize::MAX; count])
}

/// Graph ingestion settings shared by corpus-level tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub structure: StructureKind,
    pub mass: MassMode,
    pub metric: FeatureMetric,
}

/// `D[a,b]` = best objective of `solver` between graphs `a` and `b` over a
/// product start and a feature-OT start, symmetrized as `(D + Dᵀ)/2`, with the
/// diagonal taken from identity-started self solves. With `sigma`, returns
/// `exp(−σ·D)`. Mass-constrained solvers without `cfg.rho` use `min(|p|,|q|)`
/// per pair.
pub fn pairwise_distance_matrix(
    graphs: &[Graph],
    spec: &CorpusSpec,
    cfg: &FusedConfig,
    solver: SolverKind,
    sigma: Option<f64>,
    opts: SolveOptions,
) -> Result<Array2<f64>> {
    if let Some(s) = sigma {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {s}")));
        }
    }
    let spaces: Vec<MmSpace> =
        graphs.iter().map(|g| to_mm_space(g, spec.structure, &spec.mass)).collect::<Result<_>>()?;
    let n = graphs.len();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(a, b)| {
            let (x, y) = (&spaces[a], &spaces[b]);
            let cost = feature_cost(&graphs[a], &graphs[b], spec.metric)?;
            let cfg = match (solver.is_mass_constrained(), cfg.rho) {
                (true, None) => cfg.with_rho(x.total_mass().min(y.total_mass())),
                _ => *cfg,
            };
            if a == b {
                let id = TransportPlan::new(Array2::from_diag(x.mass()))?;
                let id = if solver.is_mass_constrained() {
                    let rho = cfg.require_rho()?;
                    let total = id.total_mass();
                    TransportPlan::new(id.into_entries() * if total > 0.0 { rho / total } else { 0.0 })?
                } else {
                    id
                };
                return Ok(solve_pair(x, y, cost.view(), &cfg, solver, Some(&id), opts)?.objective);
            }
            let product = solve_pair(x, y, cost.view(), &cfg, solver, None, opts)?.objective;
            let start = feature_plan(x, y, cost.view(), &cfg, solver)?;
            let featured = solve_pair(x, y, cost.view(), &cfg, solver, Some(&start), opts)?.objective;
            Ok(product.min(featured))
        })
        .collect::<Result<_>>()?;
    let d = Array2::from_shape_vec((n, n), values).expect("one value per cell");
    let mut sym = (&d + &d.t()) * 0.5;
    for a in 0..n {
        sym[[a, a]] = d[[a, a]];
    }
    Ok(match sigma {
        Some(s) => sym.mapv(|v| (-s * v).exp()),
        None => sym,
    })
}
