//! Independent reference computations: brute-force grid minimization of the
//! fused objectives, finite-difference gradients, naive objective sums, a
//! string-based WL refinement, and the metric / equivalence property suites
//! evaluated on grid optima.
//!
//! Grid soundness: let `δ` be the grid step and `m = min(|p|,|q|)`. Every
//! entry of the objective gradient on the feasible set is bounded by
//! `G = ω1·max|C| + 2ω2·max|M|·m + 4λm` (FPGW) or `ω1·max|C| + 2ω2·max|M|·ρ`
//! (FMPGW), and every feasible plan has a grid plan within `δ` per entry
//! (floor rounding for `Γ≤`; consistent rounding of the 2-D table for `Γ≤^ρ`
//! when `ρ` is a multiple of `δ`). Hence `grid_min − G·δ·nm ≤ true_min ≤ grid_min`.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contraction::Loss;
use crate::graphio::Graph;
use crate::{Error, Features, FusedConfig, MmSpace, Result, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub step: f64,
    /// Maximum number of grid plans to enumerate.
    pub max_cells: usize,
}

impl GridSpec {
    pub const DEFAULT_BUDGET: usize = 20_000_000;

    /// Step `1/16` of the smallest positive mass.
    pub fn for_masses(p: &Array1<f64>, q: &Array1<f64>) -> Self {
        let smallest = p.iter().chain(q.iter()).copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        let step = if smallest.is_finite() { smallest / 16.0 } else { 1.0 };
        Self { step, max_cells: Self::DEFAULT_BUDGET }
    }

    pub fn with_step(step: f64) -> Self {
        Self { step, max_cells: Self::DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub objective: f64,
    pub plan: TransportPlan,
    /// `objective − certified_gap` lower-bounds the true minimum.
    pub certified_gap: f64,
    pub enumerated: usize,
}

/// Direct quartic evaluation of `ω1⟨C,γ⟩ + ω2 Σ L(Cx,Cy)γγ + λ(|p|²+|q|²−2|γ|²)`.
pub fn naive_objective(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: ArrayView2<f64>,
    cfg: &FusedConfig,
    lambda: f64,
) -> f64 {
    let (cx, cy) = (source.structure(), target.structure());
    let (n, m) = plan.dim();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..m {
            linear += feature_cost[[i, j]] * plan[[i, j]];
            for k in 0..n {
                for l in 0..m {
                    quad += cfg.loss.eval(cx[[i, k]], cy[[j, l]]) * plan[[i, j]] * plan[[k, l]];
                }
            }
        }
    }
    let mass: f64 = plan.iter().sum();
    let (pm, qm) = (source.mass().sum(), target.mass().sum());
    cfg.omega1 * linear + cfg.omega2 * quad + lambda * (pm * pm + qm * qm - 2.0 * mass * mass)
}

fn units(v: f64, step: f64) -> Result<i64> {
    let u = (v / step).round();
    if (u * step - v).abs() > 1e-9 * step.max(v.abs()) {
        return Err(Error::InvalidParameter(format!("mass {v} is not a multiple of the grid step {step}")));
    }
    Ok(u as i64)
}

/// Exhaustive minimum over grid plans: FPGW over `Γ≤` when `cfg.rho` is absent,
/// FMPGW over `Γ≤^ρ` otherwise.
pub fn grid_global_min(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    grid: GridSpec,
) -> Result<GridOptimum> {
    let (n, m) = (source.len(), target.len());
    if n * m > 6 {
        return Err(Error::InvalidParameter(format!("grid oracle handles n·m ≤ 6, got {n}x{m}")));
    }
    if feature_cost.dim() != (n, m) {
        return Err(Error::Shape(format!("feature cost is {:?}, expected ({n}, {m})", feature_cost.dim())));
    }
    if !(grid.step > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step must be positive, got {}", grid.step)));
    }
    let step = grid.step;
    let pu = source.mass().iter().map(|&v| units(v, step)).collect::<Result<Vec<_>>>()?;
    let qu = target.mass().iter().map(|&v| units(v, step)).collect::<Result<Vec<_>>>()?;
    let total = match cfg.rho {
        Some(rho) => Some(units(rho, step)?),
        None => None,
    };
    let lambda = if cfg.rho.is_some() { 0.0 } else { cfg.lambda };

    // Objective on unit counts: dense tensor of L values, evaluated per leaf.
    let cells = n * m;
    let mut tensor = vec![0.0; cells * cells];
    for a in 0..cells {
        for b in 0..cells {
            let (i, j, k, l) = (a / m, a % m, b / m, b % m);
            tensor[a * cells + b] = cfg.loss.eval(source.structure()[[i, k]], target.structure()[[j, l]]);
        }
    }
    let lin: Vec<f64> = (0..cells).map(|a| feature_cost[[a / m, a % m]]).collect();
    let (pm, qm) = (source.total_mass(), target.total_mass());
    let eval = |x: &[i64]| -> f64 {
        let mut linear = 0.0;
        let mut quad = 0.0;
        let mut mass = 0i64;
        for a in 0..cells {
            if x[a] == 0 {
                continue;
            }
            let xa = x[a] as f64 * step;
            mass += x[a];
            linear += lin[a] * xa;
            for b in 0..cells {
                if x[b] != 0 {
                    quad += tensor[a * cells + b] * xa * (x[b] as f64 * step);
                }
            }
        }
        let mass = mass as f64 * step;
        cfg.omega1 * linear + cfg.omega2 * quad + lambda * (pm * pm + qm * qm - 2.0 * mass * mass)
    };

    let mut search = Search {
        n,
        m,
        pu: &pu,
        qu: &qu,
        total,
        x: vec![0; cells],
        row: vec![0; n],
        col: vec![0; m],
        best: f64::INFINITY,
        best_x: vec![0; cells],
        count: 0,
        budget: grid.max_cells,
        eval: &eval,
    };
    search.walk(0, 0)?;
    if !search.best.is_finite() {
        return Err(Error::Infeasible("no grid plan satisfies the constraints".into()));
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| search.best_x[i * m + j] as f64 * step);
    let cap = pm.min(qm);
    let cmax = feature_cost.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let lmax = tensor.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let grad_bound = match cfg.rho {
        Some(rho) => cfg.omega1 * cmax + 2.0 * cfg.omega2 * lmax * rho,
        None => cfg.omega1 * cmax + 2.0 * cfg.omega2 * lmax * cap + 4.0 * cfg.lambda * cap,
    };
    Ok(GridOptimum {
        objective: search.best,
        plan: TransportPlan::new(plan)?,
        certified_gap: grad_bound * step * cells as f64,
        enumerated: search.count,
    })
}

struct Search<'a, F: Fn(&[i64]) -> f64> {
    n: usize,
    m: usize,
    pu: &'a [i64],
    qu: &'a [i64],
    total: Option<i64>,
    x: Vec<i64>,
    row: Vec<i64>,
    col: Vec<i64>,
    best: f64,
    best_x: Vec<i64>,
    count: usize,
    budget: usize,
    eval: &'a F,
}

impl<F: Fn(&[i64]) -> f64> Search<'_, F> {
    fn walk(&mut self, cell: usize, placed: i64) -> Result<()> {
        if cell == self.n * self.m {
            if self.total.is_some_and(|t| t != placed) {
                return Ok(());
            }
            self.count += 1;
            if self.count > self.budget {
                return Err(Error::Budget(format!("more than {} grid plans", self.budget)));
            }
            let v = (self.eval)(&self.x);
            if v < self.best {
                self.best = v;
                self.best_x.clone_from(&self.x);
            }
            return Ok(());
        }
        let (i, j) = (cell / self.m, cell % self.m);
        let mut hi = (self.pu[i] - self.row[i]).min(self.qu[j] - self.col[j]);
        if let Some(t) = self.total {
            hi = hi.min(t - placed);
        }
        for v in 0..=hi.max(-1) {
            self.x[cell] = v;
            self.row[i] += v;
            self.col[j] += v;
            self.walk(cell + 1, placed + v)?;
            self.row[i] -= v;
            self.col[j] -= v;
        }
        self.x[cell] = 0;
        Ok(())
    }
}

/// Central differences `(f(γ + hE) − f(γ − hE)) / 2h` per entry.
pub fn finite_diff_gradient(f: impl Fn(&Array2<f64>) -> f64, plan: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
    if !(1e-8..=1e-3).contains(&h) {
        return Err(Error::InvalidParameter(format!("finite-difference step must lie in [1e-8, 1e-3], got {h}")));
    }
    let mut work = plan.clone();
    let mut out = Array2::zeros(plan.dim());
    for idx in ndarray::indices(plan.dim()) {
        let x0 = work[idx];
        work[idx] = x0 + h;
        let up = f(&work);
        work[idx] = x0 - h;
        let down = f(&work);
        work[idx] = x0;
        out[idx] = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// WL labels as explicit nested strings: round `r` label of `v` is
/// `(label_{r−1}(v)|sorted neighbor labels)`. Returns `[node][round − 1]`.
pub fn wl_string_labels(g: &Graph, h: usize) -> Result<Vec<Vec<String>>> {
    let Some(Features::Labels(labels)) = g.features() else {
        return Err(Error::InvalidParameter("WL refinement needs label features".into()));
    };
    let adj = g.neighbors();
    let mut current = labels.clone();
    let mut out = vec![Vec::new(); g.node_count()];
    for _ in 0..h {
        let next: Vec<String> = (0..current.len())
            .map(|v| {
                let mut nb: Vec<&str> = adj[v].iter().map(|&u| current[u].as_str()).collect();
                nb.sort_unstable();
                format!("({}|{})", current[v], nb.join(","))
            })
            .collect();
        for (v, s) in next.iter().enumerate() {
            out[v].push(s.clone());
        }
        current = next;
    }
    Ok(out)
}

/// Hamming cost between two graphs from [`wl_string_labels`].
pub fn wl_reference_cost(a: &Graph, b: &Graph, h: usize) -> Result<Array2<f64>> {
    let la = wl_string_labels(a, h)?;
    let lb = wl_string_labels(b, h)?;
    Ok(Array2::from_shape_fn((la.len(), lb.len()), |(i, j)| {
        la[i].iter().zip(&lb[j]).filter(|(x, y)| x != y).count() as f64
    }))
}

/// Tiny random space on the line: structure `|x_i − x_j|`, scalar features,
/// masses in `{1,…,max_units}·step`.
pub fn random_line_space(rng: &mut ChaCha8Rng, n: usize, step: f64, max_units: u32) -> MmSpace {
    let pos: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let structure = Array2::from_shape_fn((n, n), |(i, j)| (pos[i] - pos[j]).abs());
    let mass = Array1::from_shape_fn(n, |_| rng.gen_range(1..=max_units) as f64 * step);
    let feats = Array2::from_shape_fn((n, 1), |_| rng.gen_range(-1.0..1.0));
    MmSpace::new(structure, mass)
        .and_then(|s| s.with_features(Features::Real(feats)))
        .expect("line spaces satisfy the space invariants")
}

/// `|f_i − g_j|^q` between scalar features.
pub fn powered_feature_cost(a: &MmSpace, b: &MmSpace, q: f64) -> Array2<f64> {
    let fa = a.features().and_then(Features::as_real).expect("real features");
    let fb = b.features().and_then(Features::as_real).expect("real features");
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        fa.row(i).iter().zip(fb.row(j).iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt().powf(q)
    })
}

/// Space with points permuted by `perm` (new point `k` is old point `perm[k]`).
pub fn permuted(space: &MmSpace, perm: &[usize]) -> MmSpace {
    let n = space.len();
    let s = Array2::from_shape_fn((n, n), |(i, j)| space.structure()[[perm[i], perm[j]]]);
    let p = Array1::from_shape_fn(n, |i| space.mass()[perm[i]]);
    let out = MmSpace::new(s, p).expect("permutation keeps invariants");
    match space.features() {
        Some(Features::Real(x)) => {
            out.with_features(Features::Real(x.select(ndarray::Axis(0), perm))).expect("permutation keeps invariants")
        }
        Some(Features::Labels(l)) => out
            .with_features(Features::Labels(perm.iter().map(|&k| l[k].clone()).collect()))
            .expect("permutation keeps invariants"),
        None => out,
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: usize,
    /// Human-readable witnesses of failed checks.
    pub violations: Vec<String>,
}

impl SuiteReport {
    fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(witness());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const SUITE_STEP: f64 = 0.25;

fn distance(x: &MmSpace, y: &MmSpace, cfg: &FusedConfig, q: f64) -> Result<GridOptimum> {
    let c = powered_feature_cost(x, y, q);
    grid_global_min(x, y, c.view(), cfg, GridSpec::with_step(SUITE_STEP))
}

fn loss_for(q: u32) -> Result<Loss> {
    match q {
        1 => Ok(Loss::AbsoluteDifference),
        2 => Ok(Loss::SquaredDifference),
        _ => Err(Error::InvalidParameter(format!("metric suite supports q ∈ {{1,2}}, got {q}"))),
    }
}

/// Nonnegativity, symmetry, isometric-copy and `2^{q−1}`-relaxed triangle
/// checks on FPGW grid optima with `C = |f − g|^q`, `L = |a − b|^q`.
pub fn metric_property_suite(seed: u64, trials: usize, q: u32) -> Result<SuiteReport> {
    let loss = loss_for(q)?;
    let qf = q as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::default();
    for t in 0..trials {
        let sizes = loop {
            let s: [usize; 3] = [rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3)];
            if s[0] * s[1] <= 6 && s[0] * s[2] <= 6 && s[1] * s[2] <= 6 {
                break s;
            }
        };
        let x = random_line_space(&mut rng, sizes[0], SUITE_STEP, 2);
        let y = random_line_space(&mut rng, sizes[1], SUITE_STEP, 2);
        let z = random_line_space(&mut rng, sizes[2], SUITE_STEP, 2);
        let omega2 = rng.gen_range(0.2..0.8);
        let cfg = FusedConfig::new(omega2).with_lambda(rng.gen_range(0.1..1.5)).with_loss(loss);

        let xy = distance(&x, &y, &cfg, qf)?;
        let yx = distance(&y, &x, &cfg, qf)?;
        let xz = distance(&x, &z, &cfg, qf)?;
        let zy = distance(&z, &y, &cfg, qf)?;
        let gap = xy.certified_gap.max(yx.certified_gap).max(xz.certified_gap).max(zy.certified_gap);
        report.check(xy.objective >= -xy.certified_gap, || {
            format!("trial {t}: d(X,Y) = {} below -gap {}", xy.objective, xy.certified_gap)
        });
        report.check((xy.objective - yx.objective).abs() <= 2.0 * gap, || {
            format!("trial {t}: d(X,Y) = {} vs d(Y,X) = {}", xy.objective, yx.objective)
        });
        let relax = 2f64.powi(q as i32 - 1);
        report.check(xy.objective <= relax * (xz.objective + zy.objective) + 4.0 * gap, || {
            format!(
                "trial {t}: d(X,Y) = {} > {relax}·({} + {}) + 4·{gap}; sizes {sizes:?}, cfg {cfg:?}",
                xy.objective, xz.objective, zy.objective
            )
        });

        // Self-pairs need |X|² ≤ 6, so the copy is taken of the largest space with at most 2 points.
        let base = [&x, &y, &z]
            .into_iter()
            .filter(|s| s.len() <= 2)
            .max_by_key(|s| s.len())
            .expect("two 3-point spaces never share a trial");
        let mut perm: Vec<usize> = (0..base.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let copy = permuted(base, &perm);
        let iso = distance(base, &copy, &cfg, qf)?;
        report.check(iso.objective <= iso.certified_gap, || {
            format!("trial {t}: isometric copy at distance {} > gap {}", iso.objective, iso.certified_gap)
        });
    }
    Ok(report)
}

/// Grid-level checks of the FPGW/FMPGW/FGW relations:
/// (a) the FPGW optimum's transport part equals the FMPGW optimum at the same mass;
/// (b) with balanced masses and `2λ` above the saturation threshold the FPGW
///     optimum moves all mass and equals the balanced FMPGW value.
pub fn equivalence_suite(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::default();
    for t in 0..trials {
        let (n, m) = [(1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (1, 3)][rng.gen_range(0..6)];
        let x = random_line_space(&mut rng, n, SUITE_STEP, 3);
        let y = random_line_space(&mut rng, m, SUITE_STEP, 3);
        let c = powered_feature_cost(&x, &y, 2.0);
        let cfg = FusedConfig::new(rng.gen_range(0.2..0.8)).with_lambda(rng.gen_range(0.05..1.0));

        // (a)
        let fpgw = grid_global_min(&x, &y, c.view(), &cfg, GridSpec::with_step(SUITE_STEP))?;
        let rho = fpgw.plan.total_mass();
        let mc = grid_global_min(&x, &y, c.view(), &cfg.with_rho(rho), GridSpec::with_step(SUITE_STEP))?;
        let (pm, qm) = (x.total_mass(), y.total_mass());
        let transport = fpgw.objective - cfg.lambda * (pm * pm + qm * qm - 2.0 * rho * rho);
        let gap = fpgw.certified_gap.max(mc.certified_gap);
        report.check((transport - mc.objective).abs() <= 2.0 * gap, || {
            format!("trial {t}: FPGW transport part {transport} vs FMPGW {} at rho {rho}", mc.objective)
        });

        // (b) balanced copy of the masses of y onto x's support size
        let total_units = rng.gen_range(n.max(m)..=(2 * n.min(m)).max(n.max(m))) as f64;
        let xb = rebalance(&x, total_units * SUITE_STEP, &mut rng);
        let yb = rebalance(&y, total_units * SUITE_STEP, &mut rng);
        let cb = powered_feature_cost(&xb, &yb, 2.0);
        let full = xb.total_mass().min(yb.total_mass());
        let cmax = cb.iter().fold(0.0f64, |a, &v| a.max(v));
        let lmax = crate::contraction::max_loss(cfg.loss, xb.structure().view(), yb.structure().view());
        let threshold = 0.5 * (cfg.omega1 * cmax / full + cfg.omega2 * lmax);
        let strong = cfg.with_lambda(threshold + 1.0);
        let sat = grid_global_min(&xb, &yb, cb.view(), &strong, GridSpec::with_step(SUITE_STEP))?;
        report.check((sat.plan.total_mass() - full).abs() <= SUITE_STEP, || {
            format!("trial {t}: saturated mass {} vs {full}", sat.plan.total_mass())
        });
        let fgw = grid_global_min(&xb, &yb, cb.view(), &strong.with_rho(full), GridSpec::with_step(SUITE_STEP))?;
        let mass = sat.plan.total_mass();
        let (pb, qb) = (xb.total_mass(), yb.total_mass());
        let sat_transport = sat.objective - strong.lambda * (pb * pb + qb * qb - 2.0 * mass * mass);
        let gap = sat.certified_gap.max(fgw.certified_gap);
        report.check((sat_transport - fgw.objective).abs() <= 2.0 * gap, || {
            format!("trial {t}: saturated FPGW {sat_transport} vs balanced FGW {}", fgw.objective)
        });
    }
    Ok(report)
}

/// Same space with masses redrawn as positive multiples of the suite step summing to `total`.
fn rebalance(space: &MmSpace, total: f64, rng: &mut ChaCha8Rng) -> MmSpace {
    let n = space.len();
    let units = (total / SUITE_STEP).round() as usize;
    let mut counts = vec![1usize; n];
    for _ in n..units {
        counts[rng.gen_range(0..n)] += 1;
    }
    let mass = Array1::from_shape_fn(n, |i| counts[i] as f64 * SUITE_STEP);
    let out = MmSpace::new(space.structure().clone(), mass).expect("same structure");
    match space.features() {
        Some(f) => out.with_features(f.clone()).expect("same size"),
        None => out,
    }
}

/// Random planar instance: `n`/`m` points in the unit square with Euclidean
/// structure, unequal random masses (totals in roughly `[0.5, 1.5]`), and a
/// squared-Euclidean cost between random 2-d features.
pub fn random_instance(seed: u64, n: usize, m: usize) -> (MmSpace, MmSpace, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut space = |k: usize| {
        let pts = Array2::<f64>::from_shape_fn((k, 2), |_| rng.gen_range(0.0..1.0));
        let structure = Array2::from_shape_fn((k, k), |(i, j)| {
            ((pts[[i, 0]] - pts[[j, 0]]).powi(2) + (pts[[i, 1]] - pts[[j, 1]]).powi(2)).sqrt()
        });
        let total = rng.gen_range(0.5..1.5);
        let raw = Array1::from_shape_fn(k, |_| rng.gen_range(0.2..1.0));
        let mass = &raw * (total / raw.sum());
        let feats = Array2::from_shape_fn((k, 2), |_| rng.gen_range(0.0..1.0));
        MmSpace::new(structure, mass)
            .and_then(|s| s.with_features(Features::Real(feats)))
            .expect("random planar spaces satisfy the space invariants")
    };
    let x = space(n);
    let y = space(m);
    let fx = x.features().and_then(Features::as_real).expect("real features");
    let fy = y.features().and_then(Features::as_real).expect("real features");
    let c = Array2::from_shape_fn((n, m), |(i, j)| {
        fx.row(i).iter().zip(fy.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    });
    (x, y, c)
}
