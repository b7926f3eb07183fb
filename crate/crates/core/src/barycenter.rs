//! FMPGW / FPGW barycenters by block-coordinate descent: Frank-Wolfe plan
//! updates (warm-started from the previous plans) alternate with the closed-form
//! structure and feature minimizers for squared loss and squared-Euclidean
//! feature cost. Both blocks are exact descent steps, so the outer objective
//! never increases.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::contraction::Loss;
use crate::fw::{solve_fw_fmpgw, solve_fw_fpgw, FwOptions};
use crate::graphio::{real_feature_cost, structure_matrix, FeatureMetric, Graph, StructureKind};
use crate::model::transport_cost;
use crate::{Error, Features, FusedConfig, MmSpace, Result, TransportPlan};

#[derive(Debug, Clone)]
pub struct BarycenterProblem {
    /// Input spaces, each with real features of a common dimension.
    pub inputs: Vec<MmSpace>,
    /// Nonnegative weights summing to 1.
    pub weights: Vec<f64>,
    /// Barycenter masses; the support size is `mass.len()`.
    pub mass: Array1<f64>,
    /// Per-input parameters: `rho` for FMPGW, `lambda` for FPGW, plus `ω1`, `ω2`.
    pub configs: Vec<FusedConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycenterOptions {
    pub outer_iters: usize,
    /// Stop once the outer objective decreases by less than this.
    pub min_decrease: f64,
    pub fw: FwOptions,
}

impl Default for BarycenterOptions {
    fn default() -> Self {
        Self { outer_iters: 50, min_decrease: 1e-7, fw: FwOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult {
    pub structure: Array2<f64>,
    pub features: Array2<f64>,
    pub plans: Vec<TransportPlan>,
    /// `Σ β_k·objective_k` after each structure/feature update.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

impl BarycenterProblem {
    fn validate(&self) -> Result<usize> {
        let k = self.inputs.len();
        if k == 0 {
            return Err(Error::InvalidParameter("barycenter needs at least one input".into()));
        }
        if self.weights.len() != k || self.configs.len() != k {
            return Err(Error::Shape(format!(
                "{k} inputs, {} weights, {} configs",
                self.weights.len(),
                self.configs.len()
            )));
        }
        if self.weights.iter().any(|&b| !(b >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("weights must be nonnegative and sum to 1".into()));
        }
        let mut dim = None;
        for (idx, s) in self.inputs.iter().enumerate() {
            let x = input_features(s, idx)?;
            if *dim.get_or_insert(x.ncols()) != x.ncols() {
                return Err(Error::Shape(format!("input {idx} has feature dimension {}", x.ncols())));
            }
        }
        for cfg in &self.configs {
            cfg.validate()?;
            if cfg.loss != Loss::SquaredDifference {
                return Err(Error::UnsupportedLoss("barycenter updates need squared loss".into()));
            }
        }
        Ok(dim.expect("at least one input"))
    }
}

fn input_features(s: &MmSpace, idx: usize) -> Result<&Array2<f64>> {
    s.features()
        .and_then(Features::as_real)
        .ok_or_else(|| Error::InvalidParameter(format!("input {idx} needs real features")))
}

/// Row `i` is `Σ_j γ[i,j]·Xk[j] / γ1[i]`, or `fallback` row `i` when `γ1[i] = 0`.
pub fn barycentric_projection(
    plan: &TransportPlan,
    xk: ArrayView2<f64>,
    fallback: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let (n, nk) = plan.dim();
    if xk.nrows() != nk || fallback.nrows() != n || fallback.ncols() != xk.ncols() {
        return Err(Error::Shape(format!(
            "plan {:?}, input features {:?}, fallback {:?}",
            plan.dim(),
            xk.dim(),
            fallback.dim()
        )));
    }
    let mut out = plan.entries().dot(&xk);
    for (i, (mut row, mass)) in out.rows_mut().into_iter().zip(plan.row_sums()).enumerate() {
        if mass > 0.0 {
            row.mapv_inplace(|v| v / mass);
        } else {
            row.assign(&fallback.row(i));
        }
    }
    Ok(out)
}

/// `x_i = Σ_k w_k·γ1^k[i]·x̂_i^k / Σ_k w_k·γ1^k[i]`; rows with a zero
/// denominator keep `previous`.
pub fn update_features(
    projections: &[Array2<f64>],
    row_masses: &[Array1<f64>],
    weights: &[f64],
    previous: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    if projections.len() != row_masses.len() || projections.len() != weights.len() {
        return Err(Error::Shape("projections, row masses and weights differ in length".into()));
    }
    let (n, d) = previous.dim();
    let mut num = Array2::<f64>::zeros((n, d));
    let mut den = Array1::<f64>::zeros(n);
    for ((proj, mass), &w) in projections.iter().zip(row_masses).zip(weights) {
        if proj.dim() != (n, d) || mass.len() != n {
            return Err(Error::Shape(format!(
                "projection {:?} or row masses {} vs ({n}, {d})",
                proj.dim(),
                mass.len()
            )));
        }
        for i in 0..n {
            let a = w * mass[i];
            den[i] += a;
            num.row_mut(i).scaled_add(a, &proj.row(i));
        }
    }
    for i in 0..n {
        if den[i] > 0.0 {
            let s = den[i];
            num.row_mut(i).mapv_inplace(|v| v / s);
        } else {
            num.row_mut(i).assign(&previous.row(i));
        }
    }
    Ok(num)
}

/// `C = Σ_k w_k·γ^k C^k (γ^k)ᵀ ⊘ Σ_k w_k·γ1^k (γ1^k)ᵀ` with `0/0 = 0`, symmetrized.
pub fn update_structure(
    plans: &[TransportPlan],
    ck: &[Array2<f64>],
    weights: &[f64],
    loss: Loss,
) -> Result<Array2<f64>> {
    if loss != Loss::SquaredDifference {
        return Err(Error::UnsupportedLoss("closed-form structure update exists for squared loss only".into()));
    }
    if plans.is_empty() || plans.len() != ck.len() || plans.len() != weights.len() {
        return Err(Error::Shape("plans, structures and weights differ in length".into()));
    }
    let n = plans[0].dim().0;
    let mut num = Array2::<f64>::zeros((n, n));
    let mut den = Array2::<f64>::zeros((n, n));
    for ((plan, c), &w) in plans.iter().zip(ck).zip(weights) {
        let (rows, nk) = plan.dim();
        if rows != n || c.dim() != (nk, nk) {
            return Err(Error::Shape(format!("plan {:?} with structure {:?}", plan.dim(), c.dim())));
        }
        let g = plan.entries();
        num.scaled_add(w, &g.dot(c).dot(&g.t()));
        let r = plan.row_sums();
        let outer = r.view().insert_axis(Axis(1)).dot(&r.view().insert_axis(Axis(0)));
        den.scaled_add(w, &outer);
    }
    let c = Array2::from_shape_fn((n, n), |(i, j)| if den[[i, j]] > 0.0 { num[[i, j]] / den[[i, j]] } else { 0.0 });
    Ok((&c + &c.t()) * 0.5)
}

/// Random connected graph on `n` nodes (random tree plus extra edges with
/// probability `2/n`) as a shortest-path matrix, and standard-normal features.
pub fn random_init(n: usize, dim: usize, seed: u64) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let extra = if n > 0 { 2.0 / n as f64 } else { 0.0 };
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(extra.min(1.0)) {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::new(n, edges)?;
    let c = structure_matrix(&g, StructureKind::ShortestPath, None);
    let x = Array2::from_shape_fn((n, dim), |_| rng.sample::<f64, _>(StandardNormal));
    Ok((c, x))
}

#[derive(Clone, Copy)]
enum Kind {
    Fmpgw,
    Fpgw,
}

fn barycenter_space(c: &Array2<f64>, x: &Array2<f64>, mass: &Array1<f64>) -> Result<MmSpace> {
    MmSpace::with_free_diagonal(c.clone(), mass.clone())?.with_features(Features::Real(x.clone()))
}

fn input_objective(
    bary: &MmSpace,
    input: &MmSpace,
    cost: &Array2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
    kind: Kind,
) -> Result<f64> {
    let base = transport_cost(bary, input, cost.view(), plan.view(), cfg)?;
    Ok(match kind {
        Kind::Fmpgw => base,
        Kind::Fpgw => {
            let (a, b, g) = (bary.total_mass(), input.total_mass(), plan.total_mass());
            base + cfg.lambda * (a * a + b * b - 2.0 * g * g)
        }
    })
}

fn solve(
    prob: &BarycenterProblem,
    init: (Array2<f64>, Array2<f64>),
    init_plans: Option<Vec<TransportPlan>>,
    opts: BarycenterOptions,
    kind: Kind,
) -> Result<BarycenterResult> {
    let dim = prob.validate()?;
    let n = prob.mass.len();
    let (mut c, mut x) = init;
    if c.dim() != (n, n) || x.dim() != (n, dim) {
        return Err(Error::Shape(format!(
            "init structure {:?} / features {:?} for support {n}, dim {dim}",
            c.dim(),
            x.dim()
        )));
    }
    let mut plans = match init_plans {
        Some(p) => {
            if p.len() != prob.inputs.len() {
                return Err(Error::Shape(format!("{} initial plans for {} inputs", p.len(), prob.inputs.len())));
            }
            p
        }
        None => prob
            .inputs
            .iter()
            .zip(&prob.configs)
            .map(|(input, cfg)| match kind {
                Kind::Fmpgw => {
                    Ok(TransportPlan::product_with_mass(prob.mass.view(), input.mass().view(), cfg.require_rho()?))
                }
                Kind::Fpgw => Ok(TransportPlan::product(prob.mass.view(), input.mass().view())),
            })
            .collect::<Result<_>>()?,
    };
    let structure_weights: Vec<f64> = prob.weights.iter().zip(&prob.configs).map(|(b, c)| b * c.omega2).collect();
    let feature_weights: Vec<f64> = prob.weights.iter().zip(&prob.configs).map(|(b, c)| b * c.omega1).collect();
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    while iterations < opts.outer_iters {
        // Step 1: plans for fixed (C, X).
        let bary = barycenter_space(&c, &x, &prob.mass)?;
        plans = prob
            .inputs
            .par_iter()
            .zip(prob.configs.par_iter())
            .zip(plans.into_par_iter())
            .enumerate()
            .map(|(idx, ((input, cfg), warm))| {
                let cost =
                    real_feature_cost(x.view(), input_features(input, idx)?.view(), FeatureMetric::SquaredEuclidean)?;
                let report = match kind {
                    Kind::Fmpgw => solve_fw_fmpgw(&bary, input, cost.view(), cfg, &warm, opts.fw)?,
                    Kind::Fpgw => solve_fw_fpgw(&bary, input, cost.view(), cfg, &warm, opts.fw)?,
                };
                Ok(report.plan)
            })
            .collect::<Result<Vec<_>>>()?;

        // Step 2: (C, X) for fixed plans.
        let ck: Vec<Array2<f64>> = prob.inputs.iter().map(|s| s.structure().clone()).collect();
        c = update_structure(&plans, &ck, &structure_weights, Loss::SquaredDifference)?;
        let mut projections = Vec::with_capacity(plans.len());
        for (idx, (plan, input)) in plans.iter().zip(&prob.inputs).enumerate() {
            projections.push(barycentric_projection(plan, input_features(input, idx)?.view(), x.view())?);
        }
        let row_masses: Vec<Array1<f64>> = plans.iter().map(TransportPlan::row_sums).collect();
        x = update_features(&projections, &row_masses, &feature_weights, x.view())?;
        iterations += 1;

        let bary = barycenter_space(&c, &x, &prob.mass)?;
        let mut total = 0.0;
        for (idx, ((input, cfg), plan)) in prob.inputs.iter().zip(&prob.configs).zip(&plans).enumerate() {
            let cost =
                real_feature_cost(x.view(), input_features(input, idx)?.view(), FeatureMetric::SquaredEuclidean)?;
            total += prob.weights[idx] * input_objective(&bary, input, &cost, plan, cfg, kind)?;
        }
        let done = trace.last().is_some_and(|&prev| prev - total < opts.min_decrease);
        trace.push(total);
        if done {
            break;
        }
    }
    Ok(BarycenterResult { structure: c, features: x, plans, trace, iterations })
}

/// FMPGW barycenter; every input config needs `rho`.
pub fn solve_barycenter_fmpgw(
    prob: &BarycenterProblem,
    init: (Array2<f64>, Array2<f64>),
    init_plans: Option<Vec<TransportPlan>>,
    opts: BarycenterOptions,
) -> Result<BarycenterResult> {
    solve(prob, init, init_plans, opts, Kind::Fmpgw)
}

/// FPGW barycenter with per-input `lambda`.
pub fn solve_barycenter_fpgw(
    prob: &BarycenterProblem,
    init: (Array2<f64>, Array2<f64>),
    init_plans: Option<Vec<TransportPlan>>,
    opts: BarycenterOptions,
) -> Result<BarycenterResult> {
    solve(prob, init, init_plans, opts, Kind::Fpgw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphio::{sbm, to_mm_space, MassMode, SbmFeatures, SbmSpec};
    use ndarray::array;

    fn permutation_plan(perm: &[usize], mass: &Array1<f64>) -> TransportPlan {
        // barycenter point i ↔ input point perm[i]
        let n = perm.len();
        TransportPlan::new(Array2::from_shape_fn((n, n), |(i, j)| if perm[i] == j { mass[j] } else { 0.0 })).unwrap()
    }

    fn sbm_input(seed: u64, n: usize) -> MmSpace {
        let spec = SbmSpec {
            sizes: vec![n / 2, n - n / 2],
            p_in: 0.9,
            p_out: 0.2,
            features: SbmFeatures::Community { dim: 2, low: 0.0, high: 1.0, noise: 0.05 },
        };
        to_mm_space(&sbm(&spec, seed).unwrap(), StructureKind::ShortestPath, &MassMode::UniformAll).unwrap()
    }

    #[test]
    fn projection_examples() {
        let xk = array![[1.0, 0.0], [0.0, 2.0]];
        let fallback = array![[9.0, 9.0], [8.0, 8.0]];
        let id = TransportPlan::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert_eq!(barycentric_projection(&id, xk.view(), fallback.view()).unwrap(), xk);
        let zero = TransportPlan::zeros(2, 2);
        assert_eq!(barycentric_projection(&zero, xk.view(), fallback.view()).unwrap(), fallback);
        let plan = TransportPlan::new(array![[0.1, 0.3], [0.0, 0.0], [0.2, 0.2]]).unwrap();
        let fb = array![[0.0, 0.0], [5.0, 5.0], [0.0, 0.0]];
        let out = barycentric_projection(&plan, xk.view(), fb.view()).unwrap();
        assert!((out[[0, 0]] - 0.25).abs() < 1e-15 && (out[[0, 1]] - 1.5).abs() < 1e-15);
        assert_eq!(out.row(1).to_vec(), vec![5.0, 5.0]);
        assert!((out[[2, 0]] - 0.5).abs() < 1e-15 && (out[[2, 1]] - 1.0).abs() < 1e-15);
        assert!(barycentric_projection(&plan, xk.view(), fallback.view()).is_err());
    }

    #[test]
    fn feature_update_examples() {
        let prev = array![[0.0, 0.0], [7.0, 7.0]];
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[3.0, 0.0], [1.0, 0.0]];
        let one = update_features(std::slice::from_ref(&a), &[array![0.5, 0.5]], &[1.0], prev.view()).unwrap();
        assert_eq!(one, a);
        let mean =
            update_features(&[a.clone(), b.clone()], &[array![0.5, 0.5], array![0.5, 0.5]], &[0.5, 0.5], prev.view())
                .unwrap();
        assert_eq!(mean, (&a + &b) * 0.5);
        let keep = update_features(&[a], &[array![0.5, 0.0]], &[1.0], prev.view()).unwrap();
        assert_eq!(keep.row(1).to_vec(), vec![7.0, 7.0]);
    }

    #[test]
    fn feature_update_minimizes_the_row_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let projections: Vec<Array2<f64>> =
            (0..3).map(|_| Array2::from_shape_fn((4, 2), |_| rng.gen_range(-1.0..1.0))).collect();
        let masses: Vec<Array1<f64>> = (0..3).map(|_| Array1::from_shape_fn(4, |_| rng.gen_range(0.0..1.0))).collect();
        let w = [0.2, 0.5, 0.3];
        let x = update_features(&projections, &masses, &w, Array2::zeros((4, 2)).view()).unwrap();
        let value = |i: usize, row: &Array1<f64>| -> f64 {
            (0..3).map(|k| w[k] * masses[k][i] * (row - &projections[k].row(i)).mapv(|v| v * v).sum()).sum()
        };
        for i in 0..4 {
            let best = value(i, &x.row(i).to_owned());
            for _ in 0..50 {
                let delta = Array1::from_shape_fn(2, |_| rng.gen_range(-0.1..0.1));
                assert!(best <= value(i, &(&x.row(i) + &delta)) + 1e-15);
            }
        }
    }

    #[test]
    fn structure_update_examples() {
        let c1 = array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]];
        let mass = array![1.0, 1.0, 1.0] / 3.0;
        let perm = [2, 0, 1];
        let plan = permutation_plan(&perm, &mass);
        let c =
            update_structure(std::slice::from_ref(&plan), std::slice::from_ref(&c1), &[1.0], Loss::SquaredDifference)
                .unwrap();
        let expect = Array2::from_shape_fn((3, 3), |(i, j)| c1[[perm[i], perm[j]]]);
        assert!((&c - &expect).iter().all(|v| v.abs() < 1e-15));
        let zero =
            update_structure(std::slice::from_ref(&plan), &[Array2::zeros((3, 3))], &[1.0], Loss::SquaredDifference)
                .unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(matches!(
            update_structure(&[plan], &[c1], &[1.0], Loss::AbsoluteDifference),
            Err(Error::UnsupportedLoss(_))
        ));
    }

    #[test]
    fn structure_update_is_a_local_minimum() {
        let a = sbm_input(1, 5);
        let b = sbm_input(2, 4);
        let mass = Array1::from_elem(4, 0.25);
        let pa = TransportPlan::product_with_mass(mass.view(), a.mass().view(), 0.8);
        let pb = TransportPlan::product_with_mass(mass.view(), b.mass().view(), 0.8);
        let ck = [a.structure().clone(), b.structure().clone()];
        let w = [0.4, 0.6];
        let c = update_structure(&[pa.clone(), pb.clone()], &ck, &w, Loss::SquaredDifference).unwrap();
        let value = |c: &Array2<f64>| -> f64 {
            let bary = MmSpace::with_free_diagonal(c.clone(), mass.clone()).unwrap();
            let cfg = FusedConfig::new(1.0);
            w[0] * transport_cost(&bary, &a, Array2::zeros((4, 5)).view(), pa.view(), &cfg).unwrap()
                + w[1] * transport_cost(&bary, &b, Array2::zeros((4, 4)).view(), pb.view(), &cfg).unwrap()
        };
        let best = value(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-0.05..0.05));
            let sym = (&d + &d.t()) * 0.5;
            assert!(best <= value(&(&c + &sym)) + 1e-12);
        }
    }

    #[test]
    fn single_input_fixed_point() {
        let input = sbm_input(4, 6);
        let perm = [3, 1, 5, 0, 2, 4];
        let c0 = Array2::from_shape_fn((6, 6), |(i, j)| input.structure()[[perm[i], perm[j]]]);
        let xin = input.features().and_then(Features::as_real).unwrap();
        let x0 = xin.select(Axis(0), &perm);
        let mass = input.mass().clone();
        let rho = mass.sum();
        let prob = BarycenterProblem {
            inputs: vec![input.clone()],
            weights: vec![1.0],
            mass: mass.clone(),
            configs: vec![FusedConfig::new(0.5).with_rho(rho)],
        };
        let plans = vec![permutation_plan(&perm, &mass)];
        let r =
            solve_barycenter_fmpgw(&prob, (c0.clone(), x0.clone()), Some(plans.clone()), BarycenterOptions::default())
                .unwrap();
        assert!(*r.trace.last().unwrap() <= 1e-6, "{:?}", r.trace);

        let twin = BarycenterProblem {
            inputs: vec![input.clone(), input],
            weights: vec![0.5, 0.5],
            mass,
            configs: vec![FusedConfig::new(0.5).with_rho(rho); 2],
        };
        let both = vec![plans[0].clone(), plans[0].clone()];
        let r = solve_barycenter_fmpgw(&twin, (c0, x0), Some(both), BarycenterOptions::default()).unwrap();
        assert!(*r.trace.last().unwrap() <= 1e-6);
    }

    #[test]
    fn traces_do_not_increase() {
        let inputs: Vec<MmSpace> = (0..3).map(|s| sbm_input(10 + s, 6)).collect();
        let mass = Array1::from_elem(5, 0.2);
        let init = random_init(5, 2, 7).unwrap();
        let opts = BarycenterOptions { outer_iters: 10, min_decrease: 0.0, ..BarycenterOptions::default() };
        let fm = BarycenterProblem {
            inputs: inputs.clone(),
            weights: vec![0.3, 0.3, 0.4],
            mass: mass.clone(),
            configs: vec![FusedConfig::new(0.5).with_rho(0.8); 3],
        };
        let r = solve_barycenter_fmpgw(&fm, init.clone(), None, opts).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{:?}", r.trace);
        let fp = BarycenterProblem { configs: vec![FusedConfig::new(0.5).with_lambda(0.5); 3], ..fm };
        let r = solve_barycenter_fpgw(&fp, init, None, opts).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + 1e-8), "{:?}", r.trace);
    }

    #[test]
    fn permuting_the_init_permutes_the_output() {
        let inputs: Vec<MmSpace> = (0..2).map(|s| sbm_input(20 + s, 5)).collect();
        let mass = Array1::from_elem(4, 0.25);
        let (c, x) = random_init(4, 2, 1).unwrap();
        let perm = [2, 0, 3, 1];
        let cp = Array2::from_shape_fn((4, 4), |(i, j)| c[[perm[i], perm[j]]]);
        let xp = x.select(Axis(0), &perm);
        let prob = BarycenterProblem {
            inputs,
            weights: vec![0.5, 0.5],
            mass,
            configs: vec![FusedConfig::new(0.5).with_rho(0.9); 2],
        };
        let opts = BarycenterOptions { outer_iters: 3, ..BarycenterOptions::default() };
        let a = solve_barycenter_fmpgw(&prob, (c, x), None, opts).unwrap();
        let b = solve_barycenter_fmpgw(&prob, (cp, xp), None, opts).unwrap();
        let ap = Array2::from_shape_fn((4, 4), |(i, j)| a.structure[[perm[i], perm[j]]]);
        assert!((&ap - &b.structure).iter().all(|v| v.abs() < 1e-8));
        assert!((&a.features.select(Axis(0), &perm) - &b.features).iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn random_init_is_connected() {
        let (c, x) = random_init(8, 3, 2).unwrap();
        assert!(c.iter().all(|&v| v < 8.0));
        assert_eq!(x.dim(), (8, 3));
        assert_eq!(random_init(8, 3, 2).unwrap().0, c);
    }

    #[test]
    fn rejects_bad_problems() {
        let input = sbm_input(1, 4);
        let prob = BarycenterProblem {
            inputs: vec![input],
            weights: vec![0.5],
            mass: Array1::from_elem(2, 0.5),
            configs: vec![FusedConfig::new(0.5).with_rho(0.5)],
        };
        assert!(
            solve_barycenter_fmpgw(&prob, random_init(2, 2, 0).unwrap(), None, BarycenterOptions::default()).is_err()
        );
    }
}
