//! Frank-Wolfe solvers for FPGW (over `Γ≤`) and FMPGW (over `Γ≤^ρ`).
//!
//! Each iteration linearizes the objective at `γ`, solves the linear partial
//! transport problem exactly for a vertex `γ'`, and moves to
//! `γ + α(γ' − γ)` with the exact minimizer `α` of the quadratic
//! `a·α² + b·α` on `[0,1]`.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};

use crate::contraction::{contract, contract_transposed};
use crate::model::check_problem;
use crate::pot::{solve_exact, PotMode, PotProblem};
use crate::{tol, Error, FusedConfig, MmSpace, Result, SolverReport, TraceEntry, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwOptions {
    pub max_iter: usize,
    /// Stop once `‖γ^(k+1) − γ^(k)‖_F < tol`.
    pub tol: f64,
    /// Optionally stop once the Frank-Wolfe gap drops to this value.
    pub gap_tol: Option<f64>,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { max_iter: 1000, tol: 1e-9, gap_tol: None }
    }
}

/// One Frank-Wolfe step: iterate, gradient, linear-minimization vertex, step and gap.
#[derive(Debug, Clone)]
pub struct FwState {
    pub plan: TransportPlan,
    pub gradient: Array2<f64>,
    pub direction: TransportPlan,
    pub step: f64,
    pub gap: f64,
}

fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Quadratic part `⟨M∘γ,γ⟩` with its contractions.
struct Quadratic<'a> {
    source: &'a MmSpace,
    target: &'a MmSpace,
    cfg: &'a FusedConfig,
    symmetric: bool,
}

impl<'a> Quadratic<'a> {
    fn new(source: &'a MmSpace, target: &'a MmSpace, cfg: &'a FusedConfig) -> Self {
        let sym = |c: &Array2<f64>| c == c.t();
        let symmetric = sym(source.structure()) && sym(target.structure());
        Self { source, target, cfg, symmetric }
    }

    fn contract(&self, plan: ArrayView2<f64>) -> Result<Array2<f64>> {
        contract(self.cfg.loss, self.source.structure().view(), self.target.structure().view(), plan)
    }

    /// `M∘γ + Mᵀ∘γ` given `M∘γ`.
    fn symmetrized(&self, mg: &Array2<f64>, plan: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.symmetric {
            Ok(mg * 2.0)
        } else {
            let mt = contract_transposed(
                self.cfg.loss,
                self.source.structure().view(),
                self.target.structure().view(),
                plan,
            )?;
            Ok(mg + &mt)
        }
    }
}

fn assemble_gradient(
    feature_cost: ArrayView2<f64>,
    sym: &Array2<f64>,
    mass: f64,
    lambda: f64,
    cfg: &FusedConfig,
) -> Array2<f64> {
    let shift = 4.0 * lambda * mass;
    let mut g = Array2::zeros(sym.dim());
    Zip::from(&mut g).and(feature_cost).and(sym).for_each(|g, &c, &s| {
        *g = cfg.omega1 * c + cfg.omega2 * s - shift;
    });
    g
}

fn gradient_with_lambda(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
    lambda: f64,
) -> Result<Array2<f64>> {
    check_problem(source, target, feature_cost, plan.view())?;
    let quad = Quadratic::new(source, target, cfg);
    let mg = quad.contract(plan.view())?;
    let sym = quad.symmetrized(&mg, plan.view())?;
    Ok(assemble_gradient(feature_cost, &sym, plan.total_mass(), lambda, cfg))
}

/// `∇FPGW(γ) = ω1·C + ω2·(M∘γ + Mᵀ∘γ) − 4λ|γ|·1`.
pub fn gradient_fpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<Array2<f64>> {
    gradient_with_lambda(source, target, feature_cost, plan, cfg, cfg.lambda)
}

/// `∇FMPGW(γ) = ω1·C + ω2·(M∘γ + Mᵀ∘γ)`.
pub fn gradient_fmpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<Array2<f64>> {
    gradient_with_lambda(source, target, feature_cost, plan, cfg, 0.0)
}

/// Minimizer over `[0,1]` of `a·α² + b·α`; ties between endpoints go to `α = 1`.
pub fn line_search(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::NonFinite(format!("line search coefficients a={a}, b={b}")));
    }
    Ok(if a <= 0.0 {
        if a + b <= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    })
}

fn coeffs(quad: &Quadratic, gradient: ArrayView2<f64>, delta: ArrayView2<f64>, lambda: f64) -> Result<(f64, f64)> {
    let md = quad.contract(delta)?;
    let dm = delta.sum();
    let a = quad.cfg.omega2 * inner(md.view(), delta) - 2.0 * lambda * dm * dm;
    let b = inner(gradient, delta);
    Ok((a, b))
}

fn line_search_coeffs(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    direction: &TransportPlan,
    cfg: &FusedConfig,
    lambda: f64,
) -> Result<(f64, f64)> {
    check_problem(source, target, feature_cost, direction.view())?;
    let g = gradient_with_lambda(source, target, feature_cost, plan, cfg, lambda)?;
    let delta = direction.entries() - plan.entries();
    coeffs(&Quadratic::new(source, target, cfg), g.view(), delta.view(), lambda)
}

/// `(a, b)` with `FPGW(γ + αδ) = FPGW(γ) + b·α + a·α²`, `δ = direction − plan`.
pub fn line_search_coeffs_fpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    direction: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<(f64, f64)> {
    line_search_coeffs(source, target, feature_cost, plan, direction, cfg, cfg.lambda)
}

/// `(a, b)` with `FMPGW(γ + αδ) = FMPGW(γ) + b·α + a·α²`.
pub fn line_search_coeffs_fmpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    direction: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<(f64, f64)> {
    line_search_coeffs(source, target, feature_cost, plan, direction, cfg, 0.0)
}

/// `⟨∇, γ⟩ − min_{γ' feasible} ⟨∇, γ'⟩`.
pub fn fw_gap(
    gradient: ArrayView2<f64>,
    plan: &TransportPlan,
    p: ArrayView1<f64>,
    q: ArrayView1<f64>,
    mode: PotMode,
) -> Result<f64> {
    let prob = PotProblem::new(gradient.to_owned(), p.to_owned(), q.to_owned(), mode)?;
    let vertex = solve_exact(&prob)?;
    Ok(inner(gradient, plan.view()) - inner(gradient, vertex.view()))
}

/// Frank-Wolfe for FPGW; the linear subproblem is `Penalty(0)` on the gradient,
/// whose `−4λ|γ|` shift already carries the mass reward.
pub fn solve_fw_fpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    init: &TransportPlan,
    opts: FwOptions,
) -> Result<SolverReport> {
    cfg.validate()?;
    Solver { source, target, feature_cost: feature_cost.view(), cfg, lambda: cfg.lambda, mode: PotMode::Penalty(0.0) }
        .run(init, opts)
}

/// Frank-Wolfe for FMPGW at `cfg.rho`; every iterate keeps mass `rho`.
pub fn solve_fw_fmpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    init: &TransportPlan,
    opts: FwOptions,
) -> Result<SolverReport> {
    cfg.validate_for(source.mass().view(), target.mass().view())?;
    let rho = cfg.require_rho()?;
    if (init.total_mass() - rho).abs() > tol::MASS_EQ {
        return Err(Error::Constraint(format!("initial plan mass {} differs from rho = {rho}", init.total_mass())));
    }
    Solver { source, target, feature_cost: feature_cost.view(), cfg, lambda: 0.0, mode: PotMode::MassConstrained(rho) }
        .run(init, opts)
}

/// Default FPGW start `p qᵀ / max(|p|,|q|)`.
pub fn default_init(source: &MmSpace, target: &MmSpace) -> TransportPlan {
    TransportPlan::product(source.mass().view(), target.mass().view())
}

/// Default FMPGW start: the product coupling scaled to mass `rho`.
pub fn default_init_with_mass(source: &MmSpace, target: &MmSpace, rho: f64) -> TransportPlan {
    TransportPlan::product_with_mass(source.mass().view(), target.mass().view(), rho)
}

struct Solver<'a> {
    source: &'a MmSpace,
    target: &'a MmSpace,
    feature_cost: ArrayView2<'a, f64>,
    cfg: &'a FusedConfig,
    lambda: f64,
    mode: PotMode,
}

impl Solver<'_> {
    fn objective(&self, plan: ArrayView2<f64>, mg: &Array2<f64>) -> f64 {
        let linear = self.cfg.omega1 * inner(self.feature_cost, plan);
        let quad = self.cfg.omega2 * inner(mg.view(), plan);
        let mass = plan.sum();
        let (pm, qm) = (self.source.total_mass(), self.target.total_mass());
        let penalty = self.lambda * (pm * pm + qm * qm - 2.0 * mass * mass);
        linear + quad + penalty
    }

    fn vertex(&self, gradient: &Array2<f64>) -> Result<TransportPlan> {
        let prob = PotProblem {
            cost: gradient.clone(),
            p: self.source.mass().clone(),
            q: self.target.mass().clone(),
            mode: self.mode,
        };
        solve_exact(&prob)
    }

    fn run(&self, init: &TransportPlan, opts: FwOptions) -> Result<SolverReport> {
        check_problem(self.source, self.target, self.feature_cost, init.view())?;
        init.check_feasible(self.source.mass().view(), self.target.mass().view(), tol::FEASIBILITY)?;
        let quad = Quadratic::new(self.source, self.target, self.cfg);
        let mut plan = init.entries().clone();
        let mut mg = quad.contract(plan.view())?;
        let mut objective = self.objective(plan.view(), &mg);
        let mut trace = vec![TraceEntry { iteration: 0, objective, step: None, gap: None }];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let sym = quad.symmetrized(&mg, plan.view())?;
            let gradient = assemble_gradient(self.feature_cost, &sym, plan.sum(), self.lambda, self.cfg);
            let vertex = self.vertex(&gradient)?;
            let gap = inner(gradient.view(), plan.view()) - inner(gradient.view(), vertex.view());
            if opts.gap_tol.is_some_and(|g| gap <= g) {
                converged = true;
                break;
            }
            let delta = vertex.entries() - &plan;
            let (a, b) = coeffs(&quad, gradient.view(), delta.view(), self.lambda)?;
            let step = line_search(a, b)?;
            Zip::from(&mut plan).and(vertex.entries()).for_each(|g, &v| {
                *g = (1.0 - step) * *g + step * v;
            });
            iterations += 1;
            mg = quad.contract(plan.view())?;
            objective = self.objective(plan.view(), &mg);
            trace.push(TraceEntry { iteration: iterations, objective, step: Some(step), gap: Some(gap) });
            let moved = step * delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            if moved < opts.tol {
                converged = true;
                break;
            }
        }
        let sym = quad.symmetrized(&mg, plan.view())?;
        let gradient = assemble_gradient(self.feature_cost, &sym, plan.sum(), self.lambda, self.cfg);
        let vertex = self.vertex(&gradient)?;
        let gap = inner(gradient.view(), plan.view()) - inner(gradient.view(), vertex.view());
        let plan = TransportPlan::new(plan)?;
        Ok(SolverReport { plan, objective, trace, converged, iterations, gap: Some(gap) })
    }
}

/// Upper bound on `min_{k≤K} g_k` for FPGW after `K` iterations:
/// `max{2·L1, 4ω2·min(|p|,|q|)²·nm·max(max(2Cx²+2Cy²), 2λ)} / √K`, where
/// `L1` bounds the initial suboptimality.
pub fn fpgw_gap_bound(source: &MmSpace, target: &MmSpace, cfg: &FusedConfig, l1: f64, k: usize) -> f64 {
    let mass = source.total_mass().min(target.total_mass());
    let lip = structure_spread(source, target).max(2.0 * cfg.lambda);
    let nm = (source.len() * target.len()) as f64;
    (2.0 * l1).max(4.0 * cfg.omega2 * mass * mass * nm * lip) / (k as f64).sqrt()
}

/// FMPGW analog of [`fpgw_gap_bound`] with `ρ` in place of the mass and no `λ` term.
pub fn fmpgw_gap_bound(source: &MmSpace, target: &MmSpace, cfg: &FusedConfig, l1: f64, k: usize) -> Result<f64> {
    let rho = cfg.require_rho()?;
    let nm = (source.len() * target.len()) as f64;
    let lip = structure_spread(source, target);
    Ok((2.0 * l1).max(4.0 * cfg.omega2 * rho * rho * nm * lip) / (k as f64).sqrt())
}

/// `max_{i,i',j,j'} 2Cx[i,i']² + 2Cy[j,j']²`.
fn structure_spread(source: &MmSpace, target: &MmSpace) -> f64 {
    let sq = |c: &Array2<f64>| c.iter().fold(0.0f64, |a, v| a.max(v * v));
    2.0 * sq(source.structure()) + 2.0 * sq(target.structure())
}

/// Lower bound on the FPGW objective over `Γ≤`, valid when `M ≥ 0`.
pub fn fpgw_lower_bound(source: &MmSpace, target: &MmSpace, feature_cost: ArrayView2<f64>, cfg: &FusedConfig) -> f64 {
    let (pm, qm) = (source.total_mass(), target.total_mass());
    let mass = pm.min(qm);
    let cmin = feature_cost.iter().fold(0.0f64, |a, &v| a.min(v));
    cfg.omega1 * cmin * mass + cfg.lambda * (pm * pm + qm * qm - 2.0 * mass * mass)
}

/// Lower bound on the FMPGW objective over `Γ≤^ρ`, valid when `M ≥ 0`.
pub fn fmpgw_lower_bound(feature_cost: ArrayView2<f64>, cfg: &FusedConfig) -> Result<f64> {
    let rho = cfg.require_rho()?;
    let cmin = feature_cost.iter().fold(0.0f64, |a, &v| a.min(v));
    Ok(cfg.omega1 * cmin * rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fpgw_value;
    use crate::oracle::{finite_diff_gradient, grid_global_min, random_instance, GridSpec};
    use crate::{fmpgw_objective, fpgw_objective};
    use ndarray::array;

    fn feasible_plan(x: &MmSpace, y: &MmSpace, seed: u64) -> TransportPlan {
        // Product coupling with random entrywise shrink stays in Γ≤.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = default_init(x, y);
        TransportPlan::new(base.entries().mapv(|v| v * rng.gen_range(0.1..1.0))).unwrap()
    }

    #[test]
    fn zero_plan_gradient_is_linear_part() {
        let (x, y, c) = random_instance(1, 3, 4);
        let cfg = FusedConfig::new(0.3).with_lambda(2.0);
        let g = gradient_fpgw(&x, &y, c.view(), &TransportPlan::zeros(3, 4), &cfg).unwrap();
        assert_eq!(g, c.mapv(|v| 0.7 * v));
        let g = gradient_fmpgw(&x, &y, c.view(), &TransportPlan::zeros(3, 4), &cfg).unwrap();
        assert_eq!(g, c.mapv(|v| 0.7 * v));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10 {
            let (x, y, c) = random_instance(seed, 3 + seed as usize % 3, 2 + seed as usize % 4);
            let cfg = FusedConfig::new(0.6).with_lambda(0.8);
            let plan = feasible_plan(&x, &y, seed);
            let g = gradient_fpgw(&x, &y, c.view(), &plan, &cfg).unwrap();
            let fd =
                finite_diff_gradient(|p| fpgw_value(&x, &y, c.view(), p.view(), &cfg).unwrap(), plan.entries(), 1e-6)
                    .unwrap();
            assert!((&g - &fd).iter().all(|v| v.abs() < 1e-4), "seed {seed}");
            let g = gradient_fmpgw(&x, &y, c.view(), &plan, &cfg).unwrap();
            let nolambda = cfg.with_lambda(0.0);
            let fd = finite_diff_gradient(
                |p| fpgw_value(&x, &y, c.view(), p.view(), &nolambda).unwrap(),
                plan.entries(),
                1e-6,
            )
            .unwrap();
            assert!((&g - &fd).iter().all(|v| v.abs() < 1e-4), "seed {seed}");
        }
    }

    #[test]
    fn symmetric_gradient_shortcut() {
        let (x, y, c) = random_instance(4, 4, 2);
        let cfg = FusedConfig::new(0.5).with_rho(0.3);
        let plan = feasible_plan(&x, &y, 2);
        let mg = contract(cfg.loss, x.structure().view(), y.structure().view(), plan.view()).unwrap();
        let g = gradient_fmpgw(&x, &y, c.view(), &plan, &cfg).unwrap();
        let expect = c.mapv(|v| 0.5 * v) + mg.mapv(|v| 1.0 * v);
        assert!((&g - &expect).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn line_search_branches() {
        assert_eq!(line_search(-1.0, 0.0).unwrap(), 1.0);
        assert_eq!(line_search(2.0, -2.0).unwrap(), 0.5);
        assert_eq!(line_search(1.0, 5.0).unwrap(), 0.0);
        assert_eq!(line_search(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(line_search(1.0, -5.0).unwrap(), 1.0);
        assert!(line_search(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn line_search_coefficients_reproduce_the_objective() {
        for seed in 0..5 {
            let (x, y, c) = random_instance(seed, 4, 3);
            let cfg = FusedConfig::new(0.4).with_lambda(0.9);
            let plan = feasible_plan(&x, &y, seed);
            let dir = feasible_plan(&x, &y, seed + 100);
            let (a, b) = line_search_coeffs_fpgw(&x, &y, c.view(), &plan, &dir, &cfg).unwrap();
            let f0 = fpgw_objective(&x, &y, c.view(), &plan, &cfg).unwrap();
            for alpha in [0.0, 0.25, 0.5, 1.0] {
                let mix = plan.entries() * (1.0 - alpha) + dir.entries() * alpha;
                let f = fpgw_objective(&x, &y, c.view(), &TransportPlan::new(mix).unwrap(), &cfg).unwrap();
                assert!((f - (f0 + b * alpha + a * alpha * alpha)).abs() < 1e-12, "seed {seed} alpha {alpha}");
            }
            let (a0, b0) = line_search_coeffs_fpgw(&x, &y, c.view(), &plan, &plan, &cfg).unwrap();
            assert_eq!((a0, b0), (0.0, 0.0));
            let linear = FusedConfig::new(0.0).with_lambda(0.0);
            let (a1, _) = line_search_coeffs_fmpgw(&x, &y, c.view(), &plan, &dir, &linear).unwrap();
            assert_eq!(a1, 0.0);
        }
    }

    #[test]
    fn gap_of_linear_argmin_is_zero() {
        let g = array![[1.0, 2.0], [3.0, 0.5]];
        let p = array![1.0, 1.0];
        assert_eq!(
            fw_gap(g.view(), &TransportPlan::zeros(2, 2), p.view(), p.view(), PotMode::Penalty(0.0)).unwrap(),
            0.0
        );
        let g = array![[-1.0, 2.0], [3.0, -0.5]];
        let vertex = TransportPlan::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(fw_gap(g.view(), &vertex, p.view(), p.view(), PotMode::Penalty(0.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let (x, _, _) = random_instance(9, 4, 4);
        let c = Array2::zeros((4, 4));
        let mmax =
            crate::contraction::max_loss(crate::Loss::SquaredDifference, x.structure().view(), x.structure().view());
        let cfg = FusedConfig::new(1.0).with_lambda(0.5 * mmax + 0.1);
        let init = TransportPlan::new(Array2::from_diag(x.mass())).unwrap();
        let r = solve_fw_fpgw(&x, &x, c.view(), &cfg, &init, FwOptions::default()).unwrap();
        assert!(r.objective.abs() < 1e-12);
        assert!(r.converged);
        assert!(r.iterations <= 1);
    }

    #[test]
    fn traces_descend_and_gaps_are_nonnegative() {
        for seed in 0..5 {
            let (x, y, c) = random_instance(seed, 5, 4);
            let cfg = FusedConfig::new(0.5).with_lambda(0.3);
            let r = solve_fw_fpgw(&x, &y, c.view(), &cfg, &default_init(&x, &y), FwOptions::default()).unwrap();
            assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10));
            assert!(r.trace.iter().filter_map(|t| t.gap).all(|g| g >= -1e-9));
            let check = fpgw_objective(&x, &y, c.view(), &r.plan, &cfg).unwrap();
            assert!((check - r.objective).abs() < 1e-10);

            let rho = 0.5 * x.total_mass().min(y.total_mass());
            let mc = cfg.with_rho(rho);
            let r = solve_fw_fmpgw(&x, &y, c.view(), &mc, &default_init_with_mass(&x, &y, rho), FwOptions::default())
                .unwrap();
            assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10));
            assert!((r.plan.total_mass() - rho).abs() < 1e-8);
            let check = fmpgw_objective(&x, &y, c.view(), &r.plan, &mc).unwrap();
            assert!((check - r.objective).abs() < 1e-10);
        }
    }

    #[test]
    fn large_lambda_saturates_mass() {
        let (x, y, c) = random_instance(12, 4, 5);
        let cfg0 = FusedConfig::new(0.5);
        let full = x.total_mass().min(y.total_mass());
        let cmax = c.iter().fold(0.0f64, |a, &v| a.max(v));
        let mmax = crate::contraction::max_loss(cfg0.loss, x.structure().view(), y.structure().view());
        let cfg = cfg0.with_lambda(0.5 * (0.5 * cmax / full + 0.5 * mmax) + 0.1);
        let r = solve_fw_fpgw(&x, &y, c.view(), &cfg, &default_init(&x, &y), FwOptions::default()).unwrap();
        assert!((r.plan.total_mass() - full).abs() < 1e-6, "{}", r.plan.total_mass());
    }

    #[test]
    fn fmpgw_zero_mass_and_bad_init() {
        let (x, y, c) = random_instance(2, 3, 3);
        let cfg = FusedConfig::default().with_rho(0.0);
        let r = solve_fw_fmpgw(&x, &y, c.view(), &cfg, &TransportPlan::zeros(3, 3), FwOptions::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.plan.total_mass(), 0.0);
        let cfg = FusedConfig::default().with_rho(0.2);
        assert!(matches!(
            solve_fw_fmpgw(&x, &y, c.view(), &cfg, &TransportPlan::zeros(3, 3), FwOptions::default()),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn balanced_identical_spaces_with_permutation_init() {
        let (x, _, _) = random_instance(5, 3, 3);
        let cfg = FusedConfig::new(0.5).with_rho(x.total_mass());
        let c = Array2::zeros((3, 3));
        let init = TransportPlan::new(Array2::from_diag(x.mass())).unwrap();
        let r = solve_fw_fmpgw(&x, &x, c.view(), &cfg, &init, FwOptions::default()).unwrap();
        assert!(r.objective.abs() < 1e-12);
    }

    #[test]
    fn small_instances_reach_grid_optimum() {
        let x = MmSpace::new(array![[0.0, 1.0], [1.0, 0.0]], array![0.5, 0.25]).unwrap();
        let y = MmSpace::new(array![[0.0, 2.0], [2.0, 0.0]], array![0.25, 0.5]).unwrap();
        let c = array![[0.1, 0.9], [0.7, 0.2]];
        let cfg = FusedConfig::new(0.5).with_lambda(0.6);
        let grid = grid_global_min(&x, &y, c.view(), &cfg, GridSpec::with_step(1.0 / 16.0)).unwrap();
        let r = solve_fw_fpgw(&x, &y, c.view(), &cfg, &default_init(&x, &y), FwOptions::default()).unwrap();
        assert!(r.objective <= grid.objective + grid.certified_gap);
        let mc = cfg.with_rho(0.25);
        let grid = grid_global_min(&x, &y, c.view(), &mc, GridSpec::with_step(1.0 / 16.0)).unwrap();
        let r =
            solve_fw_fmpgw(&x, &y, c.view(), &mc, &default_init_with_mass(&x, &y, 0.25), FwOptions::default()).unwrap();
        assert!(r.objective <= grid.objective + grid.certified_gap);
    }

    #[test]
    fn gap_bound_holds_after_many_iterations() {
        let (x, y, c) = random_instance(21, 5, 5);
        let cfg = FusedConfig::new(0.5).with_lambda(0.4);
        let init = default_init(&x, &y);
        let opts = FwOptions { max_iter: 400, tol: 0.0, gap_tol: None };
        let r = solve_fw_fpgw(&x, &y, c.view(), &cfg, &init, opts).unwrap();
        let f0 = r.trace[0].objective;
        let l1 = f0 - fpgw_lower_bound(&x, &y, c.view(), &cfg);
        let k = r.iterations.max(1);
        let min_gap = r.trace.iter().filter_map(|t| t.gap).fold(f64::INFINITY, f64::min);
        assert!(min_gap <= fpgw_gap_bound(&x, &y, &cfg, l1, k));
    }
}
