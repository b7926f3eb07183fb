//! Entropic alternating solvers ("sink-FPGW" / "sink-FMPGW").
//!
//! The relaxed problem couples two plans:
//!
//! ```text
//! R(γ,π) = ω1⟨C,(γ+π)/2⟩ + ω2⟨M∘π,γ⟩ + λ(|p|²+|q|²−2|γ||π|) + ε·KL(γ⊗π ‖ (pq)⊗(pq))
//! ```
//!
//! For fixed `π` this is, up to a constant, the entropic partial transport
//! problem with cost `c_π = ½ω1·C + ω2·M∘π + ε·D̄(π‖pq)`, per-unit penalty
//! `λ|π|` and entropic weight `ε|π|`. The Sinkhorn cap `e^{λ/ε}` already
//! encodes the `−2λ|π||γ|` mass reward, so no further cost shift is applied.

use ndarray::{Array2, ArrayView2};

use crate::contraction::contract;
use crate::model::{check_problem, fpgw_value, transport_cost};
use crate::pot::{
    shrink_into, sinkhorn_mass_constrained_warm, sinkhorn_penalty_warm, PotMode, PotProblem, Potentials,
    SinkhornOptions,
};
use crate::{tol, Error, FusedConfig, MmSpace, Result, SolverReport, TraceEntry, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropicOptions {
    pub max_iter: usize,
    /// Stop once `‖π − γ‖_F < tol`.
    pub tol: f64,
    pub inner: SinkhornOptions,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6, inner: SinkhornOptions { max_iter: 2_000, tol: 1e-9 } }
    }
}

/// The two coupled plans of one alternation.
#[derive(Debug, Clone)]
pub struct AlternatingState {
    pub gamma: TransportPlan,
    pub pi: TransportPlan,
    /// `ε·D̄(π‖pq)` as folded into the conditional cost.
    pub kl_scalar: f64,
}

#[derive(Debug, Clone)]
pub struct ConditionalCost {
    pub cost: Array2<f64>,
    /// `ε·D̄(π‖pq)`, added uniformly to every entry of `cost`.
    pub kl_scalar: f64,
}

/// `D̄(π‖pqᵀ) = Σ π·ln(π/(p_i q_j))` over cells with `π > 0`.
pub fn kl_bar(plan: ArrayView2<f64>, source: &MmSpace, target: &MmSpace) -> Result<f64> {
    let (p, q) = (source.mass(), target.mass());
    let mut acc = 0.0;
    for ((i, j), &v) in plan.indexed_iter() {
        if v > 0.0 {
            let base = p[i] * q[j];
            if base <= 0.0 {
                return Err(Error::InvalidPlan(format!("plan puts mass {v} on ({i},{j}) where p·q = 0")));
            }
            acc += v * (v / base).ln();
        }
    }
    Ok(acc)
}

/// `c_π = ½ω1·C + ω2·M∘π + ε·D̄(π‖pq)`.
pub fn conditional_cost(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    pi: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<ConditionalCost> {
    check_problem(source, target, feature_cost, pi.view())?;
    let kl_scalar = cfg.epsilon * kl_bar(pi.view(), source, target)?;
    let mut cost = contract(cfg.loss, source.structure().view(), target.structure().view(), pi.view())?;
    ndarray::Zip::from(&mut cost)
        .and(feature_cost)
        .for_each(|m, &c| *m = 0.5 * cfg.omega1 * c + cfg.omega2 * *m + kl_scalar);
    Ok(ConditionalCost { cost, kl_scalar })
}

/// Full `KL(A‖B) = D̄(A‖B) + |B| − |A|` for `A = γ⊗π`, `B = (pq)⊗(pq)`.
fn kl_tensor(gamma: ArrayView2<f64>, pi: ArrayView2<f64>, source: &MmSpace, target: &MmSpace) -> Result<f64> {
    let (g, h) = (gamma.sum(), pi.sum());
    let base = source.total_mass() * target.total_mass();
    Ok(h * kl_bar(gamma, source, target)? + g * kl_bar(pi, source, target)? + base * base - g * h)
}

/// `R(γ,π)` including the entropic term.
pub fn relaxed_objective(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    gamma: &TransportPlan,
    pi: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<f64> {
    check_problem(source, target, feature_cost, gamma.view())?;
    check_problem(source, target, feature_cost, pi.view())?;
    let mean = (gamma.entries() + pi.entries()) * 0.5;
    let linear: f64 = cfg.omega1 * mean.iter().zip(feature_cost.iter()).map(|(a, b)| a * b).sum::<f64>();
    let mp = contract(cfg.loss, source.structure().view(), target.structure().view(), pi.view())?;
    let quad: f64 = cfg.omega2 * mp.iter().zip(gamma.entries().iter()).map(|(a, b)| a * b).sum::<f64>();
    let (pm, qm) = (source.total_mass(), target.total_mass());
    let penalty = cfg.lambda * (pm * pm + qm * qm - 2.0 * gamma.total_mass() * pi.total_mass());
    Ok(linear + quad + penalty + cfg.epsilon * kl_tensor(gamma.view(), pi.view(), source, target)?)
}

/// Entropic FPGW `FPGW(γ) + ε·KL(γ⊗γ ‖ (pq)⊗(pq))`.
pub fn entropic_objective(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    gamma: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<f64> {
    check_problem(source, target, feature_cost, gamma.view())?;
    let value = fpgw_value(source, target, feature_cost, gamma.view(), cfg)?;
    let g = gamma.total_mass();
    let base = source.total_mass() * target.total_mass();
    let kl = 2.0 * g * kl_bar(gamma.view(), source, target)? + base * base - g * g;
    Ok(value + cfg.epsilon * kl)
}

fn check_epsilon(cfg: &FusedConfig) -> Result<()> {
    if !(cfg.epsilon > 0.0) || !cfg.epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    Ok(())
}

fn distance(a: &TransportPlan, b: &TransportPlan) -> f64 {
    a.entries().iter().zip(b.entries().iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The last two outer iterates. The alternation can settle into a 2-cycle
/// `γ_k ≈ γ_{k−2} ≠ γ_{k−1}` that the `‖π − γ‖` test never detects.
#[derive(Default)]
struct History {
    older: Option<TransportPlan>,
    last: Option<(TransportPlan, f64)>,
}

impl History {
    fn push(&mut self, gamma: &TransportPlan, objective: f64) {
        self.older = self.last.take().map(|(plan, _)| plan);
        self.last = Some((gamma.clone(), objective));
    }

    /// On a cycle, the lower-objective member of the pair `(γ_{k−1}, γ_k)`.
    fn cycle(&self, gamma: &TransportPlan, objective: f64, tol: f64) -> Option<(TransportPlan, f64)> {
        let older = self.older.as_ref()?;
        let (last, value) = self.last.as_ref()?;
        if distance(older, gamma) >= tol {
            return None;
        }
        Some(if *value < objective { (last.clone(), *value) } else { (gamma.clone(), objective) })
    }
}

/// Minimizer over `Γ≤` of the relaxed objective for fixed `pi`.
fn penalty_step(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    pi: &TransportPlan,
    cfg: &FusedConfig,
    inner: SinkhornOptions,
    warm: &mut Option<Potentials>,
) -> Result<TransportPlan> {
    let mass = pi.total_mass();
    let (n, m) = pi.dim();
    if mass <= 0.0 {
        return Ok(TransportPlan::zeros(n, m));
    }
    let cc = conditional_cost(source, target, feature_cost, pi, cfg)?;
    let prob =
        PotProblem::new(cc.cost, source.mass().clone(), target.mass().clone(), PotMode::Penalty(cfg.lambda * mass))?;
    let (plan, pot) = sinkhorn_penalty_warm(&prob, cfg.epsilon * mass, inner, warm.as_ref())?;
    *warm = Some(pot);
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
fn mass_step(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    pi: &TransportPlan,
    cfg: &FusedConfig,
    rho: f64,
    inner: SinkhornOptions,
    warm: &mut Option<Potentials>,
) -> Result<TransportPlan> {
    let cc = conditional_cost(source, target, feature_cost, pi, cfg)?;
    let prob = PotProblem::new(cc.cost, source.mass().clone(), target.mass().clone(), PotMode::MassConstrained(rho))?;
    let (plan, pot) = sinkhorn_mass_constrained_warm(&prob, cfg.epsilon * rho, inner, warm.as_ref())?;
    *warm = Some(pot);
    Ok(plan)
}

/// Alternating Sinkhorn solver for entropic FPGW. The reported objective is
/// the unregularized FPGW value of the final `γ`.
pub fn solve_sink_fpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    init: &TransportPlan,
    opts: EntropicOptions,
) -> Result<SolverReport> {
    cfg.validate()?;
    check_epsilon(cfg)?;
    check_problem(source, target, feature_cost, init.view())?;
    init.check_feasible(source.mass().view(), target.mass().view(), tol::FEASIBILITY)?;
    let mut gamma = init.clone();
    let mut objective = fpgw_value(source, target, feature_cost, gamma.view(), cfg)?;
    let mut trace = vec![TraceEntry { iteration: 0, objective, step: None, gap: None }];
    let mut converged = false;
    let mut iterations = 0;
    let mut history = History::default();
    let mut warm = None;
    while iterations < opts.max_iter {
        history.push(&gamma, objective);
        let pi = gamma;
        gamma = penalty_step(source, target, feature_cost, &pi, cfg, opts.inner, &mut warm)?;
        let pi = penalty_step(source, target, feature_cost, &gamma, cfg, opts.inner, &mut warm)?;
        let (g, h) = (gamma.total_mass(), pi.total_mass());
        if g > 0.0 {
            let mut entries = gamma.into_entries() * (h / g).sqrt();
            shrink_into(&mut entries, source.mass(), target.mass());
            gamma = TransportPlan::new(entries)?;
        }
        iterations += 1;
        objective = fpgw_value(source, target, feature_cost, gamma.view(), cfg)?;
        trace.push(TraceEntry { iteration: iterations, objective, step: None, gap: None });
        // Both plans empty: the alternation has collapsed to the zero plan.
        if distance(&pi, &gamma) < opts.tol || (g == 0.0 && h == 0.0) {
            converged = true;
            break;
        }
        if let Some((plan, value)) = history.cycle(&gamma, objective, opts.tol) {
            (gamma, objective) = (plan, value);
            break;
        }
    }
    Ok(SolverReport { plan: gamma, objective, trace, converged, iterations, gap: None })
}

/// Alternating Sinkhorn solver for entropic FMPGW at `cfg.rho`. The reported
/// objective is the unregularized FMPGW value of the final `γ`.
pub fn solve_sink_fmpgw(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    cfg: &FusedConfig,
    init: &TransportPlan,
    opts: EntropicOptions,
) -> Result<SolverReport> {
    cfg.validate_for(source.mass().view(), target.mass().view())?;
    check_epsilon(cfg)?;
    let rho = cfg.require_rho()?;
    check_problem(source, target, feature_cost, init.view())?;
    init.check_feasible(source.mass().view(), target.mass().view(), tol::FEASIBILITY)?;
    let (n, m) = init.dim();
    if rho == 0.0 {
        let plan = TransportPlan::zeros(n, m);
        let trace = vec![TraceEntry { iteration: 0, objective: 0.0, step: None, gap: None }];
        return Ok(SolverReport { plan, objective: 0.0, trace, converged: true, iterations: 0, gap: None });
    }
    let mut gamma = init.clone();
    let mut objective = transport_cost(source, target, feature_cost, gamma.view(), cfg)?;
    let mut trace = vec![TraceEntry { iteration: 0, objective, step: None, gap: None }];
    let mut converged = false;
    let mut iterations = 0;
    let mut history = History::default();
    let mut warm = None;
    while iterations < opts.max_iter {
        history.push(&gamma, objective);
        let pi = gamma;
        gamma = mass_step(source, target, feature_cost, &pi, cfg, rho, opts.inner, &mut warm)?;
        let pi = mass_step(source, target, feature_cost, &gamma, cfg, rho, opts.inner, &mut warm)?;
        iterations += 1;
        objective = transport_cost(source, target, feature_cost, gamma.view(), cfg)?;
        trace.push(TraceEntry { iteration: iterations, objective, step: None, gap: None });
        if distance(&pi, &gamma) < opts.tol {
            converged = true;
            break;
        }
        if let Some((plan, value)) = history.cycle(&gamma, objective, opts.tol) {
            (gamma, objective) = (plan, value);
            break;
        }
    }
    Ok(SolverReport { plan: gamma, objective, trace, converged, iterations, gap: None })
}

/// Both plans of one full alternation starting from `pi`, for inspection.
pub fn alternation_step(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    pi: &TransportPlan,
    cfg: &FusedConfig,
    inner: SinkhornOptions,
) -> Result<AlternatingState> {
    check_epsilon(cfg)?;
    let mut warm = None;
    let gamma = penalty_step(source, target, feature_cost, pi, cfg, inner, &mut warm)?;
    let pi = penalty_step(source, target, feature_cost, &gamma, cfg, inner, &mut warm)?;
    let kl_scalar = cfg.epsilon * kl_bar(pi.view(), source, target)?;
    Ok(AlternatingState { gamma, pi, kl_scalar })
}
