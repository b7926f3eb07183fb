//! Entropic partial transport, regularized by `ε·KL(γ ‖ p qᵀ)`.
//!
//! Both modes run dual block ascent in log domain on potentials `f`, `g` (and a
//! scalar `κ` for the mass constraint), with
//! `γ_ij = p_i q_j e^{(f_i + g_j + κ − c_ij)/ε}`.
//! - Penalty mode: `f, g ≤ λ`; the cap is the dual bound created by the `λ`
//!   mass penalty, so `κ = 0`.
//! - Mass-constrained mode: `f, g ≤ 0` are the multipliers of `γ1 ≤ p`,
//!   `γ2 ≤ q`, and `κ` enforces `|γ| = ρ`. Each block update is the KL projection
//!   onto one constraint set, so this is Dykstra's cycle written on the duals.
//!
//! Kernels far below the `f64` range still transport mass. Cold starts reach the
//! target `ε` by halving from the cost range; warm starts reuse the potentials.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::{into_plan, PotMode, PotProblem};
use crate::{Error, Result, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Total sweeps across all `ε` stages.
    pub max_iter: usize,
    /// Stop when the marginal residual (relative to `max(|p|, 1)`) or the largest
    /// potential change over `ε` falls below this.
    pub tol: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { max_iter: 100_000, tol: 1e-9 }
    }
}

/// Dual potentials of a solve, reusable as a warm start for a nearby problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub kappa: f64,
}

/// `ε · ln Σ_j w_j e^{(g_j + κ − c_j)/ε}` over the entries with positive weight;
/// `−∞` when there are none.
fn soft_min(cost: ArrayView1<f64>, weight: ArrayView1<f64>, dual: &Array1<f64>, kappa: f64, epsilon: f64) -> f64 {
    let terms = || {
        cost.iter().zip(weight.iter()).zip(dual.iter()).filter(|((_, &w), _)| w > 0.0).map(|((&c, &w), &g)| (w, g - c))
    };
    let top = terms().fold(f64::NEG_INFINITY, |a, (_, t)| a.max(t));
    if top == f64::NEG_INFINITY {
        return top;
    }
    let sum: f64 = terms().map(|(w, t)| w * ((t - top) / epsilon).exp()).sum();
    top + kappa + epsilon * sum.ln()
}

struct Sweep {
    /// Largest `|Δf|/ε`.
    change: f64,
    /// Marginal residual before the update: distance to the mass where uncapped,
    /// excess over it where capped.
    residual: f64,
    /// Transported mass after the update.
    mass: f64,
}

/// `f_i = min(cap, −ε ln Σ_j q_j e^{(g_j + κ − c_ij)/ε})` for every point with mass.
#[allow(clippy::too_many_arguments)]
fn half_sweep(
    cost: ArrayView2<f64>,
    mass: &Array1<f64>,
    other_mass: &Array1<f64>,
    f: &mut Array1<f64>,
    g: &Array1<f64>,
    kappa: f64,
    cap: f64,
    epsilon: f64,
) -> Sweep {
    let mut out = Sweep { change: 0.0, residual: 0.0, mass: 0.0 };
    for (i, row) in cost.outer_iter().enumerate() {
        if mass[i] == 0.0 {
            continue;
        }
        let free = -soft_min(row, other_mass.view(), g, kappa, epsilon);
        let new = free.min(cap);
        // The marginal at potential `x` is `mass_i · e^{(x − free)/ε}`.
        let at = |x: f64| if free == f64::INFINITY { 0.0 } else { mass[i] * ((x - free) / epsilon).exp() };
        let current = at(f[i]);
        out.residual += if f[i] < cap { (current - mass[i]).abs() } else { (current - mass[i]).max(0.0) };
        out.change = out.change.max(if new == f[i] { 0.0 } else { (new - f[i]).abs() / epsilon });
        out.mass += at(new);
        f[i] = new;
    }
    out
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `ε` schedule: halve from the cost range down to `epsilon` on a cold start.
fn stages(cost: ArrayView2<f64>, epsilon: f64, warm: bool) -> Vec<f64> {
    let mut out = vec![epsilon];
    if warm {
        return out;
    }
    let hi = cost.iter().fold(f64::NEG_INFINITY, |a, &c| a.max(c));
    let lo = cost.iter().fold(f64::INFINITY, |a, &c| a.min(c));
    while out.len() < 60 && out.last().is_some_and(|&e| e < hi - lo) {
        out.push(out.last().unwrap() * 2.0);
    }
    out.reverse();
    out
}

/// Block ascent shared by both modes; `rho = None` is penalty mode with cap `cap`.
fn ascend(
    prob: &PotProblem,
    epsilon: f64,
    opts: SinkhornOptions,
    cap: f64,
    rho: Option<f64>,
    start: Option<&Potentials>,
) -> Result<(Array2<f64>, Potentials)> {
    let (n, m) = prob.cost.dim();
    let cost = prob.cost.view();
    let cost_t = prob.cost.t();
    let mut pot = match start {
        Some(s) if s.f.len() == n && s.g.len() == m => Potentials {
            f: s.f.mapv(|x| x.min(cap)),
            g: s.g.mapv(|x| x.min(cap)),
            kappa: if rho.is_some() { s.kappa } else { 0.0 },
        },
        _ => Potentials { f: Array1::zeros(n), g: Array1::zeros(m), kappa: 0.0 },
    };
    let schedule = stages(cost, epsilon, start.is_some());
    let total = prob.p.sum();
    let residual_tol = opts.tol * total.max(1.0);
    let coarse_tol = residual_tol.max(1e-3 * total);
    let mut budget = opts.max_iter;
    for (s, &eps) in schedule.iter().enumerate() {
        let last = s + 1 == schedule.len();
        let target = if last { residual_tol } else { coarse_tol };
        let mut first = true;
        while budget > 0 {
            budget -= 1;
            let rows = half_sweep(cost, &prob.p, &prob.q, &mut pot.f, &pot.g, pot.kappa, cap, eps);
            if rho.is_none() && !first && rows.residual < target {
                break;
            }
            let cols = half_sweep(cost_t, &prob.q, &prob.p, &mut pot.g, &pot.f, pot.kappa, cap, eps);
            let mut change = rows.change.max(cols.change);
            let mut residual = rows.residual;
            if let Some(rho) = rho {
                if !(cols.mass > 0.0) || !cols.mass.is_finite() {
                    return Err(Error::Overflow(format!("plan mass collapsed at epsilon = {eps}")));
                }
                let step = eps * (rho / cols.mass).ln();
                pot.kappa += step;
                change = change.max(step.abs() / eps);
                residual += cols.residual + (cols.mass - rho).abs();
                if !first && residual < target {
                    break;
                }
            }
            if last && change < opts.tol {
                break;
            }
            first = false;
        }
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| {
        if prob.p[i] == 0.0 || prob.q[j] == 0.0 {
            0.0
        } else {
            prob.p[i] * prob.q[j] * ((pot.f[i] + pot.g[j] + pot.kappa - prob.cost[[i, j]]) / epsilon).exp()
        }
    });
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow(format!("plan entries overflowed at epsilon = {epsilon}")));
    }
    Ok((plan, pot))
}

/// Scale down any row or column above its mass.
fn clip_marginals(plan: &mut Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) {
    for (mut row, &cap) in plan.rows_mut().into_iter().zip(p.iter()) {
        let s = row.sum();
        if s > cap {
            row.mapv_inplace(|x| x * cap / s);
        }
    }
    for (mut col, &cap) in plan.columns_mut().into_iter().zip(q.iter()) {
        let s = col.sum();
        if s > cap {
            col.mapv_inplace(|x| x * cap / s);
        }
    }
}

/// Entropic solution of the penalty problem `Penalty(λ)`.
pub fn sinkhorn_penalty(prob: &PotProblem, epsilon: f64, opts: SinkhornOptions) -> Result<TransportPlan> {
    Ok(sinkhorn_penalty_warm(prob, epsilon, opts, None)?.0)
}

/// [`sinkhorn_penalty`] from given potentials; also returns the final ones.
pub fn sinkhorn_penalty_warm(
    prob: &PotProblem,
    epsilon: f64,
    opts: SinkhornOptions,
    start: Option<&Potentials>,
) -> Result<(TransportPlan, Potentials)> {
    prob.validate()?;
    let PotMode::Penalty(lambda) = prob.mode else {
        return Err(Error::InvalidParameter("sinkhorn_penalty needs Penalty mode".into()));
    };
    if lambda < 0.0 {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    check_epsilon(epsilon)?;
    let (mut plan, pot) = ascend(prob, epsilon, opts, lambda, None, start)?;
    // The loop may stop between half-sweeps.
    clip_marginals(&mut plan, &prob.p, &prob.q);
    Ok((into_plan(plan)?, pot))
}

/// Entropic solution of the mass-constrained problem `MassConstrained(ρ)`.
pub fn sinkhorn_mass_constrained(prob: &PotProblem, epsilon: f64, opts: SinkhornOptions) -> Result<TransportPlan> {
    Ok(sinkhorn_mass_constrained_warm(prob, epsilon, opts, None)?.0)
}

/// [`sinkhorn_mass_constrained`] from given potentials; also returns the final ones.
pub fn sinkhorn_mass_constrained_warm(
    prob: &PotProblem,
    epsilon: f64,
    opts: SinkhornOptions,
    start: Option<&Potentials>,
) -> Result<(TransportPlan, Potentials)> {
    prob.validate()?;
    let PotMode::MassConstrained(rho) = prob.mode else {
        return Err(Error::InvalidParameter("sinkhorn_mass_constrained needs MassConstrained mode".into()));
    };
    check_epsilon(epsilon)?;
    let (n, m) = prob.cost.dim();
    if rho == 0.0 {
        let pot = Potentials { f: Array1::zeros(n), g: Array1::zeros(m), kappa: 0.0 };
        return Ok((TransportPlan::zeros(n, m), pot));
    }
    let (mut plan, pot) = ascend(prob, epsilon, opts, 0.0, Some(rho), start)?;
    clip_marginals(&mut plan, &prob.p, &prob.q);
    // Spread any remaining deficit along the slack `a bᵀ`: with
    // `t = d/(|a||b|)` rows gain `a_i·d/|a| ≤ a_i` and columns `b_j·d/|b| ≤ b_j`,
    // since `|a|, |b| ≥ d`.
    let deficit = rho - plan.sum();
    if deficit > 0.0 {
        let a = &prob.p - &plan.sum_axis(ndarray::Axis(1));
        let b = &prob.q - &plan.sum_axis(ndarray::Axis(0));
        let a = a.mapv(|x| x.max(0.0));
        let b = b.mapv(|x| x.max(0.0));
        let norm = a.sum() * b.sum();
        if norm > 0.0 {
            let t = deficit / norm;
            for ((i, j), x) in plan.indexed_iter_mut() {
                *x += t * a[i] * b[j];
            }
        }
    } else if deficit < 0.0 {
        plan.mapv_inplace(|x| x * rho / (rho - deficit));
    }
    Ok((into_plan(plan)?, pot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pot::solve_exact;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize, mode: PotMode) -> PotProblem {
        let cost = Array2::<f64>::from_shape_fn((n, m), |_| rng.gen_range(0.0..1.0));
        let p = Array1::<f64>::from_shape_fn(n, |_| rng.gen_range(0.1..0.5));
        let q = Array1::<f64>::from_shape_fn(m, |_| rng.gen_range(0.1..0.5));
        PotProblem::new(cost, p, q, mode).unwrap()
    }

    #[test]
    fn single_zero_cost_cell_keeps_unit_mass() {
        let prob = PotProblem::new(array![[0.0]], array![1.0], array![1.0], PotMode::Penalty(0.7)).unwrap();
        let plan = sinkhorn_penalty(&prob, 0.05, SinkhornOptions::default()).unwrap();
        assert!((plan.entries()[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_discarding_shrinks_mass_with_epsilon() {
        let prob = PotProblem::new(array![[0.5]], array![1.0], array![1.0], PotMode::Penalty(0.0)).unwrap();
        let coarse = sinkhorn_penalty(&prob, 0.5, SinkhornOptions::default()).unwrap();
        let fine = sinkhorn_penalty(&prob, 0.05, SinkhornOptions::default()).unwrap();
        assert!(fine.total_mass() < coarse.total_mass());
        assert!(fine.total_mass() <= (-0.5f64 / 0.05).exp() * (1.0 + 1e-12));
    }

    #[test]
    fn penalty_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eps = 0.05;
        let prob = random_problem(&mut rng, 3, 3, PotMode::Penalty(0.4));
        let ent = sinkhorn_penalty(&prob, eps, SinkhornOptions::default()).unwrap();
        let ex = solve_exact(&prob).unwrap();
        let gap = prob.objective(ent.view()) - prob.objective(ex.view());
        assert!(gap >= -1e-9 && gap <= 5.0 * eps * 9.0, "gap {gap}");
    }

    #[test]
    fn uniform_zero_cost_mass_constrained_is_uniform() {
        let p = Array1::from_elem(3, 1.0 / 3.0);
        let prob = PotProblem::new(Array2::zeros((3, 3)), p.clone(), p, PotMode::MassConstrained(1.0)).unwrap();
        let plan = sinkhorn_mass_constrained(&prob, 0.05, SinkhornOptions::default()).unwrap();
        for &v in plan.entries() {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rho_gives_zero_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prob = random_problem(&mut rng, 2, 3, PotMode::MassConstrained(0.0));
        let plan = sinkhorn_mass_constrained(&prob, 0.05, SinkhornOptions::default()).unwrap();
        assert_eq!(plan.total_mass(), 0.0);
    }

    #[test]
    fn mass_constrained_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eps = 0.05;
        let prob = random_problem(&mut rng, 2, 3, PotMode::MassConstrained(0.4));
        let ent = sinkhorn_mass_constrained(&prob, eps, SinkhornOptions::default()).unwrap();
        let ex = solve_exact(&prob).unwrap();
        assert!((ent.total_mass() - 0.4).abs() < 1e-12);
        let gap = prob.objective(ent.view()) - prob.objective(ex.view());
        assert!(gap >= -1e-9 && gap <= 5.0 * eps * 6.0, "gap {gap}");
    }

    #[test]
    fn parameter_errors() {
        let prob = PotProblem::new(array![[0.0]], array![1.0], array![1.0], PotMode::Penalty(1.0)).unwrap();
        assert!(sinkhorn_penalty(&prob, 0.0, SinkhornOptions::default()).is_err());
        assert!(sinkhorn_mass_constrained(&prob, 0.1, SinkhornOptions::default()).is_err());
    }

    #[test]
    fn kernel_outside_f64_range_still_transports() {
        let neg = PotProblem::new(array![[-50.0]], array![1.0], array![1.0], PotMode::Penalty(1.0)).unwrap();
        let plan = sinkhorn_penalty(&neg, 0.01, SinkhornOptions::default()).unwrap();
        assert!((plan.entries()[[0, 0]] - 1.0).abs() < 1e-9);
        let far = PotProblem::new(array![[20.0, 21.0]], array![1.0], array![0.5, 0.5], PotMode::Penalty(30.0)).unwrap();
        let plan = sinkhorn_penalty(&far, 0.01, SinkhornOptions::default()).unwrap();
        assert!((plan.total_mass() - 1.0).abs() < 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]

        #[test]
        fn plans_are_dominated(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let lam = rng.gen_range(0.0..1.0);
            let prob = random_problem(&mut rng, n, m, PotMode::Penalty(lam));
            let plan = sinkhorn_penalty(&prob, 0.05, SinkhornOptions::default()).unwrap();
            proptest::prop_assert!(plan.marginal_violation(prob.p.view(), prob.q.view()) <= 1e-6);

            let rho = rng.gen_range(0.0f64..1.0) * prob.p.sum().min(prob.q.sum());
            let mc = PotProblem { mode: PotMode::MassConstrained(rho), ..prob };
            let plan = sinkhorn_mass_constrained(&mc, 0.05, SinkhornOptions::default()).unwrap();
            proptest::prop_assert!(plan.marginal_violation(mc.p.view(), mc.q.view()) <= 1e-6);
            proptest::prop_assert!((plan.total_mass() - rho).abs() <= 1e-12);
        }
    }
}
