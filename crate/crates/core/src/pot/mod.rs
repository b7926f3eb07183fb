//! Linear partial optimal transport: the subproblems solved inside every
//! Frank-Wolfe and Sinkhorn-alternation step.
//!
//! ```text
//! Penalty(λ):        min_{γ ∈ Γ≤(p,q)}   ⟨c,γ⟩ + λ(|p| − |γ1| + |q| − |γ2|)
//! MassConstrained(ρ): min_{γ ∈ Γ≤^ρ(p,q)} ⟨c,γ⟩
//! ```

mod exact;
mod sinkhorn;

pub use exact::solve_exact;
pub use sinkhorn::{
    sinkhorn_mass_constrained, sinkhorn_mass_constrained_warm, sinkhorn_penalty, sinkhorn_penalty_warm, Potentials,
    SinkhornOptions,
};

use ndarray::{Array1, Array2, ArrayView2};

use crate::{tol, Error, Result, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotMode {
    /// Mass left untransported costs `linear_mass_coeff` per unit on each side.
    Penalty(f64),
    /// Exactly `rho` mass is transported.
    MassConstrained(f64),
}

#[derive(Debug, Clone)]
pub struct PotProblem {
    pub cost: Array2<f64>,
    pub p: Array1<f64>,
    pub q: Array1<f64>,
    pub mode: PotMode,
}

impl PotProblem {
    pub fn new(cost: Array2<f64>, p: Array1<f64>, q: Array1<f64>, mode: PotMode) -> Result<Self> {
        let prob = Self { cost, p, q, mode };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cost.dim() != (self.p.len(), self.q.len()) {
            return Err(Error::Shape(format!(
                "cost is {:?}, masses are ({}, {})",
                self.cost.dim(),
                self.p.len(),
                self.q.len()
            )));
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost entries must be finite".into()));
        }
        if self.p.iter().chain(self.q.iter()).any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("masses must be finite and nonnegative".into()));
        }
        match self.mode {
            PotMode::Penalty(c) if !c.is_finite() => {
                Err(Error::InvalidParameter(format!("penalty coefficient must be finite, got {c}")))
            }
            PotMode::MassConstrained(rho) => {
                let cap = self.p.sum().min(self.q.sum());
                if !(rho >= 0.0) || rho > cap + tol::MASS_EQ {
                    Err(Error::Infeasible(format!("rho = {rho} outside [0, {cap}]")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Objective of `plan` in this problem's mode.
    pub fn objective(&self, plan: ArrayView2<f64>) -> f64 {
        let linear: f64 = self.cost.iter().zip(plan.iter()).map(|(c, g)| c * g).sum();
        match self.mode {
            PotMode::Penalty(lambda) => linear + lambda * (self.p.sum() + self.q.sum() - 2.0 * plan.sum()),
            PotMode::MassConstrained(_) => linear,
        }
    }
}

/// Uniformly shrinks `plan` so both marginals fit under `(p, q)`.
pub(crate) fn shrink_into(plan: &mut Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) {
    let mut factor: f64 = 1.0;
    for (row, &cap) in plan.rows().into_iter().zip(p.iter()) {
        let s = row.sum();
        if s > cap {
            factor = factor.min(cap / s);
        }
    }
    for (col, &cap) in plan.columns().into_iter().zip(q.iter()) {
        let s = col.sum();
        if s > cap {
            factor = factor.min(cap / s);
        }
    }
    if factor < 1.0 {
        plan.mapv_inplace(|v| v * factor);
    }
}

pub(crate) fn into_plan(entries: Array2<f64>) -> Result<TransportPlan> {
    TransportPlan::new(entries)
}
