//! Metric-measure spaces, transport plans, solver configuration and the two
//! fused objectives.
//!
//! With `M[i,j,i',j'] = L(Cx[i,i'], Cy[j,j'])` and a feature cost `C`:
//!
//! ```text
//! FPGW(γ)  = ω1⟨C,γ⟩ + ω2⟨M∘γ,γ⟩ + λ(|p|² + |q|² − 2|γ|²)     over Γ≤(p,q)
//! FMPGW(γ) = ω1⟨C,γ⟩ + ω2⟨M∘γ,γ⟩                           over Γ≤^ρ(p,q)
//! ```
//!
//! The mass penalty `λ(|p|²+|q|²−2|γ|²)` is the total-variation gap between
//! `p⊗p, q⊗q` and the plan's marginals squared; it is not scaled by `ω2`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::contraction::{contract, Loss};
use crate::{tol, Error, Result};

/// Node features attached to a space.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Real(Array2<f64>),
    Labels(Vec<String>),
}

impl Features {
    pub fn len(&self) -> usize {
        match self {
            Features::Real(x) => x.nrows(),
            Features::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&Array2<f64>> {
        match self {
            Features::Real(x) => Some(x),
            Features::Labels(_) => None,
        }
    }
}

/// Finite space: structure matrix (entries already raised to the power `r`),
/// mass vector and optional node features.
#[derive(Debug, Clone, PartialEq)]
pub struct MmSpace {
    structure: Array2<f64>,
    mass: Array1<f64>,
    features: Option<Features>,
}

impl MmSpace {
    pub fn new(structure: Array2<f64>, mass: Array1<f64>) -> Result<Self> {
        Self::checked(structure, mass, true)
    }

    /// Barycenter supports: the exact structure update can leave positive
    /// self-distances, which the quadratic objective handles unchanged.
    pub(crate) fn with_free_diagonal(structure: Array2<f64>, mass: Array1<f64>) -> Result<Self> {
        Self::checked(structure, mass, false)
    }

    fn checked(structure: Array2<f64>, mass: Array1<f64>, zero_diagonal: bool) -> Result<Self> {
        let n = structure.nrows();
        if structure.ncols() != n {
            return Err(Error::Shape(format!("structure must be square, got {:?}", structure.dim())));
        }
        if mass.len() != n {
            return Err(Error::Shape(format!("mass has {} entries for {n} points", mass.len())));
        }
        if structure.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("structure entries must be finite".into()));
        }
        let scale = structure.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for i in 0..n {
            if zero_diagonal && structure[[i, i]] != 0.0 {
                return Err(Error::InvalidParameter(format!("structure diagonal entry {i} is nonzero")));
            }
            for j in 0..i {
                if (structure[[i, j]] - structure[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!("structure is not symmetric at ({i},{j})")));
                }
            }
        }
        if mass.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("mass entries must be finite and nonnegative".into()));
        }
        Ok(Self { structure, mass, features: None })
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.len() != self.len() {
            return Err(Error::Shape(format!("{} feature rows for {} points", features.len(), self.len())));
        }
        if let Features::Real(x) = &features {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature entries must be finite".into()));
            }
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn structure(&self) -> &Array2<f64> {
        &self.structure
    }

    pub fn mass(&self) -> &Array1<f64> {
        &self.mass
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.sum()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// Nonnegative coupling with cached total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
    total_mass: f64,
}

impl TransportPlan {
    /// Entries in `[−FEASIBILITY, 0)` are snapped to zero; anything more negative
    /// or non-finite is rejected.
    pub fn new(mut entries: Array2<f64>) -> Result<Self> {
        for v in entries.iter_mut() {
            if !v.is_finite() {
                return Err(Error::InvalidPlan("non-finite entry".into()));
            }
            if *v < 0.0 {
                if *v < -tol::FEASIBILITY {
                    return Err(Error::InvalidPlan(format!("negative entry {v}")));
                }
                *v = 0.0;
            }
        }
        let total_mass = entries.sum();
        Ok(Self { entries, total_mass })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { entries: Array2::zeros((n, m)), total_mass: 0.0 }
    }

    /// Product coupling `p qᵀ / max(|p|,|q|)`, feasible for `Γ≤(p,q)`.
    pub fn product(p: ArrayView1<f64>, q: ArrayView1<f64>) -> Self {
        let scale = p.sum().max(q.sum());
        if scale <= 0.0 {
            return Self::zeros(p.len(), q.len());
        }
        Self::scaled_product(p, q, 1.0 / scale)
    }

    /// Product coupling rescaled to total mass `rho`; feasible whenever
    /// `rho ≤ min(|p|,|q|)`.
    pub fn product_with_mass(p: ArrayView1<f64>, q: ArrayView1<f64>, rho: f64) -> Self {
        let denom = p.sum() * q.sum();
        if denom <= 0.0 || rho <= 0.0 {
            return Self::zeros(p.len(), q.len());
        }
        Self::scaled_product(p, q, rho / denom)
    }

    fn scaled_product(p: ArrayView1<f64>, q: ArrayView1<f64>, s: f64) -> Self {
        let entries = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| p[i] * q[j] * s);
        let total_mass = entries.sum();
        Self { entries, total_mass }
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn row_sums(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(1))
    }

    pub fn col_sums(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(0))
    }

    pub fn transposed(&self) -> Self {
        Self { entries: self.entries.t().to_owned(), total_mass: self.total_mass }
    }

    /// Largest marginal excess `max(γ1 − p, γ2 − q, 0)`.
    pub fn marginal_violation(&self, p: ArrayView1<f64>, q: ArrayView1<f64>) -> f64 {
        let rows = self.row_sums();
        let cols = self.col_sums();
        let r = rows.iter().zip(p.iter()).map(|(a, b)| a - b);
        let c = cols.iter().zip(q.iter()).map(|(a, b)| a - b);
        r.chain(c).fold(0.0, f64::max)
    }

    /// Checks `γ ∈ Γ≤(p,q)` up to `slack` per marginal entry.
    pub fn check_feasible(&self, p: ArrayView1<f64>, q: ArrayView1<f64>, slack: f64) -> Result<()> {
        if self.dim() != (p.len(), q.len()) {
            return Err(Error::Shape(format!("plan is {:?}, masses are ({}, {})", self.dim(), p.len(), q.len())));
        }
        let v = self.marginal_violation(p, q);
        if v > slack {
            return Err(Error::InvalidPlan(format!("marginal exceeds mass by {v:e}")));
        }
        Ok(())
    }
}

/// Solver configuration shared by every fused objective.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusedConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
    pub rho: Option<f64>,
    pub loss: Loss,
    pub q_exponent: f64,
    pub epsilon: f64,
}

impl Default for FusedConfig {
    fn default() -> Self {
        Self {
            omega1: 0.5,
            omega2: 0.5,
            lambda: 1.0,
            rho: None,
            loss: Loss::SquaredDifference,
            q_exponent: 1.0,
            epsilon: 0.02,
        }
    }
}

impl FusedConfig {
    /// Structure weight `omega2`; the feature weight is `1 − omega2`.
    pub fn new(omega2: f64) -> Self {
        Self { omega1: 1.0 - omega2, omega2, ..Self::default() }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn with_loss(mut self, loss: Loss) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_q_exponent(mut self, q: f64) -> Self {
        self.q_exponent = q;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0,1], got {v}")))
            }
        };
        unit("omega1", self.omega1)?;
        unit("omega2", self.omega2)?;
        if (self.omega1 + self.omega2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "omega1 + omega2 must equal 1, got {}",
                self.omega1 + self.omega2
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(self.q_exponent >= 1.0) || !self.q_exponent.is_finite() {
            return Err(Error::InvalidParameter(format!("q_exponent must be >= 1, got {}", self.q_exponent)));
        }
        if let Some(rho) = self.rho {
            if !(rho >= 0.0) || !rho.is_finite() {
                return Err(Error::InvalidParameter(format!("rho must be finite and >= 0, got {rho}")));
            }
        }
        Ok(())
    }

    /// Validates the configuration and that `rho` (when present) fits the masses.
    pub fn validate_for(&self, p: ArrayView1<f64>, q: ArrayView1<f64>) -> Result<()> {
        self.validate()?;
        if let Some(rho) = self.rho {
            let cap = p.sum().min(q.sum());
            if rho > cap + tol::MASS_EQ {
                return Err(Error::Constraint(format!("rho = {rho} exceeds min(|p|,|q|) = {cap}")));
            }
        }
        Ok(())
    }

    pub fn require_rho(&self) -> Result<f64> {
        self.rho.ok_or_else(|| Error::InvalidParameter("mass-constrained solver needs rho".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    /// Line-search step; absent for solvers without one.
    pub step: Option<f64>,
    /// Frank-Wolfe gap at the iterate the step started from.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub plan: TransportPlan,
    pub objective: f64,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    /// Last Frank-Wolfe gap, when the solver computes one.
    pub gap: Option<f64>,
}

pub(crate) fn check_problem(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Result<()> {
    let (n, m) = (source.len(), target.len());
    if feature_cost.dim() != (n, m) {
        return Err(Error::Shape(format!("feature cost is {:?}, expected ({n}, {m})", feature_cost.dim())));
    }
    if plan.dim() != (n, m) {
        return Err(Error::Shape(format!("plan is {:?}, expected ({n}, {m})", plan.dim())));
    }
    Ok(())
}

fn frobenius(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `ω1⟨C,γ⟩ + ω2⟨M∘γ,γ⟩` without any feasibility check.
pub(crate) fn transport_cost(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: ArrayView2<f64>,
    cfg: &FusedConfig,
) -> Result<f64> {
    let linear = if cfg.omega1 == 0.0 { 0.0 } else { cfg.omega1 * frobenius(feature_cost, plan) };
    let quad = if cfg.omega2 == 0.0 {
        0.0
    } else {
        let mg = contract(cfg.loss, source.structure().view(), target.structure().view(), plan)?;
        cfg.omega2 * frobenius(mg.view(), plan)
    };
    Ok(linear + quad)
}

/// FPGW value of an arbitrary matrix, used where feasibility is checked elsewhere.
pub(crate) fn fpgw_value(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: ArrayView2<f64>,
    cfg: &FusedConfig,
) -> Result<f64> {
    let mass = plan.sum();
    let (pm, qm) = (source.total_mass(), target.total_mass());
    let penalty = cfg.lambda * (pm * pm + qm * qm - 2.0 * mass * mass);
    Ok(transport_cost(source, target, feature_cost, plan, cfg)? + penalty)
}

/// FPGW objective of a plan in `Γ≤(p,q)`.
pub fn fpgw_objective(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<f64> {
    check_problem(source, target, feature_cost, plan.view())?;
    plan.check_feasible(source.mass().view(), target.mass().view(), tol::FEASIBILITY)?;
    fpgw_value(source, target, feature_cost, plan.view(), cfg)
}

/// FMPGW objective of a plan in `Γ≤^ρ(p,q)`.
pub fn fmpgw_objective(
    source: &MmSpace,
    target: &MmSpace,
    feature_cost: ArrayView2<f64>,
    plan: &TransportPlan,
    cfg: &FusedConfig,
) -> Result<f64> {
    check_problem(source, target, feature_cost, plan.view())?;
    plan.check_feasible(source.mass().view(), target.mass().view(), tol::FEASIBILITY)?;
    let rho = cfg.require_rho()?;
    if (plan.total_mass() - rho).abs() > tol::MASS_EQ {
        return Err(Error::Constraint(format!("plan mass {} differs from rho = {rho}", plan.total_mass())));
    }
    transport_cost(source, target, feature_cost, plan.view(), cfg)
}
