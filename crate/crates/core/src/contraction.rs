//! Tensor contractions `M∘γ` and `Mᵀ∘γ` for `M[i,j,i',j'] = L(Cx[i,i'], Cy[j,j'])`.
//!
//! For a decomposable loss `L(a,b) = f1(a) + f2(b) − h1(a)·h2(b)`,
//!
//! ```text
//! (M∘γ)[i,j] = (f1(Cx)·γ1)[i] + (f2(Cy)·γ2)[j] − (h1(Cx)·γ·h2(Cy)ᵀ)[i,j]
//! ```
//!
//! which costs `O(n²m + nm²)` instead of the `O(n²m²)` naive sum.

use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Largest `n·m` for which the quartic naive contraction is allowed.
pub const NAIVE_CELL_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Loss {
    /// `L(a,b) = (a − b)²`
    #[default]
    SquaredDifference,
    /// `L(a,b) = |a − b|`; not decomposable, contracted naively.
    AbsoluteDifference,
}

impl Loss {
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Loss::SquaredDifference => (a - b) * (a - b),
            Loss::AbsoluteDifference => (a - b).abs(),
        }
    }

    /// `(f1, f2, h1, h2)` when the loss splits as `f1(a) + f2(b) − h1(a)h2(b)`.
    pub fn decomposition(self) -> Option<Decomposition> {
        match self {
            Loss::SquaredDifference => Some(Decomposition { f1: |a| a * a, f2: |b| b * b, h1: |a| 2.0 * a, h2: |b| b }),
            Loss::AbsoluteDifference => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Decomposition {
    pub f1: fn(f64) -> f64,
    pub f2: fn(f64) -> f64,
    pub h1: fn(f64) -> f64,
    pub h2: fn(f64) -> f64,
}

fn check_shapes(cx: ArrayView2<f64>, cy: ArrayView2<f64>, plan: ArrayView2<f64>) -> Result<()> {
    if !cx.is_square() || !cy.is_square() {
        return Err(Error::Shape(format!("structure matrices must be square, got {:?} and {:?}", cx.dim(), cy.dim())));
    }
    if plan.dim() != (cx.nrows(), cy.nrows()) {
        return Err(Error::Shape(format!("plan is {:?}, expected ({}, {})", plan.dim(), cx.nrows(), cy.nrows())));
    }
    Ok(())
}

/// `M∘γ`.
pub fn contract(loss: Loss, cx: ArrayView2<f64>, cy: ArrayView2<f64>, plan: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_shapes(cx, cy, plan)?;
    match loss.decomposition() {
        Some(d) => Ok(contract_decomposed(&d, cx, cy, plan)),
        None => naive_contract(loss, cx, cy, plan),
    }
}

/// `Mᵀ∘γ`, i.e. the contraction over the first index pair; equals [`contract`]
/// with both structure matrices transposed.
pub fn contract_transposed(
    loss: Loss,
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    // Owned copies keep memory layout identical to `contract`, so symmetric inputs
    // give bitwise-equal results.
    let cxt = cx.t().to_owned();
    let cyt = cy.t().to_owned();
    contract(loss, cxt.view(), cyt.view(), plan)
}

fn contract_decomposed(
    d: &Decomposition,
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Array2<f64> {
    let row_mass = plan.sum_axis(Axis(1));
    let col_mass = plan.sum_axis(Axis(0));
    let left = cx.mapv(d.f1).dot(&row_mass);
    let right = cy.mapv(d.f2).dot(&col_mass);
    let cross = cx.mapv(d.h1).dot(&plan).dot(&cy.mapv(d.h2).t());
    let mut out = -cross;
    for ((i, j), v) in out.indexed_iter_mut() {
        *v += left[i] + right[j];
    }
    out
}

/// Direct `O(n²m²)` summation of `M∘γ`; guarded by [`NAIVE_CELL_LIMIT`].
pub fn naive_contract(
    loss: Loss,
    cx: ArrayView2<f64>,
    cy: ArrayView2<f64>,
    plan: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_shapes(cx, cy, plan)?;
    let (n, m) = plan.dim();
    if n * m > NAIVE_CELL_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "naive contraction limited to {NAIVE_CELL_LIMIT} cells, got {n}x{m}"
        )));
    }
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for ip in 0..n {
                for jp in 0..m {
                    acc += loss.eval(cx[[i, ip]], cy[[j, jp]]) * plan[[ip, jp]];
                }
            }
            out[[i, j]] = acc;
        }
    }
    Ok(out)
}

/// `max_{i,i',j,j'} L(Cx[i,i'], Cy[j,j'])`, evaluated over the distinct entry values.
pub fn max_loss(loss: Loss, cx: ArrayView2<f64>, cy: ArrayView2<f64>) -> f64 {
    let (xmin, xmax) = min_max(cx);
    let (ymin, ymax) = min_max(cy);
    // Both implemented losses are maximized at a corner of the value box.
    [loss.eval(xmin, ymin), loss.eval(xmin, ymax), loss.eval(xmax, ymin), loss.eval(xmax, ymax)]
        .into_iter()
        .fold(0.0, f64::max)
}

fn min_max(a: ArrayView2<f64>) -> (f64, f64) {
    a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}
