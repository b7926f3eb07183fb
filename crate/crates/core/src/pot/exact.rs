//! Exact partial transport by successive shortest augmenting paths.
//!
//! Network: source → row i (capacity p_i, cost 0) → column j (uncapacitated,
//! cost c_ij) → sink (capacity q_j, cost 0). After every augmentation along a
//! shortest path the flow is cost-optimal for its value, and path costs are
//! nondecreasing. Hence:
//! - `MassConstrained(ρ)`: augment until the flow value reaches ρ;
//! - `Penalty(λ)`: with costs `c − 2λ`, augment while the path cost is negative.
//!
//! Dijkstra runs on reduced costs with node potentials; selection ties go to
//! the lowest node index, so results are deterministic.

use ndarray::{Array1, Array2, ArrayView2};

use super::{into_plan, PotMode, PotProblem};
use crate::{Error, Result, TransportPlan};

/// Global minimizer of the problem's linear objective over its feasible set.
pub fn solve_exact(prob: &PotProblem) -> Result<TransportPlan> {
    prob.validate()?;
    let (cost, target) = match prob.mode {
        PotMode::Penalty(lambda) => (prob.cost.mapv(|c| c - 2.0 * lambda), Target::NegativePaths),
        PotMode::MassConstrained(rho) => {
            let cap = prob.p.sum().min(prob.q.sum());
            (prob.cost.clone(), Target::Mass(rho.min(cap)))
        }
    };
    let flow = Ssp::new(cost.view(), &prob.p, &prob.q).run(target)?;
    into_plan(flow)
}

#[derive(Debug, Clone, Copy)]
enum Target {
    NegativePaths,
    Mass(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Prev {
    None,
    Source,
    /// Reached a column through a forward arc from this row.
    Row(usize),
    /// Reached a row through a backward arc from this column.
    Col(usize),
}

struct Ssp<'a> {
    cost: ArrayView2<'a, f64>,
    p: &'a Array1<f64>,
    q: &'a Array1<f64>,
    flow: Array2<f64>,
    row_used: Vec<f64>,
    col_used: Vec<f64>,
    /// Potentials: rows `0..n`, columns `n..n+m`, sink `n+m`; the source has potential 0.
    pot: Vec<f64>,
    eps: f64,
}

impl<'a> Ssp<'a> {
    fn new(cost: ArrayView2<'a, f64>, p: &'a Array1<f64>, q: &'a Array1<f64>) -> Self {
        let (n, m) = cost.dim();
        let mut pot = vec![0.0; n + m + 1];
        // Exact shortest distances from the source in the empty residual network.
        let mut sink = f64::INFINITY;
        for j in 0..m {
            let d = (0..n).map(|i| cost[[i, j]]).fold(f64::INFINITY, f64::min);
            pot[n + j] = if d.is_finite() { d } else { 0.0 };
            sink = sink.min(pot[n + j]);
        }
        pot[n + m] = if sink.is_finite() { sink } else { 0.0 };
        let scale = p.sum().max(q.sum()).max(f64::MIN_POSITIVE);
        Self {
            cost,
            p,
            q,
            flow: Array2::zeros((n, m)),
            row_used: vec![0.0; n],
            col_used: vec![0.0; m],
            pot,
            eps: 1e-14 * scale,
        }
    }

    fn run(mut self, target: Target) -> Result<Array2<f64>> {
        let mut moved = 0.0;
        loop {
            let remaining = match target {
                Target::Mass(rho) => {
                    let r = rho - moved;
                    if r <= self.eps {
                        break;
                    }
                    r
                }
                Target::NegativePaths => f64::INFINITY,
            };
            let Some((prev, path_end)) = self.shortest_path() else {
                if let Target::Mass(rho) = target {
                    // Capacity rounding may leave up to MASS_EQ unrouted.
                    if rho - moved <= crate::tol::MASS_EQ {
                        break;
                    }
                    return Err(Error::Infeasible(format!("only {moved} of rho = {rho} mass can be routed")));
                }
                break;
            };
            let (path_cost, bottleneck, first_row) = self.trace(&prev, path_end);
            if matches!(target, Target::NegativePaths) && path_cost >= 0.0 {
                break;
            }
            let delta = bottleneck.min(remaining);
            self.augment(&prev, path_end, delta);
            self.row_used[first_row] += delta;
            self.col_used[path_end] += delta;
            moved += delta;
        }
        Ok(self.flow)
    }

    fn row_residual(&self, i: usize) -> f64 {
        self.p[i] - self.row_used[i]
    }

    fn col_residual(&self, j: usize) -> f64 {
        self.q[j] - self.col_used[j]
    }

    /// Dijkstra over reduced costs. Returns predecessor labels and the last
    /// column of the shortest source→sink path, updating potentials.
    fn shortest_path(&mut self) -> Option<(Vec<Prev>, usize)> {
        let (n, m) = self.cost.dim();
        let nodes = n + m;
        let mut dist = vec![f64::INFINITY; nodes + 1];
        let mut prev = vec![Prev::None; nodes];
        let mut done = vec![false; nodes + 1];
        let mut sink_prev = usize::MAX;
        for i in 0..n {
            if self.row_residual(i) > self.eps {
                dist[i] = (-self.pot[i]).max(0.0);
                prev[i] = Prev::Source;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, &d) in dist.iter().enumerate() {
                if !done[v] && d < best {
                    best = d;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == nodes {
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (self.cost[[u, j]] + self.pot[u] - self.pot[v]).max(0.0);
                    if best + rc < dist[v] {
                        dist[v] = best + rc;
                        prev[v] = Prev::Row(u);
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || self.flow[[i, j]] <= self.eps {
                        continue;
                    }
                    let rc = (-self.cost[[i, j]] + self.pot[u] - self.pot[i]).max(0.0);
                    if best + rc < dist[i] {
                        dist[i] = best + rc;
                        prev[i] = Prev::Col(j);
                    }
                }
                if self.col_residual(j) > self.eps {
                    let rc = (self.pot[u] - self.pot[nodes]).max(0.0);
                    if best + rc < dist[nodes] {
                        dist[nodes] = best + rc;
                        sink_prev = j;
                    }
                }
            }
        }
        let dt = dist[nodes];
        if !dt.is_finite() {
            return None;
        }
        for (v, d) in dist.iter().enumerate() {
            self.pot[v] += if done[v] { d.min(dt) } else { dt };
        }
        Some((prev, sink_prev))
    }

    /// Actual path cost, bottleneck capacity and the row the path leaves the source by.
    fn trace(&self, prev: &[Prev], last_col: usize) -> (f64, f64, usize) {
        let n = self.cost.nrows();
        let mut cost = 0.0;
        let mut cap = self.col_residual(last_col);
        let mut col = last_col;
        loop {
            let Prev::Row(i) = prev[n + col] else { unreachable!("column reached without a row") };
            cost += self.cost[[i, col]];
            match prev[i] {
                Prev::Source => {
                    cap = cap.min(self.row_residual(i));
                    return (cost, cap, i);
                }
                Prev::Col(j) => {
                    cost -= self.cost[[i, j]];
                    cap = cap.min(self.flow[[i, j]]);
                    col = j;
                }
                _ => unreachable!("row reached without a predecessor"),
            }
        }
    }

    fn augment(&mut self, prev: &[Prev], last_col: usize, delta: f64) {
        let n = self.cost.nrows();
        let mut col = last_col;
        loop {
            let Prev::Row(i) = prev[n + col] else { unreachable!() };
            self.flow[[i, col]] += delta;
            match prev[i] {
                Prev::Source => return,
                Prev::Col(j) => {
                    let f = &mut self.flow[[i, j]];
                    *f -= delta;
                    if *f <= self.eps {
                        *f = 0.0;
                    }
                    col = j;
                }
                _ => unreachable!(),
            }
        }
    }
}
