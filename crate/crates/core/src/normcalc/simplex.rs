//! Dense two-phase tableau simplex with Bland's rule. The tableau is rebuilt
//! from the original data after every pivot, so roundoff does not accumulate.

use serde::Serialize;

use crate::linalg::{Mat, Vector};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

/// `min c.x` subject to `a x = b`, `x >= 0`.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub a: Mat,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted, or the final basis failed verification.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    /// `[A | b]` for the rows in play.
    data: Mat,
    cost: Vec<f64>,
    /// `B^-1 [A | b]` over the reduced-cost row `[c - c_B B^-1 A | -c_B B^-1 b]`.
    t: Mat,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(data: Mat, cost: Vec<f64>, basis: Vec<usize>) -> Option<Self> {
        let t = Mat::zeros(data.nrows() + 1, data.ncols());
        let mut tab = Tableau { data, cost, t, basis };
        tab.rebuild().then_some(tab)
    }

    fn rows(&self) -> usize {
        self.data.nrows()
    }

    fn rebuild(&mut self) -> bool {
        let m = self.rows();
        let width = self.data.ncols();
        let bm = Mat::from_fn(m, m, |i, j| self.data[(i, self.basis[j])]);
        let Some(body) = bm.lu().solve(&self.data) else {
            return false;
        };
        if body.iter().any(|v| !v.is_finite()) {
            return false;
        }
        self.t.view_mut((0, 0), (m, width)).copy_from(&body);
        for j in 0..width {
            let c = if j + 1 < width { self.cost[j] } else { 0.0 };
            let basic: f64 = (0..m).map(|i| self.cost[self.basis[i]] * body[(i, j)]).sum();
            self.t[(m, j)] = c - basic;
        }
        for i in 0..m {
            let rhs = &mut self.t[(i, width - 1)];
            *rhs = rhs.max(0.0);
        }
        true
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let old = self.basis[r];
        self.basis[r] = col;
        if !self.rebuild() {
            self.basis[r] = old;
            self.rebuild();
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.t.ncols() - 1)]
    }

    /// Runs Bland's rule over columns `< ncols`. Returns false when unbounded.
    fn optimize(&mut self, ncols: usize) -> Option<bool> {
        let obj = self.rows();
        let cost_eps = COST_EPS * (1.0 + self.cost.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        // Entering columns whose pivot left a singular basis, since the last success.
        let mut rejected = Vec::new();
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..ncols).find(|&j| self.t[(obj, j)] < -cost_eps && !rejected.contains(&j)) else {
                return if rejected.is_empty() { Some(true) } else { None };
            };
            let mut leave: Option<(f64, usize, usize)> = None;
            for i in 0..obj {
                let a = self.t[(i, enter)];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((best, _, var)) => ratio < best - 1e-14 || (ratio <= best + 1e-14 && self.basis[i] < var),
                    };
                    if better {
                        leave = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, r, _)) = leave else {
                return Some(false);
            };
            let before = self.basis.clone();
            self.pivot(r, enter);
            if self.basis == before {
                rejected.push(enter);
            } else {
                rejected.clear();
            }
        }
        None
    }
}

pub fn simplex_solve(lp: &StandardLp) -> LpSolution {
    let (m, n) = (lp.a.nrows(), lp.a.ncols());
    let mut a = lp.a.clone();
    let mut b = lp.b.clone();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            let mut row = a.row_mut(i);
            row *= -1.0;
        }
    }
    let stalled = || LpSolution { status: LpStatus::Stalled, value: f64::NAN, x: vec![0.0; n] };
    let bscale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    // Phase 1 with one artificial per row.
    let mut data = Mat::zeros(m, n + m + 1);
    data.view_mut((0, 0), (m, n)).copy_from(&a);
    for i in 0..m {
        data[(i, n + i)] = 1.0;
        data[(i, n + m)] = b[i];
    }
    let cost: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    let Some(mut tab) = Tableau::new(data, cost, (n..n + m).collect()) else {
        return stalled();
    };
    // Phase one is bounded below by zero; "unbounded" here means pivot trouble.
    if tab.optimize(n + m) != Some(true) {
        return stalled();
    }
    let infeasibility = -tab.t[(m, n + m)];
    if infeasibility > FEAS_EPS * bscale {
        return LpSolution { status: LpStatus::Infeasible, value: f64::NAN, x: vec![0.0; n] };
    }
    // Drive artificials out; drop redundant rows.
    let mut keep = Vec::with_capacity(m);
    for r in 0..m {
        if tab.basis[r] >= n {
            let col = (0..n)
                .filter(|&j| tab.t[(r, j)].abs() > 1e-9 && !tab.basis.contains(&j))
                .max_by(|&x, &y| tab.t[(r, x)].abs().total_cmp(&tab.t[(r, y)].abs()));
            if let Some(j) = col {
                tab.pivot(r, j);
                if tab.basis[r] == j {
                    keep.push(r);
                }
            }
        } else {
            keep.push(r);
        }
    }
    let data = Mat::from_fn(keep.len(), n + 1, |i, j| if j < n { a[(keep[i], j)] } else { b[keep[i]] });
    let basis: Vec<usize> = keep.iter().map(|&r| tab.basis[r]).collect();
    if basis.iter().any(|&j| j >= n) {
        return stalled();
    }
    let Some(mut tab) = Tableau::new(data, lp.c.clone(), basis) else {
        return stalled();
    };
    let status = match tab.optimize(n) {
        None => LpStatus::Stalled,
        Some(false) => return LpSolution { status: LpStatus::Unbounded, value: f64::NEG_INFINITY, x: vec![0.0; n] },
        Some(true) => LpStatus::Optimal,
    };
    let mut x = vec![0.0; n];
    for (i, &var) in tab.basis.iter().enumerate() {
        x[var] = tab.rhs(i);
    }
    let value = x.iter().zip(&lp.c).map(|(x, c)| x * c).sum();
    if status == LpStatus::Optimal && primal_gap(&a, &b, &x) > FEAS_EPS * bscale {
        return LpSolution { status: LpStatus::Stalled, value, x };
    }
    LpSolution { status, value, x }
}

fn primal_gap(a: &Mat, b: &[f64], x: &[f64]) -> f64 {
    let r = a * Vector::from_column_slice(x) - Vector::from_column_slice(b);
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}
