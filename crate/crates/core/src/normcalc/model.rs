//! Epigraph models of norm trees, solved as LPs or second-order cone programs.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

use super::dual::{dual_expr, scalar_weight};
use super::expr::{Exponent, Norm, NormExpr};
use super::simplex::{simplex_solve, LpStatus, StandardLp};

/// Affine function of the model variables.
#[derive(Debug, Clone, Default)]
pub(crate) struct Lin {
    pub coef: Vec<f64>,
    pub cst: f64,
}

impl Lin {
    pub fn constant(c: f64) -> Self {
        Lin { coef: Vec::new(), cst: c }
    }

    pub fn var(i: usize) -> Self {
        let mut coef = vec![0.0; i + 1];
        coef[i] = 1.0;
        Lin { coef, cst: 0.0 }
    }

    pub fn axpy(&mut self, a: f64, other: &Lin) {
        if a == 0.0 {
            return;
        }
        if self.coef.len() < other.coef.len() {
            self.coef.resize(other.coef.len(), 0.0);
        }
        for (c, o) in self.coef.iter_mut().zip(&other.coef) {
            *c += a * o;
        }
        self.cst += a * other.cst;
    }

    pub fn scaled(&self, a: f64) -> Lin {
        Lin { coef: self.coef.iter().map(|c| c * a).collect(), cst: self.cst * a }
    }

    fn coef_at(&self, i: usize) -> f64 {
        self.coef.get(i).copied().unwrap_or(0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.cst + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// `m * xs` for a matrix acting on a vector of affine expressions.
pub(crate) fn apply(m: &Mat, xs: &[Lin]) -> Vec<Lin> {
    (0..m.nrows())
        .map(|i| {
            let mut out = Lin::default();
            for (j, x) in xs.iter().enumerate() {
                out.axpy(m[(i, j)], x);
            }
            out
        })
        .collect()
}

#[derive(Debug, Default)]
pub(crate) struct Model {
    pub nvars: usize,
    pub eqs: Vec<Lin>,
    pub les: Vec<Lin>,
    pub socs: Vec<Vec<Lin>>,
}

#[derive(Debug)]
pub(crate) struct Solved {
    pub value: f64,
    pub x: Vec<f64>,
    pub conic: bool,
    /// Other usable iterates from retried solves.
    pub others: Vec<Vec<f64>>,
}

impl Model {
    pub fn new_var(&mut self) -> Lin {
        self.nvars += 1;
        Lin::var(self.nvars - 1)
    }

    pub fn new_vars(&mut self, k: usize) -> Vec<Lin> {
        (0..k).map(|_| self.new_var()).collect()
    }

    /// Affine expression bounding `n(xs)` from above at every feasible point,
    /// tight at the optimum of any minimization of it.
    pub fn epigraph(&mut self, n: &Norm, xs: &[Lin]) -> Result<Lin> {
        match n.as_ref() {
            NormExpr::Lp { p, weights } => {
                let ys: Vec<Lin> = xs.iter().zip(weights).map(|(x, w)| x.scaled(*w)).collect();
                if ys.is_empty() {
                    return Ok(Lin::constant(0.0));
                }
                match (p, ys.len()) {
                    (Exponent::One, k) if k > 1 => {
                        let mut total = Lin::default();
                        for y in ys {
                            let u = self.new_var();
                            self.abs_below(&y, &u);
                            total.axpy(1.0, &u);
                        }
                        Ok(total)
                    }
                    (Exponent::Two, k) if k > 1 => {
                        let s = self.new_var();
                        let mut cone = vec![s.clone()];
                        cone.extend(ys);
                        self.socs.push(cone);
                        Ok(s)
                    }
                    _ => {
                        let s = self.new_var();
                        for y in ys {
                            self.abs_below(&y, &s);
                        }
                        Ok(s)
                    }
                }
            }
            NormExpr::SupOf(slots) => {
                let s = self.new_var();
                for slot in slots {
                    let child = self.epigraph(&slot.norm, &xs[slot.offset..slot.offset + slot.norm.dim()])?;
                    let mut c = child;
                    c.axpy(-1.0, &s);
                    self.les.push(c);
                }
                Ok(s)
            }
            NormExpr::SumOf(slots) => {
                let mut total = Lin::default();
                for slot in slots {
                    let child = self.epigraph(&slot.norm, &xs[slot.offset..slot.offset + slot.norm.dim()])?;
                    total.axpy(1.0, &child);
                }
                Ok(total)
            }
            NormExpr::ComposeLinear { embed, inner } => {
                let ys = apply(embed, xs);
                self.epigraph(inner, &ys)
            }
            NormExpr::QuotientOf { ambient, basis, .. } => {
                let t = self.new_vars(basis.ncols());
                let mut ys = xs.to_vec();
                for (i, y) in ys.iter_mut().enumerate() {
                    for (j, tj) in t.iter().enumerate() {
                        y.axpy(basis[(i, j)], tj);
                    }
                }
                self.epigraph(ambient, &ys)
            }
            NormExpr::DualOf { inner, .. } => {
                if let NormExpr::QuotientOf { ambient, basis, .. } = inner.as_ref() {
                    for c in apply(&basis.transpose(), xs) {
                        self.eqs.push(c);
                    }
                    let d = dual_expr(ambient).ok_or_else(|| not_representable("dual"))?;
                    return self.epigraph(&d, xs);
                }
                let d = dual_expr(inner).ok_or_else(|| not_representable("dual"))?;
                self.epigraph(&d, xs)
            }
            NormExpr::OpNormOf { src, tgt } => self.op_epigraph(src, tgt, xs),
        }
    }

    fn abs_below(&mut self, y: &Lin, bound: &Lin) {
        let mut a = y.clone();
        a.axpy(-1.0, bound);
        self.les.push(a);
        let mut b = y.scaled(-1.0);
        b.axpy(-1.0, bound);
        self.les.push(b);
    }

    fn op_epigraph(&mut self, src: &Norm, tgt: &Norm, xs: &[Lin]) -> Result<Lin> {
        let (e, d) = (tgt.dim(), src.dim());
        let entry = |i: usize, j: usize| xs[i * d + j].clone();
        let row = |i: usize| (0..d).map(|j| entry(i, j)).collect::<Vec<_>>();
        let col = |j: usize| (0..e).map(|i| entry(i, j)).collect::<Vec<_>>();
        if e == 0 || d == 0 {
            return Ok(Lin::constant(0.0));
        }
        if let Some(c) = scalar_weight(tgt) {
            let ds = dual_expr(src).ok_or_else(|| not_representable("operator norm"))?;
            return Ok(self.epigraph(&ds, &row(0))?.scaled(c));
        }
        if let Some(c) = scalar_weight(src) {
            return Ok(self.epigraph(tgt, &col(0))?.scaled(1.0 / c));
        }
        if let NormExpr::Lp { p: Exponent::One, weights } = src.as_ref() {
            let s = self.new_var();
            for (j, w) in weights.iter().enumerate() {
                let cj: Vec<Lin> = col(j).iter().map(|l| l.scaled(1.0 / w)).collect();
                let mut c = self.epigraph(tgt, &cj)?;
                c.axpy(-1.0, &s);
                self.les.push(c);
            }
            return Ok(s);
        }
        if let NormExpr::Lp { p: Exponent::Inf, weights } = tgt.as_ref() {
            let ds = dual_expr(src).ok_or_else(|| not_representable("operator norm"))?;
            let s = self.new_var();
            for (i, w) in weights.iter().enumerate() {
                let mut c = self.epigraph(&ds, &row(i))?.scaled(*w);
                c.axpy(-1.0, &s);
                self.les.push(c);
            }
            return Ok(s);
        }
        if let NormExpr::SumOf(slots) = src.as_ref() {
            let s = self.new_var();
            for slot in slots {
                let k = slot.norm.dim();
                let sub: Vec<Lin> =
                    (0..e).flat_map(|i| (0..k).map(move |j| (i, slot.offset + j))).map(|(i, j)| entry(i, j)).collect();
                let mut c = self.op_epigraph(&slot.norm, tgt, &sub)?;
                c.axpy(-1.0, &s);
                self.les.push(c);
            }
            return Ok(s);
        }
        if let NormExpr::SupOf(slots) = tgt.as_ref() {
            let s = self.new_var();
            for slot in slots {
                let sub: Vec<Lin> = (slot.offset..slot.offset + slot.norm.dim()).flat_map(row).collect();
                let mut c = self.op_epigraph(src, &slot.norm, &sub)?;
                c.axpy(-1.0, &s);
                self.les.push(c);
            }
            return Ok(s);
        }
        if let NormExpr::ComposeLinear { embed, inner } = tgt.as_ref() {
            // (embed A) flattened row-major.
            let cols: Vec<Vec<Lin>> = (0..d).map(col).collect();
            let mapped: Vec<Vec<Lin>> = cols.iter().map(|c| apply(embed, c)).collect();
            let k = embed.nrows();
            let sub: Vec<Lin> = (0..k).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| mapped[j][i].clone()).collect();
            return self.op_epigraph(src, inner, &sub);
        }
        if let NormExpr::ComposeLinear { embed, inner } = src.as_ref() {
            if embed.nrows() == embed.ncols() {
                let inv = linalg::inverse(embed).ok_or_else(|| not_representable("singular embedding"))?;
                // (A inv) flattened row-major.
                let rows: Vec<Vec<Lin>> = (0..e).map(row).collect();
                let mapped: Vec<Vec<Lin>> = rows.iter().map(|r| apply(&inv.transpose(), r)).collect();
                let sub: Vec<Lin> = mapped.into_iter().flatten().collect();
                return self.op_epigraph(inner, tgt, &sub);
            }
        }
        if let NormExpr::DualOf { inner, .. } = src.as_ref() {
            if let Some(ds) = dual_expr(inner) {
                return self.op_epigraph(&ds, tgt, xs);
            }
        }
        if let NormExpr::DualOf { inner, .. } = tgt.as_ref() {
            if let Some(dt) = dual_expr(inner) {
                return self.op_epigraph(src, &dt, xs);
            }
        }
        Err(not_representable("operator norm"))
    }

    /// Minimizes `objective` over the model.
    pub fn minimize(&self, objective: &Lin) -> Result<Solved> {
        if self.socs.is_empty() {
            self.minimize_lp(objective)
        } else {
            self.minimize_conic(objective)
        }
    }

    fn minimize_lp(&self, objective: &Lin) -> Result<Solved> {
        let n = self.nvars;
        let nle = self.les.len();
        let rows = self.eqs.len() + nle;
        let cols = 2 * n + nle;
        let mut a = Mat::zeros(rows, cols);
        let mut b = vec![0.0; rows];
        for (r, l) in self.eqs.iter().chain(&self.les).enumerate() {
            for i in 0..n {
                let c = l.coef_at(i);
                a[(r, 2 * i)] = c;
                a[(r, 2 * i + 1)] = -c;
            }
            b[r] = -l.cst;
            // Entries far below the row scale only feed pivot noise.
            let scale = (0..n).fold(0.0f64, |m, i| m.max(l.coef_at(i).abs()));
            for j in 0..2 * n {
                if a[(r, j)].abs() < 1e-14 * scale {
                    a[(r, j)] = 0.0;
                }
            }
        }
        for k in 0..nle {
            a[(self.eqs.len() + k, 2 * n + k)] = 1.0;
        }
        let mut c = vec![0.0; cols];
        for i in 0..n {
            c[2 * i] = objective.coef_at(i);
            c[2 * i + 1] = -objective.coef_at(i);
        }
        let sol = simplex_solve(&StandardLp { c, a, b });
        match sol.status {
            LpStatus::Optimal => {
                let x: Vec<f64> = (0..n).map(|i| sol.x[2 * i] - sol.x[2 * i + 1]).collect();
                Ok(Solved { value: objective.value(&x), x, conic: false, others: Vec::new() })
            }
            // Tableau roundoff on badly scaled rows; the interior-point path is slower but robust.
            _ => self.minimize_conic(objective),
        }
    }

    fn minimize_conic(&self, objective: &Lin) -> Result<Solved> {
        let n = self.nvars;
        let mut rows: Vec<&Lin> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if !self.eqs.is_empty() {
            rows.extend(&self.eqs);
            cones.push(ZeroConeT(self.eqs.len()));
        }
        if !self.les.is_empty() {
            rows.extend(&self.les);
            cones.push(NonnegativeConeT(self.les.len()));
        }
        let mut signs = vec![1.0; rows.len()];
        for soc in &self.socs {
            rows.extend(soc);
            signs.extend(std::iter::repeat_n(-1.0, soc.len()));
            cones.push(SecondOrderConeT(soc.len()));
        }
        // Clarabel form: A x + s = b, s in K.
        // For `l <= 0` rows: s = -l, so A = coef, b = -cst; for cone rows s = l: A = -coef, b = cst.
        let m = rows.len();
        let mut colptr = vec![0usize];
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        for j in 0..n {
            for (i, l) in rows.iter().enumerate() {
                let v = l.coef_at(j) * signs[i];
                if v != 0.0 {
                    rowval.push(i);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let b: Vec<f64> = rows.iter().zip(&signs).map(|(l, s)| -l.cst * s).collect();
        let q: Vec<f64> = (0..n).map(|j| objective.coef_at(j)).collect();
        let p = CscMatrix::zeros((n, n));
        // Retry with other factorization settings when the first pass stops short.
        let variants: [(bool, f64); 3] = [(true, 1e-8), (false, 1e-8), (true, 1e-11)];
        let mut tried: Vec<(f64, Vec<f64>)> = Vec::new();
        for (equilibrate, reg) in variants {
            let settings = DefaultSettingsBuilder::default()
                .verbose(false)
                .max_iter(200)
                .tol_gap_abs(1e-12)
                .tol_gap_rel(1e-12)
                .tol_feas(1e-12)
                .tol_ktratio(1e-10)
                .equilibrate_enable(equilibrate)
                .static_regularization_constant(reg)
                .build()
                .map_err(|e| Error::Solver(format!("{e:?}")))?;
            let mut solver =
                DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| Error::Solver(format!("{e:?}")))?;
            solver.solve();
            let status = solver.solution.status;
            let usable = matches!(
                status,
                SolverStatus::Solved | SolverStatus::AlmostSolved | SolverStatus::MaxIterations | SolverStatus::InsufficientProgress
            );
            let x = solver.solution.x.clone();
            if !usable || x.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let quality = solver.info.res_primal.max(solver.info.res_dual).max(solver.info.gap_abs);
            if status == SolverStatus::Solved {
                let others = tried.into_iter().map(|(_, x)| x).collect();
                return Ok(Solved { value: objective.value(&x), x, conic: true, others });
            }
            tried.push((quality, x));
        }
        tried.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut it = tried.into_iter().map(|(_, x)| x);
        match it.next() {
            Some(x) => Ok(Solved { value: objective.value(&x), x, conic: true, others: it.collect() }),
            None => Err(Error::Solver("interior point failed under every setting".into())),
        }
    }
}

pub(crate) fn not_representable(what: &str) -> Error {
    Error::NoRoute(format!("{what} is not LP/SOC representable"))
}
