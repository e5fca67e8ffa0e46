//! Subgradient route: central-cut ellipsoid iterations on `t -> n(v + B t)`.
//!
//! Every cut keeps the minimizer inside the current ellipsoid, so
//! `f(c) - sqrt(g' P g)` is a valid lower bound at each step.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

use super::dual::dual_expr;
use super::eval::{dist_with, eval, DistResult, DistRoute};
use super::expr::{Exponent, NormExpr};

const MAX_ITERS: usize = 40_000;

/// Value and one subgradient of `n` at `x`.
pub(crate) fn subgradient(n: &NormExpr, x: &Vector, tol: f64) -> Result<(f64, Vector)> {
    let d = x.len();
    match n {
        NormExpr::Lp { p, weights } => {
            let mut g = Vector::zeros(d);
            let value = super::eval::lp_value(*p, weights, x.as_slice());
            match p {
                Exponent::One => {
                    for j in 0..d {
                        g[j] = weights[j] * sign(x[j]);
                    }
                }
                Exponent::Two => {
                    if value > 0.0 {
                        for j in 0..d {
                            g[j] = weights[j] * weights[j] * x[j] / value;
                        }
                    }
                }
                Exponent::Inf => {
                    if let Some(j) = (0..d).max_by(|&a, &b| {
                        (weights[a] * x[a]).abs().partial_cmp(&(weights[b] * x[b]).abs()).expect("finite")
                    }) {
                        g[j] = weights[j] * sign(x[j]);
                    }
                }
            }
            Ok((value, g))
        }
        NormExpr::SupOf(slots) => {
            let mut best = (f64::NEG_INFINITY, Vector::zeros(d));
            for s in slots {
                let (v, gs) = subgradient(&s.norm, &x.rows(s.offset, s.norm.dim()).into_owned(), tol)?;
                if v > best.0 {
                    let mut g = Vector::zeros(d);
                    g.rows_mut(s.offset, s.norm.dim()).copy_from(&gs);
                    best = (v, g);
                }
            }
            Ok((best.0.max(0.0), best.1))
        }
        NormExpr::SumOf(slots) => {
            let mut g = Vector::zeros(d);
            let mut total = 0.0;
            for s in slots {
                let (v, gs) = subgradient(&s.norm, &x.rows(s.offset, s.norm.dim()).into_owned(), tol)?;
                total += v;
                g.rows_mut(s.offset, s.norm.dim()).copy_from(&gs);
            }
            Ok((total, g))
        }
        NormExpr::ComposeLinear { embed, inner } => {
            let (v, g) = subgradient(inner, &(embed * x), tol)?;
            Ok((v, embed.transpose() * g))
        }
        NormExpr::QuotientOf { ambient, basis, .. } => {
            let res = dist_with(ambient, basis, x.as_slice(), tol, DistRoute::Auto)?;
            let y = x + basis * Vector::from_column_slice(&res.shift);
            let (_, g) = subgradient(ambient, &y, tol)?;
            Ok((res.value, g))
        }
        NormExpr::DualOf { inner, .. } => match dual_expr(inner) {
            Some(dn) => subgradient(&dn, x, tol),
            None => numeric_subgradient(n, x, tol),
        },
        NormExpr::OpNormOf { .. } => numeric_subgradient(n, x, tol),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn numeric_subgradient(n: &NormExpr, x: &Vector, tol: f64) -> Result<(f64, Vector)> {
    let value = eval(n, x, tol)?;
    let h = 1e-7 * (1.0 + linalg::max_abs_vec(x));
    let mut g = Vector::zeros(x.len());
    for j in 0..x.len() {
        let mut up = x.clone();
        up[j] += h;
        let mut down = x.clone();
        down[j] -= h;
        g[j] = (eval(n, &up, tol)? - eval(n, &down, tol)?) / (2.0 * h);
    }
    Ok((value, g))
}

/// Radius of a Euclidean ball in shift coordinates that contains a minimizer.
fn initial_radius(n: &NormExpr, basis: &Mat, v: &Vector, tol: f64) -> Result<f64> {
    let nv = eval(n, v, tol)?;
    let r = basis.ncols();
    // Smallest observed ratio n(B d)/|d| over coordinate and diagonal directions.
    let mut ratio = f64::INFINITY;
    let mut probe = |d: Vector| -> Result<()> {
        let len = d.norm();
        if len > 0.0 {
            ratio = ratio.min(eval(n, &(basis * &d), tol)? / len);
        }
        Ok(())
    };
    for j in 0..r {
        let mut d = Vector::zeros(r);
        d[j] = 1.0;
        probe(d)?;
        for k in j + 1..r {
            for s in [1.0, -1.0] {
                let mut d = Vector::zeros(r);
                d[j] = 1.0;
                d[k] = s;
                probe(d)?;
            }
        }
    }
    let base = 1.0 + linalg::max_abs_vec(v);
    if ratio <= 1e-12 || !ratio.is_finite() {
        return Ok(1e4 * base);
    }
    Ok(100.0 * (2.0 * nv / ratio + 1.0).max(base))
}

pub(crate) fn dist_descent(n: &NormExpr, basis: &Mat, v: &Vector, tol: f64) -> Result<DistResult> {
    let r = basis.ncols();
    let f = |t: &Vector| -> Result<(f64, Vector)> {
        let (val, g) = subgradient(n, &(v + basis * t), tol)?;
        Ok((val, basis.transpose() * g))
    };
    let radius = initial_radius(n, basis, v, tol)?;
    let mut center = Vector::zeros(r);
    let mut shape = Mat::identity(r, r) * (radius * radius);
    let (mut best, _) = f(&center)?;
    let mut best_t = center.clone();
    let mut lower: f64 = 0.0;
    let rf = r as f64;
    for _ in 0..MAX_ITERS {
        let (val, g) = f(&center)?;
        if val < best {
            best = val;
            best_t = center.clone();
        }
        let pg = &shape * &g;
        let gpg = g.dot(&pg);
        if gpg <= 0.0 || !gpg.is_finite() {
            lower = lower.max(val);
            break;
        }
        let width = gpg.sqrt();
        lower = lower.max(val - width);
        if best - lower <= tol * best.max(1.0) {
            break;
        }
        let step = &pg / width;
        if r == 1 {
            center -= &step * 0.5;
            shape *= 0.25;
        } else {
            center -= &step / (rf + 1.0);
            shape = (&shape - (&step * step.transpose()) * (2.0 / (rf + 1.0))) * (rf * rf / (rf * rf - 1.0));
            shape = (&shape + shape.transpose()) * 0.5;
        }
    }
    if !best.is_finite() {
        return Err(Error::Solver("descent produced a non-finite value".into()));
    }
    Ok(DistResult { value: best, lower: lower.min(best), shift: best_t.iter().cloned().collect(), method: "descent" })
}
