//! Norm evaluation and distance to a subspace.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

use super::descent;
use super::dual::{dual_expr, scalar_weight};
use super::expr::{Exponent, Norm, NormExpr};
use super::model::{Lin, Model};
use super::opnorm::op_norm;

/// Default tolerance for solver-backed evaluations.
pub const DEFAULT_TOL: f64 = 1e-8;

pub fn eval_norm(n: &NormExpr, v: &[f64], tol: f64) -> Result<f64> {
    if v.len() != n.dim() {
        return Err(Error::DimensionMismatch { expected: n.dim(), got: v.len() });
    }
    eval(n, &Vector::from_column_slice(v), tol)
}

pub(crate) fn eval_vec(n: &Norm, v: &Vector, tol: f64) -> Result<f64> {
    eval(n.as_ref(), v, tol)
}

fn cache_key(v: &Vector, tol: f64) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).chain(std::iter::once(tol.to_bits())).collect()
}

pub(crate) fn eval(n: &NormExpr, v: &Vector, tol: f64) -> Result<f64> {
    if v.len() != n.dim() {
        return Err(Error::DimensionMismatch { expected: n.dim(), got: v.len() });
    }
    match n {
        NormExpr::Lp { p, weights } => Ok(lp_value(*p, weights, v.as_slice())),
        NormExpr::SupOf(slots) => {
            let mut m: f64 = 0.0;
            for s in slots {
                m = m.max(eval(&s.norm, &v.rows(s.offset, s.norm.dim()).into_owned(), tol)?);
            }
            Ok(m)
        }
        NormExpr::SumOf(slots) => {
            let mut total = 0.0;
            for s in slots {
                total += eval(&s.norm, &v.rows(s.offset, s.norm.dim()).into_owned(), tol)?;
            }
            Ok(total)
        }
        NormExpr::ComposeLinear { embed, inner } => eval(inner, &(embed * v), tol),
        NormExpr::QuotientOf { ambient, basis, cache } => {
            let key = cache_key(v, tol);
            if let Some(hit) = cache.get(&key) {
                return Ok(hit);
            }
            let value = dist_to_subspace(ambient, basis, v.as_slice(), tol)?;
            cache.put(key, value);
            Ok(value)
        }
        NormExpr::DualOf { inner, cache } => {
            let key = cache_key(v, tol);
            if let Some(hit) = cache.get(&key) {
                return Ok(hit);
            }
            let value = dual_value(inner, v, tol)?;
            cache.put(key, value);
            Ok(value)
        }
        NormExpr::OpNormOf { src, tgt } => {
            let a = linalg::unflatten(v.as_slice(), tgt.dim(), src.dim());
            Ok(op_norm(&a, src, tgt, tol)?.value)
        }
    }
}

pub(crate) fn lp_value(p: Exponent, weights: &[f64], v: &[f64]) -> f64 {
    let it = weights.iter().zip(v).map(|(w, x)| (w * x).abs());
    match p {
        Exponent::One => it.sum(),
        Exponent::Two => {
            let scale = weights.iter().zip(v).fold(0.0f64, |m, (w, x)| m.max((w * x).abs()));
            if scale == 0.0 {
                0.0
            } else {
                scale * it.map(|a| (a / scale).powi(2)).sum::<f64>().sqrt()
            }
        }
        Exponent::Inf => it.fold(0.0, f64::max),
    }
}

/// Support function of the unit ball of `inner` at `a`.
pub(crate) fn dual_value(inner: &Norm, a: &Vector, tol: f64) -> Result<f64> {
    if let NormExpr::QuotientOf { ambient, basis, .. } = inner.as_ref() {
        let leak = basis.transpose() * a;
        if linalg::max_abs_vec(&leak) > 1e-9 * (1.0 + linalg::max_abs_vec(a)) {
            return Ok(f64::INFINITY);
        }
        return dual_value(ambient, a, tol);
    }
    match dual_expr(inner) {
        Some(d) => eval(&d, a, tol),
        None => Err(Error::NoRoute("dual of this norm has no closed form in the family".into())),
    }
}

/// `G` with `n(x) = |G x|_2`, when the norm is Euclidean in disguise.
pub(crate) fn euclidean_factor(n: &NormExpr) -> Option<Mat> {
    match n {
        NormExpr::Lp { p, weights } if *p == Exponent::Two || weights.len() <= 1 => {
            Some(Mat::from_diagonal(&Vector::from_column_slice(weights)))
        }
        NormExpr::SupOf(slots) | NormExpr::SumOf(slots) if slots.len() <= 1 => match slots.first() {
            None => Some(Mat::zeros(0, 0)),
            Some(s) => euclidean_factor(&s.norm),
        },
        NormExpr::ComposeLinear { embed, inner } => Some(euclidean_factor(inner)? * embed),
        NormExpr::QuotientOf { ambient, basis, .. } => {
            let g = euclidean_factor(ambient)?;
            let q = linalg::column_space(&(&g * basis));
            Some(&g - &q * (q.transpose() * &g))
        }
        NormExpr::DualOf { inner, .. } => euclidean_dual_factor(&euclidean_factor(inner)?),
        NormExpr::OpNormOf { src, tgt } => {
            if let Some(c) = scalar_weight(tgt) {
                return Some(euclidean_dual_factor(&euclidean_factor(src)?)? * c);
            }
            if let Some(c) = scalar_weight(src) {
                return Some(euclidean_factor(tgt)? / c);
            }
            None
        }
        _ => None,
    }
}

/// Factor of the dual of `x -> |G x|_2` for injective `G`.
pub(crate) fn euclidean_dual_factor(g: &Mat) -> Option<Mat> {
    let n = g.ncols();
    if n == 0 {
        return Some(Mat::zeros(0, 0));
    }
    if linalg::rank(g) < n {
        return None;
    }
    let chol = (g.transpose() * g).cholesky()?;
    chol.l().try_inverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistRoute {
    /// Closed form for Euclidean trees, otherwise the LP/SOC model, otherwise descent.
    Auto,
    /// Central-cut ellipsoid iterations with exact subgradients.
    Descent,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistResult {
    pub value: f64,
    /// Certified lower bound (equal to `value` on closed-form and LP routes).
    pub lower: f64,
    pub shift: Vec<f64>,
    pub method: &'static str,
}

/// `inf_t n(v + basis t)`.
pub fn dist_to_subspace(n: &NormExpr, basis: &Mat, v: &[f64], tol: f64) -> Result<f64> {
    Ok(dist_with(n, basis, v, tol, DistRoute::Auto)?.value)
}

pub fn dist_with(n: &NormExpr, basis: &Mat, v: &[f64], tol: f64, route: DistRoute) -> Result<DistResult> {
    let dim = n.dim();
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
    }
    if basis.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: basis.nrows() });
    }
    if linalg::rank(basis) < basis.ncols() {
        return Err(Error::RankDeficient);
    }
    let v = Vector::from_column_slice(v);
    let r = basis.ncols();
    if r == 0 {
        let value = eval(n, &v, tol)?;
        return Ok(DistResult { value, lower: value, shift: vec![], method: "direct" });
    }
    if route == DistRoute::Descent {
        return descent::dist_descent(n, basis, &v, tol);
    }
    if let Some(g) = euclidean_factor(n) {
        let gb = &g * basis;
        let gv = &g * &v;
        let t = -linalg::lstsq(&gb, &Mat::from_column_slice(gv.len(), 1, gv.as_slice()));
        let res = &gv + &gb * &t;
        let value = res.norm();
        return Ok(DistResult { value, lower: value, shift: t.column(0).iter().cloned().collect(), method: "normal-equations" });
    }
    match dist_model(n, basis, &v, tol) {
        Ok(res) => Ok(res),
        Err(Error::NoRoute(_)) => descent::dist_descent(n, basis, &v, tol),
        Err(e) => Err(e),
    }
}

fn dist_model(n: &NormExpr, basis: &Mat, v: &Vector, tol: f64) -> Result<DistResult> {
    let r = basis.ncols();
    let mut model = Model::default();
    let t = model.new_vars(r);
    let xs: Vec<Lin> = (0..v.len())
        .map(|i| {
            let mut l = Lin::constant(v[i]);
            for (j, tj) in t.iter().enumerate() {
                l.axpy(basis[(i, j)], tj);
            }
            l
        })
        .collect();
    let norm = std::sync::Arc::new(n.clone());
    let s = model.epigraph(&norm, &xs)?;
    let solved = model.minimize(&s)?;
    let mut shift: Vec<f64> = solved.x[..r].to_vec();
    let method = if solved.conic { "interior-point" } else { "simplex" };
    let value = if n.needs_solver() {
        solved.value.max(0.0)
    } else {
        // Every shift gives an upper bound; keep the tightest.
        let at = |t: &[f64]| eval(n, &(v + basis * Vector::from_column_slice(t)), tol);
        let mut best = at(&shift)?;
        for other in &solved.others {
            let value = at(&other[..r])?;
            if value < best {
                best = value;
                shift = other[..r].to_vec();
            }
        }
        best
    };
    let lower = if solved.conic { value - tol * value.max(1.0) } else { value };
    Ok(DistResult { value, lower, shift, method })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2() -> Norm {
        NormExpr::lp(Exponent::Two, vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn leaf_examples() {
        assert_eq!(eval_norm(&l2(), &[3.0, 4.0], DEFAULT_TOL).unwrap(), 5.0);
        let s = NormExpr::sup(vec![NormExpr::unit(Exponent::Two, 1), NormExpr::unit(Exponent::Two, 1)]);
        assert_eq!(eval_norm(&s, &[2.0, -3.0], DEFAULT_TOL).unwrap(), 3.0);
        let w = NormExpr::lp(Exponent::One, vec![2.0, 0.5]).unwrap();
        assert_eq!(eval_norm(&w, &[1.0, -4.0], DEFAULT_TOL).unwrap(), 4.0);
        assert!(eval_norm(&l2(), &[1.0], DEFAULT_TOL).is_err());
    }

    #[test]
    fn quotient_examples() {
        let e1 = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let q = NormExpr::quotient(l2(), e1.clone()).unwrap();
        assert!((eval_norm(&q, &[3.0, 4.0], DEFAULT_TOL).unwrap() - 4.0).abs() < 1e-12);
        assert!((dist_to_subspace(&l2(), &e1, &[3.0, 4.0], DEFAULT_TOL).unwrap() - 4.0).abs() < 1e-12);
        let linf = NormExpr::unit(Exponent::Inf, 2);
        let diag = Mat::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!((dist_to_subspace(&linf, &diag, &[1.0, -1.0], DEFAULT_TOL).unwrap() - 1.0).abs() < 1e-12);
        let l1 = NormExpr::unit(Exponent::One, 2);
        assert!((dist_to_subspace(&l1, &diag, &[1.0, -1.0], DEFAULT_TOL).unwrap() - 2.0).abs() < 1e-12);
        let whole = Mat::identity(2, 2);
        assert!(dist_to_subspace(&l1, &whole, &[5.0, 7.0], DEFAULT_TOL).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let b = Mat::from_column_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        assert_eq!(dist_to_subspace(&l2(), &b, &[1.0, 1.0], DEFAULT_TOL), Err(Error::RankDeficient));
    }

    #[test]
    fn dual_of_leaves() {
        let d = NormExpr::dual(NormExpr::unit(Exponent::One, 3));
        assert_eq!(eval_norm(&d, &[1.0, -3.0, 2.0], DEFAULT_TOL).unwrap(), 3.0);
        let w = NormExpr::dual(NormExpr::lp(Exponent::Inf, vec![2.0, 4.0]).unwrap());
        assert_eq!(eval_norm(&w, &[1.0, 1.0], DEFAULT_TOL).unwrap(), 0.75);
    }

    #[test]
    fn mixed_sum_uses_conic_route() {
        // |(x1,x2)|_2 + |x3| restricted to a shift along (1,1,1).
        let n = NormExpr::sum(vec![NormExpr::unit(Exponent::Two, 2), NormExpr::unit(Exponent::One, 1)]);
        let b = Mat::from_column_slice(3, 1, &[1.0, 1.0, 1.0]);
        let res = dist_with(&n, &b, &[3.0, 4.0, 0.0], DEFAULT_TOL, DistRoute::Auto).unwrap();
        assert_eq!(res.method, "interior-point");
        // Oracle: scan t finely, then refine by golden section.
        let f = |t: f64| ((3.0 + t).powi(2) + (4.0 + t).powi(2)).sqrt() + t.abs();
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) * 0.382;
            let m2 = lo + (hi - lo) * 0.618;
            if f(m1) < f(m2) { hi = m2 } else { lo = m1 }
        }
        assert!((res.value - f(0.5 * (lo + hi))).abs() < 1e-9);
    }
}
