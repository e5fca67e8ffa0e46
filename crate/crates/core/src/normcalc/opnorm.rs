//! Operator norms `sup { tgt(A x) : src(x) <= 1 }`.
//!
//! The engine peels combinators off both sides while the reduction is exact,
//! then finishes with a closed-form leaf route, a vertex enumeration or a dual
//! route. When none applies it returns a certified upper bound together with a
//! lower bound found by local ascent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

use super::dual::{dual_expr, quotient_projection, scalar_weight};
use super::eval::{dual_value, euclidean_factor, eval};
use super::expr::{Exponent, Norm, NormExpr};

/// Largest dimension for sign-vector enumeration.
pub const SIGN_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpNorm {
    /// Best value found: exact on exact routes, otherwise a lower bound.
    pub value: f64,
    /// Certified upper bound (`+inf` when none is available).
    pub upper: f64,
    pub exact: bool,
}

impl OpNorm {
    fn exact(v: f64) -> Self {
        OpNorm { value: v, upper: v, exact: true }
    }

    fn bounds(lower: f64, upper: f64) -> Self {
        let exact = upper.is_finite() && upper <= lower * (1.0 + 1e-12) + 1e-15;
        OpNorm { value: lower.min(upper), upper, exact }
    }

    fn join(self, other: OpNorm) -> OpNorm {
        OpNorm { value: self.value.max(other.value), upper: self.upper.max(other.upper), exact: self.exact && other.exact }
    }
}

#[derive(Clone, Copy)]
struct Ctx {
    tol: f64,
    want_lower: bool,
}

/// Operator norm with lower bound search on non-exact routes.
pub fn op_norm(a: &Mat, src: &Norm, tgt: &Norm, tol: f64) -> Result<OpNorm> {
    check(a, src, tgt)?;
    route(a, src, tgt, Ctx { tol, want_lower: true })
}

/// Certified upper bound only; skips the ascent on non-exact routes.
pub fn op_norm_upper(a: &Mat, src: &Norm, tgt: &Norm, tol: f64) -> Result<OpNorm> {
    check(a, src, tgt)?;
    route(a, src, tgt, Ctx { tol, want_lower: false })
}

fn check(a: &Mat, src: &Norm, tgt: &Norm) -> Result<()> {
    if a.ncols() != src.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), got: a.ncols() });
    }
    if a.nrows() != tgt.dim() {
        return Err(Error::DimensionMismatch { expected: tgt.dim(), got: a.nrows() });
    }
    Ok(())
}

/// Rewrites duals and one-dimensional operator norms into the primal family.
fn normalize(n: &Norm) -> Option<Norm> {
    match n.as_ref() {
        NormExpr::DualOf { inner, .. } => dual_expr(inner),
        NormExpr::OpNormOf { src, tgt } if scalar_weight(tgt).is_some() || scalar_weight(src).is_some() => {
            // dual_expr of the dual: the operator norm on a row/column is itself a dual.
            if let Some(c) = scalar_weight(tgt) {
                let d = dual_expr(src)?;
                let k = d.dim();
                return NormExpr::compose(Mat::identity(k, k) * c, d).ok();
            }
            let c = scalar_weight(src)?;
            let k = tgt.dim();
            NormExpr::compose(Mat::identity(k, k) / c, tgt.clone()).ok()
        }
        _ => None,
    }
}

/// Leaf exponent seen from the source side (one-dimensional leaves act as `l1`).
fn src_leaf(n: &NormExpr) -> Option<Exponent> {
    let p = n.unit_leaf()?;
    Some(if n.dim() <= 1 { Exponent::One } else { p })
}

/// Leaf exponent seen from the target side (one-dimensional leaves act as `linf`).
fn tgt_leaf(n: &NormExpr) -> Option<Exponent> {
    let p = n.unit_leaf()?;
    Some(if n.dim() <= 1 { Exponent::Inf } else { p })
}

fn route(a: &Mat, src: &Norm, tgt: &Norm, ctx: Ctx) -> Result<OpNorm> {
    if a.nrows() == 0 || a.ncols() == 0 || linalg::max_abs(a) == 0.0 {
        return Ok(OpNorm::exact(0.0));
    }
    if slot_map(a, src, tgt) {
        if !ctx.want_lower {
            return Ok(OpNorm { value: 1.0, upper: 1.0, exact: false });
        }
        return Ok(OpNorm::bounds(ascent(a, src, tgt, ctx.tol)?, 1.0));
    }
    if let Some(r) = hom_to_hom(a, src, tgt, ctx) {
        return r;
    }
    if let Some(s) = normalize(src) {
        return route(a, &s, tgt, ctx);
    }
    if let Some(t) = normalize(tgt) {
        return route(a, src, &t, ctx);
    }
    // Target-side reductions.
    match tgt.as_ref() {
        NormExpr::Lp { p, weights } if tgt.unit_leaf().is_none() => {
            let w = Mat::from_diagonal(&Vector::from_column_slice(weights));
            return route(&(w * a), src, &NormExpr::unit(*p, weights.len()), ctx);
        }
        NormExpr::ComposeLinear { embed, inner } => return route(&(embed * a), src, inner, ctx),
        NormExpr::SupOf(slots) => {
            let mut acc = OpNorm::exact(0.0);
            for s in slots {
                let block = a.rows(s.offset, s.norm.dim()).into_owned();
                acc = acc.join(route(&block, src, &s.norm, ctx)?);
            }
            return Ok(acc);
        }
        NormExpr::SumOf(slots) => {
            let live: Vec<_> = slots
                .iter()
                .filter(|s| linalg::max_abs(&a.rows(s.offset, s.norm.dim()).into_owned()) > 0.0)
                .collect();
            if live.len() <= 1 {
                return match live.first() {
                    None => Ok(OpNorm::exact(0.0)),
                    Some(s) => route(&a.rows(s.offset, s.norm.dim()).into_owned(), src, &s.norm, ctx),
                };
            }
        }
        _ => {}
    }
    // Source-side reductions.
    match src.as_ref() {
        NormExpr::Lp { p, weights } if src.unit_leaf().is_none() => {
            let w = Mat::from_diagonal(&Vector::from_iterator(weights.len(), weights.iter().map(|w| 1.0 / w)));
            return route(&(a * w), &NormExpr::unit(*p, weights.len()), tgt, ctx);
        }
        NormExpr::SumOf(slots) => {
            let mut acc = OpNorm::exact(0.0);
            for s in slots {
                let block = a.columns(s.offset, s.norm.dim()).into_owned();
                acc = acc.join(route(&block, &s.norm, tgt, ctx)?);
            }
            return Ok(acc);
        }
        NormExpr::SupOf(slots) => {
            let live: Vec<_> = slots
                .iter()
                .filter(|s| linalg::max_abs(&a.columns(s.offset, s.norm.dim()).into_owned()) > 0.0)
                .collect();
            if live.len() <= 1 {
                return match live.first() {
                    None => Ok(OpNorm::exact(0.0)),
                    Some(s) => route(&a.columns(s.offset, s.norm.dim()).into_owned(), &s.norm, tgt, ctx),
                };
            }
        }
        NormExpr::ComposeLinear { embed, inner } => {
            if embed.nrows() == embed.ncols() {
                let inv = linalg::inverse(embed).ok_or(Error::RankDeficient)?;
                return route(&(a * inv), inner, tgt, ctx);
            }
            if let NormExpr::QuotientOf { ambient, basis, .. } = inner.as_ref() {
                if let Some(p) = quotient_projection(embed, basis) {
                    return route(&(a * p), ambient, tgt, ctx);
                }
            }
        }
        NormExpr::QuotientOf { ambient, basis, .. } => {
            let leak = a * basis;
            if linalg::max_abs(&leak) > 1e-9 * (1.0 + linalg::max_abs(a)) {
                return Ok(OpNorm::exact(f64::INFINITY));
            }
            return route(a, ambient, tgt, ctx);
        }
        _ => {}
    }
    if let (Some(p), Some(q)) = (src_leaf(src), tgt_leaf(tgt)) {
        if let Some(v) = leaf_route(a, p, q) {
            return Ok(OpNorm::exact(v));
        }
    }
    // Vertex enumeration of a polytope source.
    match src_leaf(src) {
        Some(Exponent::One) => {
            let mut best: f64 = 0.0;
            for j in 0..a.ncols() {
                best = best.max(eval(tgt, &a.column(j).into_owned(), ctx.tol)?);
            }
            return Ok(OpNorm::exact(best));
        }
        Some(Exponent::Inf) if a.ncols() <= SIGN_CAP => {
            let mut best: f64 = 0.0;
            for s in sign_vectors(a.ncols()) {
                best = best.max(eval(tgt, &(a * s), ctx.tol)?);
            }
            return Ok(OpNorm::exact(best));
        }
        _ => {}
    }
    // Dual routes for polytope targets.
    match tgt_leaf(tgt) {
        Some(Exponent::Inf) => {
            if let Some(v) = max_dual(src, (0..a.nrows()).map(|i| a.row(i).transpose()), ctx)? {
                return Ok(OpNorm::exact(v));
            }
        }
        Some(Exponent::One) if a.nrows() <= SIGN_CAP => {
            let at = a.transpose();
            if let Some(v) = max_dual(src, sign_vectors(a.nrows()).map(|s| &at * s), ctx)? {
                return Ok(OpNorm::exact(v));
            }
        }
        Some(Exponent::Two) => {
            if let Some(g) = euclidean_factor(src) {
                if let Some(v) = euclidean_source(a, &g) {
                    return Ok(OpNorm::exact(v));
                }
            }
        }
        _ => {}
    }
    // Hom-fiber target: enumerate the vertices of its source.
    if let NormExpr::OpNormOf { src: inner_src, tgt: inner_tgt } = tgt.as_ref() {
        if let Some(verts) = vertices(inner_src) {
            let ds = inner_src.dim();
            let et = inner_tgt.dim();
            let mut acc = OpNorm::exact(0.0);
            for v in verts {
                let av = Mat::from_fn(et, a.ncols(), |i, k| (0..ds).map(|j| v[j] * a[(i * ds + j, k)]).sum());
                acc = acc.join(route(&av, src, inner_tgt, ctx)?);
            }
            return Ok(acc);
        }
    }
    bounded(a, src, tgt, ctx)
}

/// Maps between hom fibers given by post- or pre-composition.
fn hom_to_hom(a: &Mat, src: &Norm, tgt: &Norm, ctx: Ctx) -> Option<Result<OpNorm>> {
    let (NormExpr::OpNormOf { src: s1, tgt: t1 }, NormExpr::OpNormOf { src: s2, tgt: t2 }) = (src.as_ref(), tgt.as_ref())
    else {
        return None;
    };
    if s1 == s2 {
        if let Some(phi) = left_factor(a, t1.dim(), t2.dim(), s1.dim()) {
            return Some(route(&phi, t1, t2, ctx));
        }
    }
    if t1 == t2 {
        if let Some(psi) = right_factor(a, s1.dim(), s2.dim(), t1.dim()) {
            return Some(route(&psi, s2, s1, ctx));
        }
    }
    None
}

fn max_dual<I: Iterator<Item = Vector>>(src: &Norm, rows: I, ctx: Ctx) -> Result<Option<f64>> {
    let mut best: f64 = 0.0;
    for r in rows {
        match dual_value(src, &r, ctx.tol) {
            Ok(v) => best = best.max(v),
            Err(Error::NoRoute(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(best))
}

/// `sup |A x|_2 / |G x|_2`, finite when `A` vanishes on the null space of `G`.
fn euclidean_source(a: &Mat, g: &Mat) -> Option<f64> {
    let d = g.ncols();
    if linalg::rank(g) == d {
        let l = (g.transpose() * g).cholesky()?.l();
        let linv = l.try_inverse()?;
        return Some(sigma_max(&(a * linv.transpose())));
    }
    let null = linalg::null_space(g);
    if linalg::max_abs(&(a * &null)) > 1e-9 * (1.0 + linalg::max_abs(a)) {
        return Some(f64::INFINITY);
    }
    // Restrict to the orthogonal complement of the null space.
    let range = linalg::null_space(&null.transpose());
    euclidean_source(&(a * &range), &(g * &range))
}

pub(crate) fn sigma_max(a: &Mat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    linalg::svd(a).s[0]
}

fn lp(p: Exponent, v: &[f64]) -> f64 {
    super::eval::lp_value(p, &vec![1.0; v.len()], v)
}

/// Closed-form routes between unweighted leaves.
fn leaf_route(a: &Mat, p: Exponent, q: Exponent) -> Option<f64> {
    let (e, d) = (a.nrows(), a.ncols());
    let col = |j: usize| a.column(j).iter().cloned().collect::<Vec<_>>();
    let row = |i: usize| a.row(i).iter().cloned().collect::<Vec<_>>();
    let pd = super::expr::dual_index(p);
    match (p, q) {
        (Exponent::One, _) => Some((0..d).map(|j| lp(q, &col(j))).fold(0.0, f64::max)),
        (_, Exponent::Inf) => Some((0..e).map(|i| lp(pd, &row(i))).fold(0.0, f64::max)),
        (Exponent::Two, Exponent::Two) => Some(sigma_max(a)),
        (Exponent::Inf, _) if d <= SIGN_CAP && (d <= e || q != Exponent::One || e > SIGN_CAP) => {
            Some(sign_vectors(d).map(|s| lp(q, (a * s).as_slice())).fold(0.0, f64::max))
        }
        (_, Exponent::One) if e <= SIGN_CAP => {
            let at = a.transpose();
            Some(sign_vectors(e).map(|s| lp(pd, (&at * s).as_slice())).fold(0.0, f64::max))
        }
        _ => None,
    }
}

/// Sign vectors with first coordinate `+1` (the rest follow by symmetry).
pub(crate) fn sign_vectors(n: usize) -> impl Iterator<Item = Vector> {
    let count = if n == 0 { 0 } else { 1usize << (n - 1) };
    (0..count).map(move |mask| {
        Vector::from_iterator(n, (0..n).map(|k| if k > 0 && mask >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 }))
    })
}

/// Extreme points (up to sign) of the unit ball of a polytope leaf.
fn vertices(n: &Norm) -> Option<Vec<Vector>> {
    match n.as_ref() {
        NormExpr::Lp { p, weights } => {
            let d = weights.len();
            match p {
                _ if d <= 1 => Some((0..d).map(|_| Vector::from_element(1, 1.0 / weights[0])).collect()),
                Exponent::One => Some(
                    (0..d)
                        .map(|j| {
                            let mut v = Vector::zeros(d);
                            v[j] = 1.0 / weights[j];
                            v
                        })
                        .collect(),
                ),
                Exponent::Inf if d <= SIGN_CAP => Some(
                    sign_vectors(d)
                        .map(|s| Vector::from_iterator(d, s.iter().zip(weights).map(|(s, w)| s / w)))
                        .collect(),
                ),
                _ => None,
            }
        }
        _ => None,
    }
}

fn structured_tol(a: &Mat) -> f64 {
    1e-12 * (1.0 + linalg::max_abs(a))
}

/// `phi` with `A = phi (x) I_d`, i.e. `T -> phi T` on row-major flattened `e x d` matrices.
fn left_factor(a: &Mat, e: usize, e2: usize, d: usize) -> Option<Mat> {
    if a.nrows() != e2 * d || a.ncols() != e * d || d == 0 {
        return None;
    }
    let phi = Mat::from_fn(e2, e, |i, k| a[(i * d, k * d)]);
    let rebuilt = linalg::kron(&phi, &Mat::identity(d, d));
    (linalg::max_abs(&(rebuilt - a)) <= structured_tol(a)).then_some(phi)
}

/// `psi` with `A = I_e (x) psi^T`, i.e. `T -> T psi` for `psi: d2 -> d`.
fn right_factor(a: &Mat, d: usize, d2: usize, e: usize) -> Option<Mat> {
    if a.nrows() != e * d2 || a.ncols() != e * d || e == 0 {
        return None;
    }
    let psi_t = a.view((0, 0), (d2, d)).into_owned();
    let rebuilt = linalg::kron(&Mat::identity(e, e), &psi_t);
    (linalg::max_abs(&(rebuilt - a)) <= structured_tol(a)).then_some(psi_t.transpose())
}

/// Upper bounds by factorization, plus a lower bound by ascent.
fn bounded(a: &Mat, src: &Norm, tgt: &Norm, ctx: Ctx) -> Result<OpNorm> {
    let mut upper = f64::INFINITY;
    let mut lower: f64 = 0.0;
    let mut consider = |r: Result<OpNorm>| -> Result<()> {
        match r {
            Ok(o) => {
                upper = upper.min(o.upper);
                Ok(())
            }
            Err(Error::NoRoute(_)) => Ok(()),
            Err(e) => Err(e),
        }
    };
    if let NormExpr::ComposeLinear { embed, inner } = src.as_ref() {
        // Any extension M with M embed = A bounds the restriction.
        for m in extensions(a, embed) {
            consider(route(&m, inner, tgt, ctx))?;
        }
        if let NormExpr::SupOf(slots) = inner.as_ref() {
            for s in slots {
                let part = embed.rows(s.offset, s.norm.dim()).into_owned();
                for m in extensions(a, &part) {
                    consider(route(&m, &s.norm, tgt, ctx))?;
                }
            }
        }
    }
    if let NormExpr::QuotientOf { ambient, basis, .. } = tgt.as_ref() {
        // Any representative A + B T bounds the quotient map.
        let t = -(linalg::pinv(basis) * a);
        consider(route(&(a + basis * t), src, ambient, ctx))?;
        if a.nrows() == a.ncols() {
            if let Some(rep) = diagonal_rep(a, basis, 0) {
                consider(route(&rep, src, ambient, ctx))?;
            }
        }
        if let NormExpr::SumOf(slots) | NormExpr::SupOf(slots) = ambient.as_ref() {
            for s in slots {
                let rest: Vec<usize> =
                    (0..a.nrows()).filter(|i| *i < s.offset || *i >= s.offset + s.norm.dim()).collect();
                let b_rest = Mat::from_fn(rest.len(), basis.ncols(), |i, j| basis[(rest[i], j)]);
                let a_rest = Mat::from_fn(rest.len(), a.ncols(), |i, j| a[(rest[i], j)]);
                let t = -(linalg::pinv(&b_rest) * &a_rest);
                if linalg::max_abs(&(&b_rest * &t + &a_rest)) <= 1e-10 * (1.0 + linalg::max_abs(a)) {
                    consider(route(&(a + basis * &t), src, ambient, ctx))?;
                }
                if s.norm.dim() == a.ncols() && a.nrows() > a.ncols() {
                    if let Some(rep) = diagonal_rep(a, basis, s.offset) {
                        consider(route(&rep, src, ambient, ctx))?;
                    }
                }
            }
        }
    }
    if let NormExpr::SumOf(slots) = tgt.as_ref() {
        let mut total = 0.0;
        let mut parts = Some(());
        for s in slots {
            let block = a.rows(s.offset, s.norm.dim()).into_owned();
            match route(&block, src, &s.norm, ctx) {
                Ok(o) => {
                    total += o.upper;
                    lower = lower.max(o.value);
                }
                Err(Error::NoRoute(_)) => parts = None,
                Err(e) => return Err(e),
            }
        }
        if parts.is_some() {
            upper = upper.min(total);
        }
    }
    if let NormExpr::SupOf(slots) = src.as_ref() {
        let mut total = 0.0;
        for s in slots {
            let block = a.columns(s.offset, s.norm.dim()).into_owned();
            let o = route(&block, &s.norm, tgt, ctx)?;
            total += o.upper;
            lower = lower.max(o.value);
        }
        upper = upper.min(total);
    }
    if ctx.want_lower || !upper.is_finite() {
        lower = lower.max(ascent(a, src, tgt, ctx.tol)?);
    }
    if !ctx.want_lower && upper.is_finite() {
        return Ok(OpNorm { value: upper, upper, exact: false });
    }
    Ok(OpNorm::bounds(lower, upper))
}

/// Projection of a sup-embedded norm onto one of its blocks, or the injection
/// of a block into a quotient of a sum. Both are contractions by construction.
fn slot_map(a: &Mat, src: &Norm, tgt: &Norm) -> bool {
    let tol = structured_tol(a);
    if let NormExpr::ComposeLinear { embed, inner } = src.as_ref() {
        if let NormExpr::SupOf(slots) = inner.as_ref() {
            let hit = slots.iter().any(|s| {
                s.norm.dim() == a.nrows()
                    && s.norm == *tgt
                    && linalg::max_abs(&(embed.rows(s.offset, a.nrows()) - a)) <= tol
            });
            if hit {
                return true;
            }
        }
    }
    let (embed, inner) = match tgt.as_ref() {
        NormExpr::ComposeLinear { embed, inner } => (Some(embed), inner),
        _ => (None, tgt),
    };
    if let NormExpr::QuotientOf { ambient, basis, .. } = inner.as_ref() {
        if let NormExpr::SumOf(slots) = ambient.as_ref() {
            let image = match embed {
                Some(e) => e * a,
                None => a.clone(),
            };
            return slots.iter().any(|s| {
                if s.norm.dim() != a.ncols() || s.norm != *src {
                    return false;
                }
                let mut r = image.clone();
                for j in 0..a.ncols() {
                    r[(s.offset + j, j)] -= 1.0;
                }
                let fit = basis * (linalg::pinv(basis) * &r);
                linalg::max_abs(&(fit - &r)) <= tol * (1.0 + linalg::max_abs(&r))
            });
        }
    }
    false
}

/// A representative `A + B T` whose column `j` is a multiple of
/// `e_(offset + j)`: scaled injections of one block, when one exists.
fn diagonal_rep(a: &Mat, basis: &Mat, offset: usize) -> Option<Mat> {
    let (n, k) = (a.nrows(), basis.ncols());
    let scale = 1e-10 * (1.0 + linalg::max_abs(a));
    let mut rep = Mat::zeros(n, a.ncols());
    for j in 0..a.ncols() {
        let mut sys = Mat::zeros(n, k + 1);
        sys.view_mut((0, 0), (n, k)).copy_from(basis);
        sys[(offset + j, k)] = -1.0;
        let rhs = -a.column(j).into_owned();
        let x = linalg::lstsq(&sys, &Mat::from_column_slice(n, 1, rhs.as_slice()));
        let col = a.column(j) + basis * x.rows(0, k);
        let mut want = Vector::zeros(n);
        want[offset + j] = x[(k, 0)];
        if linalg::max_abs_vec(&(&col - &want)) > scale {
            return None;
        }
        rep.set_column(j, &want);
    }
    Some(rep)
}

/// Solutions `M` of `M part = A`: the minimum-norm one and, when shapes
/// allow, the one acting as the identity off the range of `part`.
fn extensions(a: &Mat, part: &Mat) -> Vec<Mat> {
    let pinv = linalg::pinv(part);
    let base = a * &pinv;
    let scale = 1e-10 * (1.0 + linalg::max_abs(a));
    if linalg::max_abs(&(&base * part - a)) > scale {
        return Vec::new();
    }
    let mut out = vec![base.clone()];
    if a.nrows() == part.nrows() {
        let n = part.nrows();
        // Row-wise scalings of `part`: weighted coordinate projections land here.
        let diag = Vector::from_fn(n, |r, _| {
            let p = part.row(r);
            let pp = p.dot(&p);
            if pp > 0.0 {
                a.row(r).dot(&p) / pp
            } else {
                0.0
            }
        });
        let d = Mat::from_diagonal(&diag);
        if linalg::max_abs(&(&d * part - a)) <= scale {
            out.push(d);
        }
        let off_range = Mat::identity(n, n) - part * &pinv;
        out.push(base + off_range);
    }
    out
}

fn ratio(a: &Mat, src: &Norm, tgt: &Norm, x: &Vector, tol: f64) -> Result<f64> {
    let s = eval(src, x, tol)?;
    if s <= 1e-300 {
        return Ok(0.0);
    }
    Ok(eval(tgt, &(a * x), tol)? / s)
}

/// Multi-start pattern search for `tgt(A x) / src(x)`; a lower bound.
fn ascent(a: &Mat, src: &Norm, tgt: &Norm, tol: f64) -> Result<f64> {
    let d = a.ncols();
    let mut starts: Vec<Vector> = Vec::new();
    for j in 0..d {
        let mut v = Vector::zeros(d);
        v[j] = 1.0;
        starts.push(v);
    }
    if d <= 8 {
        starts.extend(sign_vectors(d));
    }
    // Right singular vectors of A point where A stretches most in l2 terms.
    let v = linalg::svd(a).v;
    for i in 0..v.ncols() {
        starts.push(v.column(i).into_owned());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        starts.push(Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)));
    }
    let mut scored: Vec<(f64, Vector)> = Vec::with_capacity(starts.len());
    for s in starts {
        scored.push((ratio(a, src, tgt, &s, tol)?, s));
    }
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut best = scored.first().map_or(0.0, |s| s.0);
    for (mut val, mut x) in scored.into_iter().take(3) {
        let mut h = 0.5 * linalg::max_abs_vec(&x).max(1e-12);
        let mut budget = 400;
        while h > 1e-7 * linalg::max_abs_vec(&x) && budget > 0 {
            let mut improved = false;
            for j in 0..d {
                for sgn in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[j] += sgn * h;
                    let r = ratio(a, src, tgt, &y, tol)?;
                    budget -= 1;
                    if r > val {
                        val = r;
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best = best.max(val);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(p: Exponent, d: usize) -> Norm {
        NormExpr::unit(p, d)
    }

    #[test]
    fn spec_examples() {
        let id = Mat::identity(2, 2);
        let r = op_norm(&id, &unit(Exponent::One, 2), &unit(Exponent::Inf, 2), 1e-9).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.exact);
        let zero = Mat::zeros(2, 2);
        assert_eq!(op_norm(&zero, &unit(Exponent::Two, 2), &unit(Exponent::Two, 2), 1e-9).unwrap().value, 0.0);
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let r = op_norm(&a, &unit(Exponent::Two, 2), &unit(Exponent::Two, 2), 1e-9).unwrap();
        assert!((r.value - golden).abs() < 1e-12);
    }

    #[test]
    fn weighted_leaves_rescale() {
        // x -> x from (R, 2|.|) to (R, 3|.|) has norm 3/2.
        let src = NormExpr::lp(Exponent::Two, vec![2.0]).unwrap();
        let tgt = NormExpr::lp(Exponent::One, vec![3.0]).unwrap();
        let r = op_norm(&Mat::identity(1, 1), &src, &tgt, 1e-9).unwrap();
        assert!((r.value - 1.5).abs() < 1e-15);
    }

    #[test]
    fn sign_vectors_cover_half_the_cube() {
        let all: Vec<Vector> = sign_vectors(3).collect();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|s| s[0] == 1.0));
    }

    #[test]
    fn restricted_source_bounded_by_factorization() {
        // Diagonal of (R^2, l2) x (R^2, l2) with sup norm; projection to the first factor has norm 1.
        let k = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]) / 2f64.sqrt();
        let sup = NormExpr::sup(vec![unit(Exponent::Two, 2), unit(Exponent::Two, 2)]);
        let src = NormExpr::compose(k.clone(), sup).unwrap();
        let leg = k.rows(0, 2).into_owned();
        let r = op_norm(&leg, &src, &unit(Exponent::Two, 2), 1e-9).unwrap();
        assert!((r.upper - 1.0).abs() < 1e-12, "{r:?}");
        assert!((r.value - 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn hom_post_composition_is_factor_norm() {
        let m = unit(Exponent::Two, 2);
        let n = unit(Exponent::One, 2);
        let q = unit(Exponent::Inf, 2);
        let phi = Mat::from_row_slice(2, 2, &[0.5, 0.25, -0.25, 0.5]);
        let a = linalg::kron(&phi, &Mat::identity(2, 2));
        let hom_mn = NormExpr::op_norm(m.clone(), n.clone());
        let hom_mq = NormExpr::op_norm(m, q.clone());
        let r = op_norm(&a, &hom_mn, &hom_mq, 1e-9).unwrap();
        let direct = op_norm(&phi, &n, &q, 1e-9).unwrap();
        assert!(r.exact);
        assert!((r.value - direct.value).abs() < 1e-15);
    }
}
