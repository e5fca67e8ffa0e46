//! Symbolic dual norms.

use crate::linalg::{self, Mat};

use super::eval::eval_vec;
use super::expr::{Norm, NormExpr, Slot};

/// Value of a one-dimensional norm at `1`.
pub(crate) fn scalar_weight(n: &Norm) -> Option<f64> {
    if n.dim() != 1 {
        return None;
    }
    let c = eval_vec(n, &linalg::Vector::from_element(1, 1.0), 1e-12).ok()?;
    (c.is_finite() && c > 0.0).then_some(c)
}

/// Projection rows `P` with `P lift = I` and `P basis = 0`, when `[lift | basis]` is invertible.
pub(crate) fn quotient_projection(lift: &Mat, basis: &Mat) -> Option<Mat> {
    let n = lift.nrows();
    if basis.nrows() != n || lift.ncols() + basis.ncols() != n {
        return None;
    }
    let inv = linalg::inverse(&linalg::hstack(&[lift, basis], n))?;
    Some(inv.rows(0, lift.ncols()).into_owned())
}

/// A norm expression for the dual, when the closure of the family contains one.
/// Bare quotients have no finite dual off the annihilator and return `None`.
pub fn dual_expr(n: &Norm) -> Option<Norm> {
    match n.as_ref() {
        NormExpr::Lp { p, weights } => Some(std::sync::Arc::new(NormExpr::Lp {
            p: super::expr::dual_index(*p),
            weights: weights.iter().map(|w| 1.0 / w).collect(),
        })),
        NormExpr::SupOf(slots) => {
            let duals = dual_slots(slots)?;
            Some(std::sync::Arc::new(NormExpr::SumOf(duals)))
        }
        NormExpr::SumOf(slots) => {
            let duals = dual_slots(slots)?;
            Some(std::sync::Arc::new(NormExpr::SupOf(duals)))
        }
        NormExpr::ComposeLinear { embed, inner } => {
            if embed.nrows() == embed.ncols() {
                let inv = linalg::inverse(embed)?;
                return NormExpr::compose(inv.transpose(), dual_expr(inner)?).ok();
            }
            if let NormExpr::QuotientOf { ambient, basis, .. } = inner.as_ref() {
                if let Some(p) = quotient_projection(embed, basis) {
                    return NormExpr::compose(p.transpose(), dual_expr(ambient)?).ok();
                }
            }
            // Dual of a restriction: quotient of the dual by the annihilator.
            let gram = embed.transpose() * embed;
            let lift = embed * linalg::inverse(&gram)?;
            let annihilator = linalg::null_space(&embed.transpose());
            let q = NormExpr::quotient(dual_expr(inner)?, annihilator).ok()?;
            NormExpr::compose(lift, q).ok()
        }
        NormExpr::QuotientOf { .. } => None,
        NormExpr::DualOf { inner, .. } => Some(inner.clone()),
        NormExpr::OpNormOf { src, tgt } => {
            if let Some(c) = scalar_weight(tgt) {
                let d = src.dim();
                return NormExpr::compose(Mat::identity(d, d) / c, src.clone()).ok();
            }
            if let Some(c) = scalar_weight(src) {
                let e = tgt.dim();
                return NormExpr::compose(Mat::identity(e, e) * c, dual_expr(tgt)?).ok();
            }
            None
        }
    }
}

fn dual_slots(slots: &[Slot]) -> Option<Vec<Slot>> {
    slots
        .iter()
        .map(|s| Some(Slot { norm: dual_expr(&s.norm)?, offset: s.offset }))
        .collect()
}
