//! Norm expression trees.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

pub type Norm = Arc<NormExpr>;

/// Exponent of an `lp` leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    One,
    Two,
    Inf,
}

/// Hölder conjugate.
pub fn dual_index(p: Exponent) -> Exponent {
    match p {
        Exponent::One => Exponent::Inf,
        Exponent::Two => Exponent::Two,
        Exponent::Inf => Exponent::One,
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::One => s.serialize_u8(1),
            Exponent::Two => s.serialize_u8(2),
            Exponent::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) if n.as_f64() == Some(1.0) => Ok(Exponent::One),
            serde_json::Value::Number(n) if n.as_f64() == Some(2.0) => Ok(Exponent::Two),
            serde_json::Value::String(s) if s == "inf" || s == "∞" => Ok(Exponent::Inf),
            other => Err(serde::de::Error::custom(format!("p must be 1, 2 or \"inf\", got {other}"))),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::One => write!(f, "1"),
            Exponent::Two => write!(f, "2"),
            Exponent::Inf => write!(f, "inf"),
        }
    }
}

/// A child of a sup/sum combinator acting on `offset..offset + dim(norm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub norm: Norm,
    pub offset: usize,
}

/// Memo of solved subproblems keyed by the input bits. Invisible to equality.
#[derive(Default)]
pub struct EvalCache(Mutex<HashMap<Vec<u64>, f64>>);

const CACHE_CAP: usize = 4096;

impl EvalCache {
    pub(crate) fn get(&self, key: &[u64]) -> Option<f64> {
        self.0.lock().ok()?.get(key).copied()
    }

    pub(crate) fn put(&self, key: Vec<u64>, value: f64) {
        if let Ok(mut m) = self.0.lock() {
            if m.len() >= CACHE_CAP {
                m.clear();
            }
            m.insert(key, value);
        }
    }
}

impl Clone for EvalCache {
    fn clone(&self) -> Self {
        EvalCache::default()
    }
}

impl PartialEq for EvalCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Debug for EvalCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EvalCache")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormExpr {
    /// `x -> ||(w_j x_j)_j||_p`.
    Lp { p: Exponent, weights: Vec<f64> },
    /// Maximum of the children on their slices.
    SupOf(Vec<Slot>),
    /// Sum of the children on their slices.
    SumOf(Vec<Slot>),
    /// `x -> inf_t ambient(x + basis t)`; a seminorm vanishing on the span.
    QuotientOf { ambient: Norm, basis: Mat, cache: EvalCache },
    /// `a -> sup { <a, x> : inner(x) <= 1 }`.
    DualOf { inner: Norm, cache: EvalCache },
    /// Operator norm of a row-major flattened `dim(tgt) x dim(src)` matrix.
    OpNormOf { src: Norm, tgt: Norm },
    /// `x -> inner(embed x)`.
    ComposeLinear { embed: Mat, inner: Norm },
}

impl NormExpr {
    pub fn lp(p: Exponent, weights: Vec<f64>) -> Result<Norm> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidNorm(format!("weight {w} is not positive")));
        }
        Ok(Arc::new(NormExpr::Lp { p, weights }))
    }

    /// Unweighted `lp` norm on `dim` coordinates.
    pub fn unit(p: Exponent, dim: usize) -> Norm {
        Arc::new(NormExpr::Lp { p, weights: vec![1.0; dim] })
    }

    /// Children laid out contiguously in the given order.
    pub fn sup(children: Vec<Norm>) -> Norm {
        Arc::new(NormExpr::SupOf(stack(children)))
    }

    pub fn sum(children: Vec<Norm>) -> Norm {
        Arc::new(NormExpr::SumOf(stack(children)))
    }

    pub fn sup_slots(slots: Vec<Slot>) -> Result<Norm> {
        check_partition(&slots)?;
        Ok(Arc::new(NormExpr::SupOf(slots)))
    }

    pub fn sum_slots(slots: Vec<Slot>) -> Result<Norm> {
        check_partition(&slots)?;
        Ok(Arc::new(NormExpr::SumOf(slots)))
    }

    pub fn quotient(ambient: Norm, basis: Mat) -> Result<Norm> {
        if basis.nrows() != ambient.dim() {
            return Err(Error::DimensionMismatch { expected: ambient.dim(), got: basis.nrows() });
        }
        if linalg::rank(&basis) < basis.ncols() {
            return Err(Error::RankDeficient);
        }
        Ok(Arc::new(NormExpr::QuotientOf { ambient, basis, cache: EvalCache::default() }))
    }

    pub fn dual(inner: Norm) -> Norm {
        Arc::new(NormExpr::DualOf { inner, cache: EvalCache::default() })
    }

    pub fn op_norm(src: Norm, tgt: Norm) -> Norm {
        Arc::new(NormExpr::OpNormOf { src, tgt })
    }

    pub fn compose(embed: Mat, inner: Norm) -> Result<Norm> {
        if embed.nrows() != inner.dim() {
            return Err(Error::DimensionMismatch { expected: inner.dim(), got: embed.nrows() });
        }
        if linalg::rank(&embed) < embed.ncols() {
            return Err(Error::RankDeficient);
        }
        Ok(Arc::new(NormExpr::ComposeLinear { embed, inner }))
    }

    /// `x -> inner(embed x)` without the rank condition: a seminorm when
    /// `embed` has a kernel.
    pub fn seminorm(embed: Mat, inner: Norm) -> Result<Norm> {
        if embed.nrows() != inner.dim() {
            return Err(Error::DimensionMismatch { expected: inner.dim(), got: embed.nrows() });
        }
        Ok(Arc::new(NormExpr::ComposeLinear { embed, inner }))
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        match self {
            NormExpr::Lp { weights, .. } => weights.len(),
            NormExpr::SupOf(s) | NormExpr::SumOf(s) => s.iter().map(|c| c.norm.dim()).sum(),
            NormExpr::QuotientOf { ambient, .. } => ambient.dim(),
            NormExpr::DualOf { inner, .. } => inner.dim(),
            NormExpr::OpNormOf { src, tgt } => src.dim() * tgt.dim(),
            NormExpr::ComposeLinear { embed, .. } => embed.ncols(),
        }
    }

    /// Unweighted leaf exponent, if this is an `lp` leaf with unit weights.
    pub fn unit_leaf(&self) -> Option<Exponent> {
        match self {
            NormExpr::Lp { p, weights } if weights.iter().all(|&w| w == 1.0) => Some(*p),
            _ => None,
        }
    }

    /// Whether any node below needs an optimization to evaluate.
    pub fn needs_solver(&self) -> bool {
        match self {
            NormExpr::Lp { .. } => false,
            NormExpr::SupOf(s) | NormExpr::SumOf(s) => s.iter().any(|c| c.norm.needs_solver()),
            NormExpr::ComposeLinear { inner, .. } => inner.needs_solver(),
            _ => true,
        }
    }
}

fn stack(children: Vec<Norm>) -> Vec<Slot> {
    let mut offset = 0;
    children
        .into_iter()
        .map(|norm| {
            let slot = Slot { offset, norm };
            offset += slot.norm.dim();
            slot
        })
        .collect()
}

fn check_partition(slots: &[Slot]) -> Result<()> {
    let mut ranges: Vec<(usize, usize)> = slots.iter().map(|s| (s.offset, s.offset + s.norm.dim())).collect();
    ranges.sort();
    let mut next = 0;
    for (a, b) in ranges {
        if a != next {
            return Err(Error::InvalidNorm("slices do not partition the coordinates".into()));
        }
        next = b;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawNorm {
    Lp { p: Exponent, weights: Vec<f64> },
    Sup(Vec<RawSlot>),
    Sum(Vec<RawSlot>),
    Quotient { ambient: Box<RawNorm>, basis: Vec<Vec<f64>> },
    Dual(Box<RawNorm>),
    OpNorm { src: Box<RawNorm>, tgt: Box<RawNorm> },
    Compose { embed: Vec<Vec<f64>>, inner: Box<RawNorm> },
}

#[derive(Serialize, Deserialize)]
struct RawSlot {
    norm: RawNorm,
    slice: [usize; 2],
}

pub(crate) fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

pub(crate) fn columns_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().cloned().collect()).collect()
}

pub(crate) fn mat_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Mat> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl From<&NormExpr> for RawNorm {
    fn from(n: &NormExpr) -> Self {
        let slots = |s: &[Slot]| {
            s.iter()
                .map(|c| RawSlot { norm: c.norm.as_ref().into(), slice: [c.offset, c.offset + c.norm.dim()] })
                .collect()
        };
        match n {
            NormExpr::Lp { p, weights } => RawNorm::Lp { p: *p, weights: weights.clone() },
            NormExpr::SupOf(s) => RawNorm::Sup(slots(s)),
            NormExpr::SumOf(s) => RawNorm::Sum(slots(s)),
            NormExpr::QuotientOf { ambient, basis, .. } => {
                RawNorm::Quotient { ambient: Box::new(ambient.as_ref().into()), basis: columns_of(basis) }
            }
            NormExpr::DualOf { inner, .. } => RawNorm::Dual(Box::new(inner.as_ref().into())),
            NormExpr::OpNormOf { src, tgt } => {
                RawNorm::OpNorm { src: Box::new(src.as_ref().into()), tgt: Box::new(tgt.as_ref().into()) }
            }
            NormExpr::ComposeLinear { embed, inner } => {
                RawNorm::Compose { embed: rows_of(embed), inner: Box::new(inner.as_ref().into()) }
            }
        }
    }
}

impl TryFrom<RawNorm> for Norm {
    type Error = Error;
    fn try_from(raw: RawNorm) -> Result<Norm> {
        let slots = |s: Vec<RawSlot>| -> Result<Vec<Slot>> {
            s.into_iter()
                .map(|c| {
                    let norm = Norm::try_from(c.norm)?;
                    if c.slice[1] < c.slice[0] || c.slice[1] - c.slice[0] != norm.dim() {
                        return Err(Error::InvalidNorm("slice length differs from child dimension".into()));
                    }
                    Ok(Slot { norm, offset: c.slice[0] })
                })
                .collect()
        };
        match raw {
            RawNorm::Lp { p, weights } => NormExpr::lp(p, weights),
            RawNorm::Sup(s) => NormExpr::sup_slots(slots(s)?),
            RawNorm::Sum(s) => NormExpr::sum_slots(slots(s)?),
            RawNorm::Quotient { ambient, basis } => {
                let ambient = Norm::try_from(*ambient)?;
                let n = ambient.dim();
                let cols = mat_from_rows(&basis, n)?;
                NormExpr::quotient(ambient, cols.transpose())
            }
            RawNorm::Dual(inner) => Ok(NormExpr::dual(Norm::try_from(*inner)?)),
            RawNorm::OpNorm { src, tgt } => Ok(NormExpr::op_norm(Norm::try_from(*src)?, Norm::try_from(*tgt)?)),
            RawNorm::Compose { embed, inner } => {
                let inner = Norm::try_from(*inner)?;
                let ncols = embed.first().map_or(0, |r| r.len());
                NormExpr::compose(mat_from_rows(&embed, ncols)?, inner)
            }
        }
    }
}

impl Serialize for NormExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawNorm::from(self).serialize(s)
    }
}

/// Parse and validate a norm expression.
pub fn parse_norm(value: serde_json::Value) -> Result<Norm> {
    let raw: RawNorm = serde_json::from_value(value)?;
    Norm::try_from(raw)
}

/// Serde adapter for `Norm` fields.
pub mod norm_serde {
    use super::*;

    pub fn serialize<S: Serializer>(n: &Norm, s: S) -> std::result::Result<S::Ok, S::Error> {
        n.as_ref().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Norm, D::Error> {
        let raw = RawNorm::deserialize(d)?;
        Norm::try_from(raw).map_err(serde::de::Error::custom)
    }
}
