//! Finite truncations of the infinite counterexamples: exact per-level
//! values plus a trend verdict. None of them claims the infinite statement.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{mediating_morphism, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::functors::{nat_cokernel, nat_kernel, NatTrans};
use crate::limits::{inverse_limit, Cone, Direction, PosetSystem};
use crate::linalg::{self, Mat, Vector};
use crate::measure::dirac_point;
use crate::modcat::{compose, is_epi, is_mono, ModuleObj, Morphism};
use crate::normcalc::{eval_norm, op_norm, Exponent, NormExpr, DEFAULT_TOL};

pub const DEMOS: [&str; 4] = ["not-balanced", "inverse-trivial", "inverse-cokernel", "direct-kernel"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub schema_version: u32,
    pub example: String,
    pub quantity: String,
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    pub monotone: bool,
    pub verdict: String,
    /// Per-level boolean facts, by name.
    pub checks: BTreeMap<String, Vec<bool>>,
    pub notes: Vec<String>,
}

impl TrendReport {
    fn new(example: &str, quantity: &str, levels: Vec<usize>, values: Vec<f64>) -> Self {
        let up = values.windows(2).all(|w| w[1] >= w[0]);
        let down = values.windows(2).all(|w| w[1] <= w[0]);
        let verdict = match (values.first(), values.last()) {
            (Some(a), Some(b)) if b > a && up => "diverges",
            (Some(a), Some(b)) if b < a && down => "decays to zero",
            _ if up && down => "constant",
            _ => "mixed",
        };
        TrendReport {
            schema_version: SCHEMA_VERSION,
            example: example.to_string(),
            quantity: quantity.to_string(),
            levels,
            values,
            monotone: up || down,
            verdict: verdict.to_string(),
            checks: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

/// Runs a demo by name.
pub fn demo(name: &str, levels: usize) -> Result<TrendReport> {
    match name {
        "not-balanced" => demo_not_balanced(levels),
        "inverse-trivial" => demo_inverse_trivial(levels),
        "inverse-cokernel" => demo_inverse_cokernel(levels),
        "direct-kernel" => demo_direct_kernel(levels),
        other => Err(Error::UnknownConstruction(other.to_string())),
    }
}

fn at_least(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidSystem(format!("need at least {min} levels, got {n}")));
    }
    Ok(())
}

fn point_module(p: Exponent, d: usize) -> ModuleObj {
    ModuleObj::uniform(&dirac_point(), NormExpr::unit(p, d))
}

/// `diag(1, 1/2, ..., 1/k)` on `linf^k`: mono and epi with inverse of norm `k`.
pub fn demo_not_balanced(n: usize) -> Result<TrendReport> {
    at_least(n, 1)?;
    let mut values = Vec::with_capacity(n);
    let (mut mono, mut epi) = (Vec::new(), Vec::new());
    for k in 1..=n {
        let m = point_module(Exponent::Inf, k);
        let diag = Mat::from_diagonal(&Vector::from_fn(k, |i, _| 1.0 / (i + 1) as f64));
        let phi = Morphism::new(&m, &m, vec![diag.clone()])?;
        mono.push(is_mono(&phi));
        epi.push(is_epi(&phi));
        let inv = linalg::inverse(&diag).ok_or(Error::RankDeficient)?;
        values.push(op_norm(&inv, m.norm(0), m.norm(0), DEFAULT_TOL)?.value);
    }
    let mut r = TrendReport::new("not-balanced", "inverse operator norm", (1..=n).collect(), values);
    r.checks.insert("mono".into(), mono);
    r.checks.insert("epi".into(), epi);
    r.notes.push("every level is bijective, but the inverse norm grows with the level".into());
    r.notes.push("the limiting map is injective with dense range and no bounded inverse; that needs infinitely many coordinates and is not computed".into());
    Ok(r)
}

/// Chain `0 <- 1 <- ... <- k-1` of copies of `m` with maps `(i+1)/(j+1) id`.
fn shrinking_chain(m: &ModuleObj, k: usize) -> Result<PosetSystem> {
    let steps = (0..k.saturating_sub(1))
        .map(|i| Morphism::identity(m).scaled_unchecked((i + 1) as f64 / (i + 2) as f64))
        .collect();
    PosetSystem::chain(vec![m.clone(); k], steps, Direction::Inverse)
}

fn constant_chain(m: &ModuleObj, k: usize, dir: Direction) -> Result<PosetSystem> {
    PosetSystem::chain(vec![m.clone(); k], vec![Morphism::identity(m); k.saturating_sub(1)], dir)
}

/// Pointwise norm of the thread of the truncated shrinking system through
/// `k v` at the top level, for `k = 1..=n`.
pub fn thread_norms(n: usize, v: &[f64]) -> Result<Vec<f64>> {
    let m = point_module(Exponent::Two, v.len());
    (1..=n)
        .map(|k| {
            let lim = inverse_limit(&shrinking_chain(&m, k)?)?;
            let top = lim.legs[k - 1].mat(0);
            let target = Mat::from_column_slice(v.len(), 1, v) * k as f64;
            let y = linalg::lstsq(top, &target);
            eval_norm(lim.apex.norm(0), y.as_slice(), DEFAULT_TOL)
        })
        .collect()
}

/// Threads `(i v)_i` of the system with maps `(i/j) id`: norm `n |v|`.
pub fn demo_inverse_trivial(n: usize) -> Result<TrendReport> {
    at_least(n, 1)?;
    let v = [0.6, 0.8];
    let values = thread_norms(n, &v)?;
    let mut r = TrendReport::new("inverse-trivial", "thread pointwise norm", (1..=n).collect(), values);
    r.notes.push("base vector has pointwise norm 1; the thread through level n carries n v".into());
    r.notes.push("the norms grow without bound, so over all of N only the zero thread survives".into());
    Ok(r)
}

/// `theta_k = (1/k) id` from the shrinking system to the constant one:
/// cokernels vanish at every level while the induced map between the
/// truncated limits has norm `1/n`.
pub fn demo_inverse_cokernel(n: usize) -> Result<TrendReport> {
    at_least(n, 2)?;
    let m = point_module(Exponent::Two, 1);
    let mut values = Vec::with_capacity(n);
    let mut zero = Vec::with_capacity(n);
    for k in 1..=n {
        let src = shrinking_chain(&m, k)?;
        let tgt = constant_chain(&m, k, Direction::Inverse)?;
        let thetas: Vec<Morphism> =
            (1..=k).map(|i| Morphism::identity(&m).scaled_unchecked(1.0 / i as f64)).collect();
        let eta = NatTrans::new(src.to_diagram(Direction::Inverse)?, tgt.to_diagram(Direction::Inverse)?, thetas.clone())?;
        let (coker, _) = nat_cokernel(&eta)?;
        zero.push(coker.objects.iter().all(ModuleObj::is_zero));
        let lim_src = inverse_limit(&src)?;
        let lim_tgt = inverse_limit(&tgt)?;
        let legs = thetas.iter().zip(&lim_src.legs).map(|(t, l)| compose(t, l)).collect::<Result<Vec<_>>>()?;
        let cone = Cone { apex: lim_src.apex.clone(), legs };
        let (induced, _) = mediating_morphism(&lim_tgt, &cone)?;
        values.push(op_norm(induced.mat(0), lim_src.apex.norm(0), lim_tgt.apex.norm(0), DEFAULT_TOL)?.value);
    }
    let mut r = TrendReport::new("inverse-cokernel", "induced limit map norm", (1..=n).collect(), values);
    r.checks.insert("cokernels zero".into(), zero);
    r.notes.push("each theta_k is onto, so the objectwise cokernels are zero".into());
    r.notes.push("over all of N the source limit is zero while the target limit is the base module, so the cokernel of the limit map is the base module; finite levels only show the norm of that map tending to zero".into());
    Ok(r)
}

/// Inside `l2^k`: `M_j = span(v_1, e_2, ..., e_j)` with `v_1 = (1/i)_i`,
/// `theta` kills the first coordinate. Only the top level has a kernel.
pub fn demo_direct_kernel(n: usize) -> Result<TrendReport> {
    at_least(n, 1)?;
    let mut values = Vec::with_capacity(n);
    let mut lower_injective = Vec::with_capacity(n);
    for k in 1..=n {
        let ambient = point_module(Exponent::Two, k);
        let mut kill = Mat::identity(k, k);
        kill[(0, 0)] = 0.0;
        let basis = |j: usize| {
            let mut b = Mat::zeros(k, j);
            for i in 0..k {
                b[(i, 0)] = 1.0 / (i + 1) as f64;
            }
            for c in 1..j {
                b[(c, c)] = 1.0;
            }
            b
        };
        let modules = (1..=k)
            .map(|j| ModuleObj::from_norms(dirac_point(), vec![NormExpr::compose(basis(j), ambient.norm(0).clone())?]))
            .collect::<Result<Vec<_>>>()?;
        let steps = (0..k - 1)
            .map(|j| {
                let mut inc = Mat::zeros(j + 2, j + 1);
                inc.view_mut((0, 0), (j + 1, j + 1)).fill_with_identity();
                Morphism::new(&modules[j], &modules[j + 1], vec![inc])
            })
            .collect::<Result<Vec<_>>>()?;
        let src = PosetSystem::chain(modules.clone(), steps, Direction::Direct)?;
        let tgt = constant_chain(&ambient, k, Direction::Direct)?;
        let thetas = (1..=k)
            .map(|j| Morphism::new(&modules[j - 1], &ambient, vec![&kill * basis(j)]))
            .collect::<Result<Vec<_>>>()?;
        let eta = NatTrans::new(src.to_diagram(Direction::Direct)?, tgt.to_diagram(Direction::Direct)?, thetas)?;
        let (ker, _) = nat_kernel(&eta)?;
        let dims: Vec<usize> = ker.objects.iter().map(|o| o.dim(0)).collect();
        lower_injective.push(dims[..k - 1].iter().all(|&d| d == 0));
        values.push(dims[k - 1] as f64);
    }
    let mut r = TrendReport::new("direct-kernel", "kernel dimension at the top level", (1..=n).collect(), values);
    r.checks.insert("lower levels injective".into(), lower_injective);
    r.notes.push("in l2^k the top subspace is everything and theta has the one-dimensional kernel span(e_1)".into());
    r.notes.push("with infinitely many coordinates every level is injective, so the kernels vanish while the limit map is not injective; the truncation cannot show that and only certifies the per-level values".into());
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_balanced_levels() {
        let r = demo_not_balanced(4).unwrap();
        assert_eq!(r.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(r.checks["mono"].iter().all(|&b| b) && r.checks["epi"].iter().all(|&b| b));
        assert_eq!(r.verdict, "diverges");
        assert_eq!(demo_not_balanced(1).unwrap().values, vec![1.0]);
    }

    #[test]
    fn threads_grow_linearly() {
        let r = demo_inverse_trivial(6).unwrap();
        for (k, v) in r.values.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-12, "{v}");
        }
        assert!(thread_norms(3, &[0.0, 0.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cokernel_demo() {
        let r = demo_inverse_cokernel(5).unwrap();
        assert!((r.values[4] - 0.2).abs() < 1e-12, "{:?}", r.values);
        assert!(r.checks["cokernels zero"].iter().all(|&b| b));
        assert!(demo_inverse_cokernel(1).is_err());
    }

    #[test]
    fn kernel_demo() {
        let r = demo_direct_kernel(4).unwrap();
        assert_eq!(r.values, vec![1.0; 4]);
        assert!(r.checks["lower levels injective"].iter().all(|&b| b));
        assert_eq!(r.verdict, "constant");
    }
}
