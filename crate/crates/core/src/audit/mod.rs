//! Randomized checks of universal properties, isometry tests and the
//! truncated counterexamples.

mod demos;
mod random;
mod suite;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::colimits::Cocone;
use crate::error::Result;
use crate::limits::{Cone, Diagram};
use crate::linalg::{self, Mat, Vector};
use crate::modcat::{ModuleObj, Morphism};
use crate::normcalc::{eval_norm, sign_vectors, DEFAULT_TOL};

pub use demos::{demo, demo_direct_kernel, demo_inverse_cokernel, demo_inverse_trivial, demo_not_balanced, TrendReport, DEMOS};
pub use random::{AuditConfig, Sampler, Shape, SHAPES};
pub use suite::{
    comparison_norms, engine_agreement, run_audit, specialized_colimit, specialized_limit, Agreement, Built, CONSTRUCTIONS,
};

pub const SCHEMA_VERSION: u32 = 1;

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub trial: usize,
    pub check: String,
    pub atom: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDiag {
    pub trial: usize,
    /// Mediator existence residual.
    pub residual: f64,
    /// Commutation residual of the constructed legs.
    pub commutation: f64,
    pub unique: bool,
    pub dims: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub construction: String,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    /// Scale applied to one constructed leg per trial, when injecting faults.
    pub fault: Option<f64>,
    pub passed: bool,
    pub verdict: String,
    pub max_residual: f64,
    pub residuals: Vec<f64>,
    pub uniqueness_certified: bool,
    pub failures: Vec<Failure>,
    pub diagnostics: Vec<TrialDiag>,
    /// Not serialized, so reports are byte-reproducible.
    #[serde(skip)]
    pub wall_time_ms: u64,
}

impl AuditReport {
    fn assemble(construction: &str, seed: u64, tol: f64, fault: Option<f64>, outcomes: Vec<TrialOutcome>, started: Instant) -> Self {
        let trials = outcomes.len();
        let mut failures = Vec::new();
        let mut diagnostics = Vec::with_capacity(trials);
        let mut residuals = Vec::with_capacity(trials);
        let mut unique = true;
        for (trial, o) in outcomes.into_iter().enumerate() {
            residuals.push(o.residual);
            unique &= o.unique;
            diagnostics.push(TrialDiag { trial, residual: o.residual, commutation: o.commutation, unique: o.unique, dims: o.dims, notes: o.notes });
            failures.extend(o.failures.into_iter().map(|(check, atom, detail)| Failure { trial, check, atom, detail }));
        }
        let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
        let passed = failures.is_empty();
        AuditReport {
            schema_version: SCHEMA_VERSION,
            construction: construction.to_string(),
            seed,
            trials,
            tol,
            fault,
            passed,
            verdict: if passed { "pass" } else { "fail" }.to_string(),
            max_residual,
            residuals,
            uniqueness_certified: unique,
            failures,
            diagnostics,
            wall_time_ms: started.elapsed().as_millis() as u64,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

/// Result of one trial before assembly.
#[derive(Debug, Clone, Default)]
pub struct TrialOutcome {
    pub residual: f64,
    pub commutation: f64,
    pub unique: bool,
    /// `(check, atom, detail)`.
    pub failures: Vec<(String, Option<String>, String)>,
    pub dims: Vec<usize>,
    pub notes: Vec<String>,
}

impl TrialOutcome {
    pub(crate) fn fail(&mut self, check: &str, atom: Option<String>, detail: String) {
        self.failures.push((check.to_string(), atom, detail));
    }

    fn errored(e: crate::Error) -> Self {
        let mut o = TrialOutcome::default();
        o.fail("error", None, e.to_string());
        o
    }
}

/// Runs `trial` for every index, in parallel, keeping index order. The
/// `BANMOD_THREADS` variable caps the number of worker threads.
pub fn par_trials<F>(trials: usize, trial: F) -> Vec<TrialOutcome>
where
    F: Fn(usize) -> Result<TrialOutcome> + Sync + Send,
{
    let run = || (0..trials).into_par_iter().map(|t| trial(t).unwrap_or_else(TrialOutcome::errored)).collect();
    match std::env::var("BANMOD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        _ => run(),
    }
}

/// `Phi` with `leg_i . Phi = cone_i` for all `i`, and the largest residual.
pub fn mediating_morphism(limit: &Cone, cone: &Cone) -> Result<(Morphism, f64)> {
    let mut worst: f64 = 0.0;
    let mats: Vec<Mat> = (0..limit.apex.atoms())
        .map(|atom| {
            let (lam, c) = stacked_rows(&limit.legs, &cone.legs, atom, limit.apex.dim(atom), cone.apex.dim(atom));
            let phi = linalg::lstsq(&lam, &c);
            if c.nrows() > 0 {
                worst = worst.max(linalg::max_abs(&(&lam * &phi - &c)));
            }
            phi
        })
        .collect();
    Ok((Morphism::unchecked(&cone.apex, &limit.apex, mats)?, worst))
}

/// `Phi` with `Phi . leg_i = cocone_i` for all `i`, and the largest residual.
pub fn mediating_from_colimit(colimit: &Cocone, cocone: &Cocone) -> Result<(Morphism, f64)> {
    let mut worst: f64 = 0.0;
    let mats: Vec<Mat> = (0..colimit.nadir.atoms())
        .map(|atom| {
            let lam = stacked_cols(&colimit.legs, atom, colimit.nadir.dim(atom));
            let c = stacked_cols(&cocone.legs, atom, cocone.nadir.dim(atom));
            let phi = linalg::lstsq(&lam.transpose(), &c.transpose()).transpose();
            if c.ncols() > 0 {
                worst = worst.max(linalg::max_abs(&(&phi * &lam - &c)));
            }
            phi
        })
        .collect();
    Ok((Morphism::unchecked(&colimit.nadir, &cocone.nadir, mats)?, worst))
}

fn stacked_rows(legs: &[Morphism], other: &[Morphism], atom: usize, cols: usize, other_cols: usize) -> (Mat, Mat) {
    let a: Vec<&Mat> = legs.iter().map(|l| l.mat(atom)).collect();
    let b: Vec<&Mat> = other.iter().map(|l| l.mat(atom)).collect();
    (linalg::vstack(&a, cols), linalg::vstack(&b, other_cols))
}

fn stacked_cols(legs: &[Morphism], atom: usize, rows: usize) -> Mat {
    let a: Vec<&Mat> = legs.iter().map(|l| l.mat(atom)).collect();
    linalg::hstack(&a, rows)
}

fn check_legs(out: &mut TrialOutcome, legs: &[Morphism], tol: f64) {
    for (i, leg) in legs.iter().enumerate() {
        if let Some(k) = leg.norm_bound().iter().position(|&b| !(b <= 1.0 + tol)) {
            let atom = leg.source().space().atoms()[k].id.clone();
            out.fail("leg-norm", Some(atom), format!("leg {i} has operator norm bound {:.12}", leg.norm_bound()[k]));
        }
    }
}

fn check_mediator(out: &mut TrialOutcome, source: &ModuleObj, phi: &Morphism, residual: f64, tol: f64) {
    out.residual = residual;
    if !(residual <= tol) {
        out.fail("existence", None, format!("mediator residual {residual:e}"));
    }
    if let Some(k) = phi.norm_bound().iter().position(|&n| !(n <= 1.0 + tol)) {
        let atom = source.space().atoms()[k].id.clone();
        out.fail("mediator-norm", Some(atom), format!("mediator operator norm bound {:.12}", phi.norm_bound()[k]));
    }
}

/// One random cone against a constructed limit.
pub fn limit_trial(d: &Diagram, limit: &Cone, s: &mut Sampler, apex_cfg: Option<&AuditConfig>, tol: f64) -> Result<TrialOutcome> {
    let mut out = TrialOutcome { dims: limit.apex.dims(), ..Default::default() };
    out.commutation = limit.residual(d)?;
    if !(out.commutation <= tol) {
        out.fail("commutation", None, format!("limit legs commute up to {:e}", out.commutation));
    }
    check_legs(&mut out, &limit.legs, tol);
    let space = limit.apex.space().clone();
    let apex = match apex_cfg {
        Some(cfg) => {
            let saved = std::mem::replace(&mut s.cfg, cfg.clone());
            let m = s.module(&space);
            s.cfg = saved;
            m
        }
        None => s.module(&space),
    };
    let cone = s.cone(d, &apex)?;
    let (phi, residual) = mediating_morphism(limit, &cone)?;
    check_mediator(&mut out, &apex, &phi, residual, tol);
    out.unique = true;
    for atom in 0..space.len() {
        let (lam, _) = stacked_rows(&limit.legs, &[], atom, limit.apex.dim(atom), 0);
        if linalg::rank(&lam) != limit.apex.dim(atom) {
            out.unique = false;
            out.fail("uniqueness", Some(space.atoms()[atom].id.clone()), "limit legs are not jointly injective".into());
        }
    }
    Ok(out)
}

/// One random cocone against a constructed colimit.
pub fn colimit_trial(d: &Diagram, colimit: &Cocone, s: &mut Sampler, tol: f64) -> Result<TrialOutcome> {
    let mut out = TrialOutcome { dims: colimit.nadir.dims(), ..Default::default() };
    out.commutation = colimit.residual(d)?;
    if !(out.commutation <= tol) {
        out.fail("commutation", None, format!("colimit legs commute up to {:e}", out.commutation));
    }
    check_legs(&mut out, &colimit.legs, tol);
    let space = colimit.nadir.space().clone();
    let nadir = s.module(&space);
    let cocone = s.cocone(d, &nadir)?;
    let (phi, residual) = mediating_from_colimit(colimit, &cocone)?;
    check_mediator(&mut out, &colimit.nadir, &phi, residual, tol);
    out.unique = true;
    for atom in 0..space.len() {
        let lam = stacked_cols(&colimit.legs, atom, colimit.nadir.dim(atom));
        if linalg::rank(&lam) != colimit.nadir.dim(atom) {
            out.unique = false;
            out.fail("uniqueness", Some(space.atoms()[atom].id.clone()), "colimit legs are not jointly surjective".into());
        }
    }
    Ok(out)
}

/// Audits a fixed limit of a fixed diagram against `trials` random cones.
pub fn check_universal(d: &Diagram, limit: &Cone, trials: usize, seed: u64, tol: f64) -> AuditReport {
    let started = Instant::now();
    let outcomes = par_trials(trials, |t| {
        let mut s = Sampler::for_trial(seed, t as u64, AuditConfig::default());
        limit_trial(d, limit, &mut s, None, tol)
    });
    AuditReport::assemble("limit", seed, tol, None, outcomes, started)
}

pub fn check_universal_colimit(d: &Diagram, colimit: &Cocone, trials: usize, seed: u64, tol: f64) -> AuditReport {
    let started = Instant::now();
    let outcomes = par_trials(trials, |t| {
        let mut s = Sampler::for_trial(seed, t as u64, AuditConfig::default());
        colimit_trial(d, colimit, &mut s, tol)
    });
    AuditReport::assemble("colimit", seed, tol, None, outcomes, started)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoReport {
    pub iso: bool,
    pub invertible: bool,
    /// Largest relative gap between `|phi(v)|` and `|v|`.
    pub max_deviation: f64,
    pub worst_atom: Option<String>,
}

/// Whether `phi` is invertible on every fiber and preserves pointwise norms
/// on random samples, basis vectors, sign patterns and their preimages.
pub fn check_isometric_iso(phi: &Morphism, samples: usize, tol: f64, seed: u64) -> Result<IsoReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = phi.source();
    let tgt = phi.target();
    let mut report = IsoReport { iso: true, invertible: true, max_deviation: 0.0, worst_atom: None };
    let eval_tol = DEFAULT_TOL.min(tol);
    for atom in 0..src.atoms() {
        let a = phi.mat(atom);
        let d = a.ncols();
        let inv = match linalg::inverse(a) {
            Some(inv) if a.nrows() == d => inv,
            _ => {
                report.invertible = false;
                report.iso = false;
                report.worst_atom.get_or_insert_with(|| src.space().atoms()[atom].id.clone());
                continue;
            }
        };
        if d == 0 {
            continue;
        }
        let mut probes: Vec<Vector> = (0..samples).map(|_| Vector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0))).collect();
        let mut extreme: Vec<Vector> = (0..d)
            .map(|j| {
                let mut e = Vector::zeros(d);
                e[j] = 1.0;
                e
            })
            .collect();
        if d <= 10 {
            extreme.extend(sign_vectors(d));
        }
        probes.extend(extreme.iter().cloned());
        probes.extend(extreme.iter().map(|e| &inv * e));
        for v in probes {
            let before = eval_norm(src.norm(atom), v.as_slice(), eval_tol)?;
            let after = eval_norm(tgt.norm(atom), (a * &v).as_slice(), eval_tol)?;
            let gap = (after - before).abs() / before.max(1.0);
            if gap > report.max_deviation {
                report.max_deviation = gap;
                if gap > tol {
                    report.worst_atom = Some(src.space().atoms()[atom].id.clone());
                }
            }
        }
    }
    report.iso = report.invertible && report.max_deviation <= tol;
    Ok(report)
}
