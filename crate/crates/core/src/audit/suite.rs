//! The registry of audited constructions.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use super::random::{AuditConfig, Sampler, Shape};
use super::{
    check_isometric_iso, colimit_trial, limit_trial, mediating_from_colimit, mediating_morphism, par_trials, AuditReport,
    IsoReport, TrialOutcome,
};
use crate::colimits::{
    coequalizer, coimage, colimit_of_diagram, coproduct, direct_limit, image, image_comparison, pushout, Cocone,
};
use crate::error::{Error, Result};
use crate::functors::{dual, hom_module, hom_post, hom_pre, inverse_image, inverse_image_morphism, invim_pullback_square};
use crate::limits::{
    equalizer, inverse_limit, kernel, limit_of_diagram, product, pullback, Cone, Diagram, Direction, FiniteCategory,
    PosetSystem,
};
use crate::modcat::{compose, ModuleObj, Morphism};
use crate::normcalc::{op_norm, Exponent};

pub const CONSTRUCTIONS: [&str; 17] = [
    "kernel",
    "equalizer",
    "product",
    "pullback",
    "inverse-limit",
    "cokernel",
    "coequalizer",
    "coproduct",
    "pushout",
    "direct-limit",
    "limit-engine",
    "colimit-engine",
    "hom-continuity",
    "invim-pullback-square",
    "invim-direct-limit",
    "dual-direct-limit",
    "image-coimage",
];

/// Constructions whose legs can be corrupted by fault injection.
const WITH_LEGS: usize = 13;

/// A constructed instance ready for a trial.
pub enum Built {
    Limit { diagram: Diagram, cone: Cone, apex_cfg: Option<AuditConfig> },
    Colimit { diagram: Diagram, cocone: Cocone },
    Checked(TrialOutcome),
}

/// Runs `trials` seeded trials of a registered construction. With `fault`,
/// one nonzero constructed leg per trial is scaled by that factor.
pub fn run_audit(construction: &str, trials: usize, seed: u64, tol: f64, fault: Option<f64>) -> Result<AuditReport> {
    let pos = CONSTRUCTIONS
        .iter()
        .position(|&c| c == construction)
        .ok_or_else(|| Error::UnknownConstruction(construction.to_string()))?;
    if fault.is_some() && pos >= WITH_LEGS {
        return Err(Error::UnknownConstruction(format!("{construction} has no legs to corrupt")));
    }
    let started = Instant::now();
    let outcomes = par_trials(trials, |t| {
        let mut s = Sampler::for_trial(seed, t as u64, AuditConfig::default());
        let mut built = build(construction, &mut s, tol)?;
        if let Some(c) = fault {
            let mut tries = 0;
            while !corrupt(&mut built, &mut s, c) {
                tries += 1;
                if tries > 100 {
                    return Err(Error::InvalidDiagram("no nonzero leg to corrupt".into()));
                }
                built = build(construction, &mut s, tol)?;
            }
        }
        match built {
            Built::Limit { diagram, cone, apex_cfg } => limit_trial(&diagram, &cone, &mut s, apex_cfg.as_ref(), tol),
            Built::Colimit { diagram, cocone } => colimit_trial(&diagram, &cocone, &mut s, tol),
            Built::Checked(o) => Ok(o),
        }
    });
    Ok(AuditReport::assemble(construction, seed, tol, fault, outcomes, started))
}

/// Legs whose largest entry is below this are roundoff; scaling them changes nothing.
const LIVE_LEG: f64 = 1e-4;

/// Scales a random nonzero leg; false when every leg is zero.
fn corrupt(built: &mut Built, s: &mut Sampler, c: f64) -> bool {
    let legs = match built {
        Built::Limit { cone, .. } => &mut cone.legs,
        Built::Colimit { cocone, .. } => &mut cocone.legs,
        Built::Checked(_) => return false,
    };
    let live: Vec<usize> =
        (0..legs.len()).filter(|&i| legs[i].mats().iter().any(|m| m.iter().any(|x| x.abs() > LIVE_LEG))).collect();
    if live.is_empty() {
        return false;
    }
    let i = live[s.rng.gen_range(0..live.len())];
    legs[i] = legs[i].scaled_unchecked(c);
    true
}

fn pair(s: &mut Sampler) -> Result<(Morphism, Morphism)> {
    let x = s.space();
    let (m, n) = (s.module(&x), s.module(&x));
    Ok((s.morphism(&m, &n)?, s.morphism(&m, &n)?))
}

fn build(construction: &str, s: &mut Sampler, tol: f64) -> Result<Built> {
    let limit = |diagram: Diagram, cone: Cone| Ok(Built::Limit { diagram, cone, apex_cfg: None });
    let colimit = |diagram: Diagram, cocone: Cocone| Ok(Built::Colimit { diagram, cocone });
    match construction {
        "kernel" | "cokernel" => {
            let (phi, _) = pair(s)?;
            let zero = Morphism::zero(phi.source(), phi.target())?;
            let d = Diagram::new(
                FiniteCategory::parallel_pair(),
                vec![phi.source().clone(), phi.target().clone()],
                vec![phi.clone(), zero.clone()],
            )?;
            if construction == "kernel" {
                let (k, inc) = kernel(&phi)?;
                let legs = vec![inc.clone(), compose(&phi, &inc)?];
                limit(d, Cone { apex: k, legs })
            } else {
                let (c, q) = crate::colimits::cokernel(&phi)?;
                let legs = vec![compose(&q, &phi)?, q];
                colimit(d, Cocone { nadir: c, legs })
            }
        }
        "equalizer" | "coequalizer" => {
            let (phi, psi) = pair(s)?;
            let d = Diagram::new(
                FiniteCategory::parallel_pair(),
                vec![phi.source().clone(), phi.target().clone()],
                vec![phi.clone(), psi.clone()],
            )?;
            if construction == "equalizer" {
                let (e, inc) = equalizer(&phi, &psi)?;
                let legs = vec![inc.clone(), compose(&phi, &inc)?];
                limit(d, Cone { apex: e, legs })
            } else {
                let (c, q) = coequalizer(&phi, &psi)?;
                let legs = vec![compose(&q, &phi)?, q];
                colimit(d, Cocone { nadir: c, legs })
            }
        }
        "product" | "coproduct" => {
            let x = s.space();
            let k = s.rng.gen_range(1..=s.cfg.max_objects.max(1));
            let factors: Vec<ModuleObj> = (0..k).map(|_| s.module(&x)).collect();
            let d = Diagram::new(FiniteCategory::discrete(k), factors.clone(), Vec::new())?;
            if construction == "product" {
                let (p, legs) = product(&x, &factors)?;
                limit(d, Cone { apex: p, legs })
            } else {
                let (c, legs) = coproduct(&x, &factors)?;
                colimit(d, Cocone { nadir: c, legs })
            }
        }
        "pullback" => {
            let x = s.space();
            let d = s.diagram(&x, Shape::Cospan)?;
            limit(d.clone(), specialized_limit(&d, Shape::Cospan)?)
        }
        "pushout" => {
            let x = s.space();
            let d = s.diagram(&x, Shape::Span)?;
            colimit(d.clone(), specialized_colimit(&d, Shape::Span)?)
        }
        "inverse-limit" => {
            let x = s.space();
            let sys = s.system(&x, Direction::Inverse)?;
            limit(sys.to_diagram(Direction::Inverse)?, inverse_limit(&sys)?)
        }
        "direct-limit" => {
            let x = s.space();
            let sys = s.system(&x, Direction::Direct)?;
            colimit(sys.to_diagram(Direction::Direct)?, direct_limit(&sys)?)
        }
        "limit-engine" => {
            let x = s.space();
            let d = s.any_diagram(&x)?;
            let c = limit_of_diagram(&d)?;
            limit(d, c)
        }
        "colimit-engine" => {
            let x = s.space();
            let d = s.any_diagram(&x)?;
            let c = colimit_of_diagram(&d)?;
            colimit(d, c)
        }
        "hom-continuity" => hom_continuity(s),
        "invim-pullback-square" => {
            let y = s.space();
            let x = s.space();
            let tau = s.meas_morphism(&x, &y);
            let m = s.module(&y);
            let r = invim_pullback_square(&tau, &m, 1, s.rng.gen(), tol)?;
            let mut o = TrialOutcome { residual: r.max_residual, unique: r.certified, dims: m.dims(), ..Default::default() };
            if !r.passed {
                o.fail("pullback-square", None, format!("{r:?}"));
            }
            Ok(Built::Checked(o))
        }
        "invim-direct-limit" => invim_direct_limit(s, tol).map(Built::Checked),
        "dual-direct-limit" => dual_direct_limit(s, tol).map(Built::Checked),
        "image-coimage" => image_coimage(s, tol).map(Built::Checked),
        other => Err(Error::UnknownConstruction(other.to_string())),
    }
}

/// `Hom(M, -)` applied to a random diagram and its limit cone.
fn hom_continuity(s: &mut Sampler) -> Result<Built> {
    let x = s.space();
    let d = s.any_diagram(&x)?;
    let l = limit_of_diagram(&d)?;
    let m = s.module(&x);
    let objects = d.objects.iter().map(|o| hom_module(&m, o)).collect::<Result<Vec<_>>>()?;
    let generators = d.index.generators().map(|k| hom_post(&m, &d.arrows[k])).collect::<Result<Vec<_>>>()?;
    let hd = Diagram::new(d.index.clone(), objects, generators)?;
    let legs = l.legs.iter().map(|leg| hom_post(&m, leg)).collect::<Result<Vec<_>>>()?;
    let apex = hom_module(&m, &l.apex)?;
    // Random cones into hom modules use polyhedral apexes, whose operator norms are exact.
    let apex_cfg = AuditConfig { exponents: vec![Exponent::One, Exponent::Inf], ..s.cfg.clone() };
    Ok(Built::Limit { diagram: hd, cone: Cone { apex, legs }, apex_cfg: Some(apex_cfg) })
}

fn iso_check(o: &mut TrialOutcome, phi: &Morphism, residual: f64, tol: f64, seed: u64) -> Result<IsoReport> {
    o.residual = o.residual.max(residual);
    if !(residual <= tol) {
        o.fail("existence", None, format!("comparison residual {residual:e}"));
    }
    let iso = check_isometric_iso(phi, 8, tol, seed)?;
    if !iso.iso {
        o.fail(
            "comparison-iso",
            iso.worst_atom.clone(),
            format!("invertible {} deviation {:e}", iso.invertible, iso.max_deviation),
        );
    }
    Ok(iso)
}

/// `lim tau* M_i -> tau* lim M_i` for a random direct system.
fn invim_direct_limit(s: &mut Sampler, tol: f64) -> Result<TrialOutcome> {
    let y = s.space();
    let x = s.space();
    let tau = s.meas_morphism(&x, &y);
    let sys = s.system(&y, Direction::Direct)?;
    let lim = direct_limit(&sys)?;
    let pulled = sys.modules.iter().map(|m| Ok(inverse_image(&tau, m)?.module)).collect::<Result<Vec<_>>>()?;
    let maps = sys
        .maps
        .iter()
        .map(|(&k, m)| Ok((k, inverse_image_morphism(&tau, m)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let pulled_sys = PosetSystem::new(sys.leq.clone(), pulled, maps, Direction::Direct)?;
    let lim_pulled = direct_limit(&pulled_sys)?;
    let target = inverse_image(&tau, &lim.nadir)?.module;
    let legs = lim.legs.iter().map(|l| inverse_image_morphism(&tau, l)).collect::<Result<Vec<_>>>()?;
    let cocone = Cocone { nadir: target, legs };
    let mut o = TrialOutcome { unique: true, dims: lim_pulled.nadir.dims(), ..Default::default() };
    o.commutation = cocone.residual(&pulled_sys.to_diagram(Direction::Direct)?)?;
    if !(o.commutation <= tol) {
        o.fail("commutation", None, format!("pulled legs commute up to {:e}", o.commutation));
    }
    let (phi, r) = mediating_from_colimit(&lim_pulled, &cocone)?;
    iso_check(&mut o, &phi, r, tol, s.rng.gen())?;
    Ok(o)
}

/// `(lim M_i)* -> lim M_i*` for a random direct system.
fn dual_direct_limit(s: &mut Sampler, tol: f64) -> Result<TrialOutcome> {
    let x = s.space();
    let sys = s.system(&x, Direction::Direct)?;
    let lim = direct_limit(&sys)?;
    let free = ModuleObj::free(&x);
    let duals = sys.modules.iter().map(dual).collect::<Result<Vec<_>>>()?;
    let maps =
        sys.maps.iter().map(|(&k, m)| Ok((k, hom_pre(&free, m)?))).collect::<Result<BTreeMap<_, _>>>()?;
    let dual_sys = PosetSystem::new(sys.leq.clone(), duals, maps, Direction::Inverse)?;
    let inv = inverse_limit(&dual_sys)?;
    let legs = lim.legs.iter().map(|l| hom_pre(&free, l)).collect::<Result<Vec<_>>>()?;
    let cone = Cone { apex: dual(&lim.nadir)?, legs };
    let mut o = TrialOutcome { unique: true, dims: inv.apex.dims(), ..Default::default() };
    o.commutation = cone.residual(&dual_sys.to_diagram(Direction::Inverse)?)?;
    if !(o.commutation <= tol) {
        o.fail("commutation", None, format!("dual legs commute up to {:e}", o.commutation));
    }
    let (phi, r) = mediating_morphism(&inv, &cone)?;
    iso_check(&mut o, &phi, r, tol, s.rng.gen())?;
    Ok(o)
}

/// Coequalizer of the kernel pair against `M / Ker`, equalizer of the
/// cokernel pair against the closed range, and a probe of the comparison map.
fn image_coimage(s: &mut Sampler, tol: f64) -> Result<TrialOutcome> {
    let (phi, _) = pair(s)?;
    let mut o = TrialOutcome { unique: true, dims: phi.source().dims(), ..Default::default() };

    let (_, p1, p2) = pullback(&phi, &phi)?;
    let (q_obj, q) = coequalizer(&p1, &p2)?;
    let im = image(&phi)?;
    let from = Cocone { nadir: q_obj, legs: vec![q] };
    let to = Cocone { nadir: im.object.clone(), legs: vec![im.into.clone()] };
    let (a, r) = mediating_from_colimit(&from, &to)?;
    iso_check(&mut o, &a, r, tol, s.rng.gen())?;

    let (_, i1, i2) = pushout(&phi, &phi)?;
    let (e_obj, e) = equalizer(&i1, &i2)?;
    let co = coimage(&phi)?;
    let limit = Cone { apex: e_obj, legs: vec![e] };
    let cone = Cone { apex: co.object.clone(), legs: vec![co.out.clone()] };
    let (b, r) = mediating_morphism(&limit, &cone)?;
    iso_check(&mut o, &b, r, tol, s.rng.gen())?;

    // Logged, not asserted: whether M / Ker -> range is isometric.
    let cmp = image_comparison(&phi)?;
    let iso = check_isometric_iso(&cmp, 4, tol, s.rng.gen())?;
    o.notes.push(format!("comparison isometric {} deviation {:.3e}", iso.iso, iso.max_deviation));
    Ok(o)
}

/// Engine outputs compared with the specialized constructions of one shape.
#[derive(Debug, Clone, Serialize)]
pub struct Agreement {
    pub shape: Shape,
    pub limit: IsoReport,
    pub colimit: IsoReport,
    pub limit_residual: f64,
    pub colimit_residual: f64,
}

impl Agreement {
    pub fn passed(&self, tol: f64) -> bool {
        self.limit.iso && self.colimit.iso && self.limit_residual <= tol && self.colimit_residual <= tol
    }
}

fn arrow<'a>(d: &'a Diagram, name: &str) -> Result<&'a Morphism> {
    d.arrow(name).ok_or_else(|| Error::InvalidDiagram(format!("missing arrow {name}")))
}

/// Product, equalizer, pullback, or the initial object of a span.
pub fn specialized_limit(d: &Diagram, shape: Shape) -> Result<Cone> {
    let space = d.space().ok_or_else(|| Error::InvalidDiagram("empty diagram".into()))?;
    match shape {
        Shape::Discrete => {
            let (apex, legs) = product(space, &d.objects)?;
            Ok(Cone { apex, legs })
        }
        Shape::ParallelPair => {
            let a = arrow(d, "a")?;
            let (apex, e) = equalizer(a, arrow(d, "b")?)?;
            let legs = vec![e.clone(), compose(a, &e)?];
            Ok(Cone { apex, legs })
        }
        Shape::Cospan => {
            let f = arrow(d, "f")?;
            let (apex, pl, pr) = pullback(f, arrow(d, "g")?)?;
            let legs = vec![pl.clone(), pr, compose(f, &pl)?];
            Ok(Cone { apex, legs })
        }
        Shape::Span => {
            let base = d.objects[0].clone();
            let legs = vec![Morphism::identity(&base), arrow(d, "f")?.clone(), arrow(d, "g")?.clone()];
            Ok(Cone { apex: base, legs })
        }
        Shape::Tree => Err(Error::InvalidDiagram("no specialized limit for this shape".into())),
    }
}

/// Coproduct, coequalizer, pushout, or the terminal object of a cospan.
pub fn specialized_colimit(d: &Diagram, shape: Shape) -> Result<Cocone> {
    let space = d.space().ok_or_else(|| Error::InvalidDiagram("empty diagram".into()))?;
    match shape {
        Shape::Discrete => {
            let (nadir, legs) = coproduct(space, &d.objects)?;
            Ok(Cocone { nadir, legs })
        }
        Shape::ParallelPair => {
            let a = arrow(d, "a")?;
            let (nadir, q) = coequalizer(a, arrow(d, "b")?)?;
            let legs = vec![compose(&q, a)?, q];
            Ok(Cocone { nadir, legs })
        }
        Shape::Cospan => {
            let base = d.objects[2].clone();
            let legs = vec![arrow(d, "f")?.clone(), arrow(d, "g")?.clone(), Morphism::identity(&base)];
            Ok(Cocone { nadir: base, legs })
        }
        Shape::Span => {
            let f = arrow(d, "f")?;
            let (nadir, il, ir) = pushout(f, arrow(d, "g")?)?;
            let legs = vec![compose(&il, f)?, il, ir];
            Ok(Cocone { nadir, legs })
        }
        Shape::Tree => Err(Error::InvalidDiagram("no specialized colimit for this shape".into())),
    }
}

/// Compares `limit_of_diagram` and `colimit_of_diagram` with the specialized
/// constructions through their comparison maps.
pub fn engine_agreement(d: &Diagram, shape: Shape, tol: f64, seed: u64) -> Result<Agreement> {
    let engine = limit_of_diagram(d)?;
    let special = specialized_limit(d, shape)?;
    let (phi, limit_residual) = mediating_morphism(&special, &engine)?;
    let limit = check_isometric_iso(&phi, 8, tol, seed)?;
    let engine = colimit_of_diagram(d)?;
    let special = specialized_colimit(d, shape)?;
    let (psi, colimit_residual) = mediating_from_colimit(&engine, &special)?;
    let colimit = check_isometric_iso(&psi, 8, tol, seed.wrapping_add(1))?;
    Ok(Agreement { shape, limit, colimit, limit_residual, colimit_residual })
}

/// Operator norms of the image comparison map and its inverse.
pub fn comparison_norms(phi: &Morphism, tol: f64) -> Result<Vec<(f64, f64)>> {
    let cmp = image_comparison(phi)?;
    (0..cmp.source().atoms())
        .map(|atom| {
            let a = cmp.mat(atom);
            let forward = op_norm(a, cmp.source().norm(atom), cmp.target().norm(atom), tol)?.value;
            let back = match crate::linalg::inverse(a) {
                Some(inv) => op_norm(&inv, cmp.target().norm(atom), cmp.source().norm(atom), tol)?.value,
                None => f64::INFINITY,
            };
            Ok((forward, back))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_construction_passes_a_few_trials() {
        for name in CONSTRUCTIONS {
            let r = run_audit(name, 3, 11, 1e-9, None).unwrap();
            assert!(r.passed, "{name}: {:?}", r.failures);
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(run_audit("colimit", 1, 0, 1e-9, None), Err(Error::UnknownConstruction(_))));
    }

    #[test]
    fn fault_flips_product_audit() {
        let r = run_audit("product", 5, 3, 1e-9, Some(1.001)).unwrap();
        assert!(!r.passed);
        assert!(r.failures.iter().all(|f| f.trial < 5));
        let flipped: std::collections::BTreeSet<usize> = r.failures.iter().map(|f| f.trial).collect();
        assert_eq!(flipped.len(), 5);
    }

    #[test]
    fn engine_matches_specialized() {
        let mut s = Sampler::new(2, AuditConfig::default());
        for shape in [Shape::Discrete, Shape::ParallelPair, Shape::Cospan, Shape::Span] {
            let x = s.space();
            let d = s.diagram(&x, shape).unwrap();
            let a = engine_agreement(&d, shape, 1e-9, 0).unwrap();
            assert!(a.passed(1e-9), "{a:?}");
        }
    }
}
