//! Every finite colimit, plus images, coimages and metric identification.
//!
//! Colimits are quotients of an `l1` sum by a relation subspace `B`. Each
//! fiber lives on coordinates `C` complementary to `B`, normed by
//! `y -> inf_t amb(S_C y + B t)`.

use crate::error::{Error, Result};
use crate::limits::{mats_gap, slice_maps, Diagram, PosetSystem};
use crate::linalg::{self, Mat, Vector};
use crate::measure::MeasureSpace;
use crate::modcat::{compose, Fiber, ModuleObj, Morphism};
use crate::normcalc::{dist_to_subspace, Norm, NormExpr, DEFAULT_TOL};

/// A nadir with one leg out of each object of a diagram.
#[derive(Debug, Clone)]
pub struct Cocone {
    pub nadir: ModuleObj,
    pub legs: Vec<Morphism>,
}

impl Cocone {
    /// Largest gap in `leg_j . D(f) = leg_i` over all arrows `f : i -> j`.
    pub fn residual(&self, d: &Diagram) -> Result<f64> {
        if self.legs.len() != d.objects.len() {
            return Err(Error::InvalidDiagram("one leg per object required".into()));
        }
        let mut worst: f64 = 0.0;
        for (k, a) in d.index.arrows().iter().enumerate() {
            let lhs = compose(&self.legs[a.cod], &d.arrows[k])?;
            worst = worst.max(mats_gap(lhs.mats(), self.legs[a.dom].mats()));
        }
        Ok(worst)
    }
}

/// Quotient fiber data for one atom.
struct QuotientFiber {
    norm: Norm,
    /// Coordinates of the quotient as a map from the ambient.
    projection: Mat,
}

/// `amb / span(relations)` on complement coordinates.
fn quotient_fiber(ambient: &Norm, relations: &Mat) -> Result<QuotientFiber> {
    let n = ambient.dim();
    let basis = if relations.ncols() == 0 { Mat::zeros(n, 0) } else { linalg::column_space(relations) };
    if basis.ncols() == 0 {
        return Ok(QuotientFiber { norm: ambient.clone(), projection: Mat::identity(n, n) });
    }
    let coords = linalg::complement_coords(&basis);
    let lift = linalg::selector(n, &coords);
    let full = linalg::hstack(&[&lift, &basis], n);
    let inv = linalg::inverse(&full).ok_or(Error::RankDeficient)?;
    let projection = inv.rows(0, coords.len()).into_owned();
    let norm = NormExpr::compose(lift, NormExpr::quotient(ambient.clone(), basis)?)?;
    Ok(QuotientFiber { norm, projection })
}

/// Quotient of the `l1` sum of `factors` by `relations[atom]`; legs are the
/// induced maps out of each factor.
pub(crate) fn quotient_of_sum(space: &MeasureSpace, factors: &[ModuleObj], relations: &[Mat]) -> Result<Cocone> {
    let (ambient, injections) = coproduct(space, factors)?;
    let mut fibers = Vec::with_capacity(space.len());
    let mut projections = Vec::with_capacity(space.len());
    for atom in 0..space.len() {
        let amb = one_child(ambient.norm(atom));
        let q = quotient_fiber(&amb, &relations[atom])?;
        fibers.push(Fiber::new(q.norm));
        projections.push(q.projection);
    }
    let nadir = ModuleObj::new(space.clone(), fibers)?;
    let legs = injections
        .iter()
        .map(|inj| {
            let mats = inj.mats().iter().zip(&projections).map(|(m, p)| p * m).collect();
            Morphism::unchecked(inj.source(), &nadir, mats)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cocone { nadir, legs })
}

fn one_child(n: &Norm) -> Norm {
    match n.as_ref() {
        NormExpr::SumOf(slots) | NormExpr::SupOf(slots) if slots.len() == 1 => slots[0].norm.clone(),
        _ => n.clone(),
    }
}

/// `N / phi(M)` with its projection.
pub fn cokernel(phi: &Morphism) -> Result<(ModuleObj, Morphism)> {
    let c = quotient_of_sum(phi.target().space(), std::slice::from_ref(phi.target()), phi.mats())?;
    Ok((c.nadir, c.legs.into_iter().next().expect("one factor")))
}

/// `Coker((phi - psi) / 2)`.
pub fn coequalizer(phi: &Morphism, psi: &Morphism) -> Result<(ModuleObj, Morphism)> {
    if phi.source() != psi.source() || phi.target() != psi.target() {
        return Err(Error::InvalidDiagram("coequalizer needs a parallel pair".into()));
    }
    cokernel(&phi.half_difference(psi)?)
}

/// `l1` sum with its injections.
pub fn coproduct(space: &MeasureSpace, factors: &[ModuleObj]) -> Result<(ModuleObj, Vec<Morphism>)> {
    if factors.iter().any(|m| m.space() != space) {
        return Err(Error::SpaceMismatch);
    }
    let norms: Vec<Norm> = (0..space.len())
        .map(|atom| NormExpr::sum(factors.iter().map(|m| m.norm(atom).clone()).collect()))
        .collect();
    let sum = ModuleObj::from_norms(space.clone(), norms)?;
    let injections = slice_maps(&sum, factors, false)?;
    Ok((sum, injections))
}

/// `(M (+)_1 N) / {(-phi(z), psi(z))}` with its two injections.
pub fn pushout(phi: &Morphism, psi: &Morphism) -> Result<(ModuleObj, Morphism, Morphism)> {
    if phi.source() != psi.source() {
        return Err(Error::InvalidDiagram("pushout needs a common domain".into()));
    }
    let space = phi.source().space();
    let relations: Vec<Mat> =
        (0..space.len()).map(|a| linalg::vstack(&[&(-phi.mat(a)), psi.mat(a)], phi.source().dim(a))).collect();
    let c = quotient_of_sum(space, &[phi.target().clone(), psi.target().clone()], &relations)?;
    let mut legs = c.legs.into_iter();
    Ok((c.nadir, legs.next().unwrap(), legs.next().unwrap()))
}

/// Relations `iota_j phi_ij v - iota_i v` of a direct system, per atom.
pub(crate) fn direct_relations(space: &MeasureSpace, system: &PosetSystem) -> Vec<Mat> {
    (0..space.len())
        .map(|atom| {
            let dims: Vec<usize> = system.modules.iter().map(|m| m.dim(atom)).collect();
            let offsets: Vec<usize> = dims
                .iter()
                .scan(0, |acc, d| {
                    let o = *acc;
                    *acc += d;
                    Some(o)
                })
                .collect();
            let total: usize = dims.iter().sum();
            let mut cols: Vec<Vector> = Vec::new();
            for (&(i, j), m) in &system.maps {
                if i == j {
                    continue;
                }
                let a = m.mat(atom);
                for k in 0..dims[i] {
                    let mut v = Vector::zeros(total);
                    for r in 0..dims[j] {
                        v[offsets[j] + r] += a[(r, k)];
                    }
                    v[offsets[i] + k] -= 1.0;
                    cols.push(v);
                }
            }
            linalg::from_columns(total, &cols)
        })
        .collect()
}

/// The direct limit of a system over a finite directed poset.
pub fn direct_limit(system: &PosetSystem) -> Result<Cocone> {
    let space = system
        .modules
        .first()
        .ok_or_else(|| Error::InvalidSystem("empty index set".into()))?
        .space()
        .clone();
    let relations = direct_relations(&space, system);
    let c = quotient_of_sum(&space, &system.modules, &relations)?;
    // The quotient of a norm is already a norm: identification and completion are identities here.
    let (nadir, ident) = metric_identification(&c.nadir)?;
    let legs = c.legs.iter().map(|l| compose(&ident, l)).collect::<Result<Vec<_>>>()?;
    Ok(Cocone { nadir, legs })
}

/// `inf { |v|_i : leg_i(v) = w }` over all indices: the seminorm of a direct
/// limit computed from single representatives.
pub fn representative_infimum(system: &PosetSystem, limit: &Cocone, atom: usize, w: &Vector) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (i, leg) in limit.legs.iter().enumerate() {
        let a = leg.mat(atom);
        let v0 = linalg::lstsq(a, &Mat::from_column_slice(w.len(), 1, w.as_slice()));
        let gap = linalg::max_abs(&(a * &v0 - Mat::from_column_slice(w.len(), 1, w.as_slice())));
        if gap > 1e-9 * (1.0 + linalg::max_abs_vec(w)) {
            continue;
        }
        let kernel = linalg::null_space(a);
        let norm = system.modules[i].norm(atom);
        let v = dist_to_subspace(norm, &kernel, v0.as_slice(), DEFAULT_TOL)?;
        best = best.min(v);
    }
    Ok(best)
}

/// `phi = out . into` through an intermediate object.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub object: ModuleObj,
    pub into: Morphism,
    pub out: Morphism,
}

/// `M / Ker(phi)` with the quotient map and the induced injective map into `N`.
pub fn image(phi: &Morphism) -> Result<Factorization> {
    let space = phi.source().space();
    let kernels: Vec<Mat> = phi.mats().iter().map(linalg::null_space).collect();
    let c = quotient_of_sum(space, std::slice::from_ref(phi.source()), &kernels)?;
    let q = c.legs.into_iter().next().expect("one factor");
    let mats: Vec<Mat> = (0..space.len())
        .map(|atom| {
            // q has full row rank; its pseudo-inverse lifts quotient coordinates.
            phi.mat(atom) * linalg::pinv(q.mat(atom))
        })
        .collect();
    let out = Morphism::unchecked(&c.nadir, phi.target(), mats)?;
    Ok(Factorization { object: c.nadir, into: q, out })
}

/// `cl(phi(M))` with the corestriction of `phi` and the inclusion into `N`.
pub fn coimage(phi: &Morphism) -> Result<Factorization> {
    let space = phi.source().space();
    let mut fibers = Vec::with_capacity(space.len());
    let mut ranges = Vec::with_capacity(space.len());
    for atom in 0..space.len() {
        let r = linalg::column_space(phi.mat(atom));
        fibers.push(Fiber::new(NormExpr::compose(r.clone(), phi.target().norm(atom).clone())?));
        ranges.push(r);
    }
    let object = ModuleObj::new(space.clone(), fibers)?;
    let into_mats = ranges.iter().zip(phi.mats()).map(|(r, m)| r.transpose() * m).collect();
    let into = Morphism::unchecked(phi.source(), &object, into_mats)?;
    let out = Morphism::unchecked(&object, phi.target(), ranges)?;
    Ok(Factorization { object, into, out })
}

/// The canonical map `M / Ker(phi) -> cl(phi(M))`: bijective, norm at most one.
pub fn image_comparison(phi: &Morphism) -> Result<Morphism> {
    let im = image(phi)?;
    let co = coimage(phi)?;
    let mats: Vec<Mat> = (0..phi.source().atoms())
        .map(|atom| linalg::pinv(co.out.mat(atom)) * im.out.mat(atom))
        .collect();
    Morphism::unchecked(&im.object, &co.object, mats)
}

/// Vectors of seminorm zero, as an orthonormal basis.
pub fn seminorm_kernel(n: &NormExpr) -> Mat {
    let d = n.dim();
    match n {
        NormExpr::SupOf(slots) | NormExpr::SumOf(slots) => {
            let mut cols = Vec::new();
            for s in slots {
                let k = seminorm_kernel(&s.norm);
                for c in 0..k.ncols() {
                    let mut v = Vector::zeros(d);
                    v.rows_mut(s.offset, s.norm.dim()).copy_from(&k.column(c));
                    cols.push(v);
                }
            }
            linalg::from_columns(d, &cols)
        }
        NormExpr::ComposeLinear { embed, inner } => {
            let k = seminorm_kernel(inner);
            let m = inner.dim();
            let off = if k.ncols() == 0 { Mat::identity(m, m) } else { Mat::identity(m, m) - &k * k.transpose() };
            linalg::null_space(&(off * embed))
        }
        NormExpr::QuotientOf { ambient, basis, .. } => {
            let k = seminorm_kernel(ambient);
            let both = linalg::hstack(&[&k, basis], d);
            if both.ncols() == 0 {
                Mat::zeros(d, 0)
            } else {
                linalg::column_space(&both)
            }
        }
        _ => Mat::zeros(d, 0),
    }
}

/// Quotient by the vectors of zero seminorm, with its projection.
pub fn metric_identification(m: &ModuleObj) -> Result<(ModuleObj, Morphism)> {
    let space = m.space();
    let mut fibers = Vec::with_capacity(space.len());
    let mut projections = Vec::with_capacity(space.len());
    let mut trivial = true;
    for atom in 0..space.len() {
        let null = seminorm_kernel(m.norm(atom));
        if null.ncols() > 0 {
            trivial = false;
        }
        let q = quotient_fiber(m.norm(atom), &null)?;
        fibers.push(Fiber::new(q.norm));
        projections.push(q.projection);
    }
    if trivial {
        return Ok((m.clone(), Morphism::identity(m)));
    }
    let out = ModuleObj::new(space.clone(), fibers)?;
    let p = Morphism::unchecked(m, &out, projections)?;
    Ok((out, p))
}

/// Finite-dimensional normed fibers are complete: the identity.
pub fn completion(m: &ModuleObj) -> (ModuleObj, Morphism) {
    (m.clone(), Morphism::identity(m))
}

/// The colimit as a coequalizer of two maps between coproducts:
/// `Z = sum_f D(dom f) -> Y = sum_i D(i)` with `a iota_f = iota_cod f D(f)`
/// and `b iota_f = iota_dom f`.
pub fn colimit_of_diagram(d: &Diagram) -> Result<Cocone> {
    let space = d.space().ok_or_else(|| Error::InvalidDiagram("empty diagram".into()))?.clone();
    let (y, inj_y) = coproduct(&space, &d.objects)?;
    let arrows = d.index.arrows();
    let doms: Vec<ModuleObj> = arrows.iter().map(|a| d.objects[a.dom].clone()).collect();
    let (z, _) = coproduct(&space, &doms)?;
    let a_mats: Vec<Mat> = (0..space.len())
        .map(|atom| {
            let blocks: Vec<Mat> =
                arrows.iter().enumerate().map(|(k, f)| inj_y[f.cod].mat(atom) * d.arrows[k].mat(atom)).collect();
            linalg::hstack(&blocks.iter().collect::<Vec<_>>(), y.dim(atom))
        })
        .collect();
    let b_mats: Vec<Mat> = (0..space.len())
        .map(|atom| {
            let blocks: Vec<Mat> = arrows.iter().map(|f| inj_y[f.dom].mat(atom).clone()).collect();
            linalg::hstack(&blocks.iter().collect::<Vec<_>>(), y.dim(atom))
        })
        .collect();
    let a = Morphism::unchecked(&z, &y, a_mats)?;
    let b = Morphism::unchecked(&z, &y, b_mats)?;
    let (nadir, q) = coequalizer(&a, &b)?;
    let legs = inj_y.iter().map(|i| compose(&q, i)).collect::<Result<Vec<_>>>()?;
    Ok(Cocone { nadir, legs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::Direction;
    use crate::measure::dirac_point;
    use crate::normcalc::{eval_norm, Exponent};

    fn line(p: Exponent, d: usize) -> ModuleObj {
        ModuleObj::uniform(&dirac_point(), NormExpr::unit(p, d))
    }

    fn map(src: &ModuleObj, tgt: &ModuleObj, rows: usize, cols: usize, entries: &[f64]) -> Morphism {
        Morphism::new(src, tgt, vec![Mat::from_row_slice(rows, cols, entries)]).unwrap()
    }

    #[test]
    fn cokernel_examples() {
        let r2 = line(Exponent::Two, 2);
        let r1 = line(Exponent::Two, 1);
        let inc = map(&r1, &r2, 2, 1, &[1.0, 0.0]);
        let (c, q) = cokernel(&inc).unwrap();
        assert_eq!(c.dims(), vec![1]);
        let y = q.mat(0) * Vector::from_column_slice(&[3.0, 4.0]);
        assert!((eval_norm(c.norm(0), y.as_slice(), 1e-9).unwrap() - 4.0).abs() < 1e-12);
        assert!(q.within_bound(1e-9), "{:?}", q.norm_bound());
        let (c0, q0) = cokernel(&Morphism::zero(&r1, &r2).unwrap()).unwrap();
        assert_eq!(c0.dims(), vec![2]);
        assert_eq!(q0.mat(0), &Mat::identity(2, 2));
        let (ce, _) = cokernel(&Morphism::identity(&r2)).unwrap();
        assert!(ce.is_zero());
    }

    #[test]
    fn coequalizer_on_l1() {
        let r2 = line(Exponent::One, 2);
        let a = Morphism::identity(&r2);
        let b = map(&r2, &r2, 2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (c, q) = coequalizer(&a, &b).unwrap();
        assert_eq!(c.dims(), vec![1]);
        for (x, y) in [(2.0, 5.0), (-1.5, 0.25)] {
            let z = q.mat(0) * Vector::from_column_slice(&[x, y]);
            let v = eval_norm(c.norm(0), z.as_slice(), 1e-9).unwrap();
            assert!((v - f64::abs(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn coproduct_norm_is_sum() {
        let (s, inj) = coproduct(&dirac_point(), &[line(Exponent::Two, 2), line(Exponent::Inf, 1)]).unwrap();
        assert_eq!(eval_norm(s.norm(0), &[3.0, 4.0, -2.0], 1e-9).unwrap(), 7.0);
        for i in &inj {
            assert!(i.within_bound(1e-12));
        }
    }

    #[test]
    fn pushout_of_identities() {
        let r = line(Exponent::One, 1);
        let id = Morphism::identity(&r);
        let (p, im, inn) = pushout(&id, &id).unwrap();
        assert_eq!(p.dims(), vec![1]);
        for (a, b) in [(1.0, 2.0), (3.0, -1.0), (-2.0, -0.5)] {
            let z = im.mat(0) * Vector::from_element(1, a) + inn.mat(0) * Vector::from_element(1, b);
            let v = eval_norm(p.norm(0), z.as_slice(), 1e-9).unwrap();
            assert!((v - f64::abs(a + b)).abs() < 1e-9, "{a} {b} {v}");
        }
        assert!(mats_gap(im.mats(), inn.mats()) < 1e-12);
    }

    #[test]
    fn image_and_coimage() {
        let r2 = line(Exponent::Inf, 2);
        let r1 = line(Exponent::One, 1);
        let pr = map(&r2, &r1, 1, 2, &[1.0, 0.0]);
        let im = image(&pr).unwrap();
        assert_eq!(im.object.dims(), vec![1]);
        let back = compose(&im.out, &im.into).unwrap();
        assert!(mats_gap(back.mats(), pr.mats()) < 1e-12);
        let y = im.into.mat(0) * Vector::from_column_slice(&[2.5, -7.0]);
        assert!((eval_norm(im.object.norm(0), y.as_slice(), 1e-9).unwrap() - 2.5).abs() < 1e-9);
        let co = coimage(&pr).unwrap();
        let back = compose(&co.out, &co.into).unwrap();
        assert!(mats_gap(back.mats(), pr.mats()) < 1e-12);
    }

    #[test]
    fn metric_identification_examples() {
        let p = dirac_point();
        let semi = NormExpr::seminorm(Mat::from_row_slice(1, 2, &[1.0, 0.0]), NormExpr::unit(Exponent::One, 1)).unwrap();
        let m = ModuleObj::uniform(&p, semi);
        let (q, proj) = metric_identification(&m).unwrap();
        assert_eq!(q.dims(), vec![1]);
        let y = proj.mat(0) * Vector::from_column_slice(&[-3.0, 8.0]);
        assert!((eval_norm(q.norm(0), y.as_slice(), 1e-9).unwrap() - 3.0).abs() < 1e-9);
        let zero = NormExpr::seminorm(Mat::zeros(1, 2), NormExpr::unit(Exponent::One, 1)).unwrap();
        let (z, _) = metric_identification(&ModuleObj::uniform(&p, zero)).unwrap();
        assert!(z.is_zero());
        let r2 = line(Exponent::Two, 2);
        let (same, id) = metric_identification(&r2).unwrap();
        assert_eq!(same, r2);
        assert_eq!(id.mat(0), &Mat::identity(2, 2));
    }

    #[test]
    fn direct_limit_of_inclusions() {
        let r1 = line(Exponent::Two, 1);
        let r2 = line(Exponent::Two, 2);
        let inc = map(&r1, &r2, 2, 1, &[1.0, 0.0]);
        let sys = PosetSystem::chain(vec![r1, r2], vec![inc], Direction::Direct).unwrap();
        let lim = direct_limit(&sys).unwrap();
        assert_eq!(lim.nadir.dims(), vec![2]);
        let d = sys.to_diagram(Direction::Direct).unwrap();
        assert!(lim.residual(&d).unwrap() < 1e-12);
        let w = lim.legs[1].mat(0) * Vector::from_column_slice(&[3.0, 4.0]);
        let direct = eval_norm(lim.nadir.norm(0), w.as_slice(), 1e-9).unwrap();
        let reps = representative_infimum(&sys, &lim, 0, &w).unwrap();
        assert!((direct - 5.0).abs() < 1e-9 && (reps - 5.0).abs() < 1e-9);
    }
}
