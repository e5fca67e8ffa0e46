//! Hom modules, duals, hom functors, inverse images along measure-space maps,
//! and kernels and cokernels of natural transformations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::colimits::cokernel;
use crate::error::{Error, Result};
use crate::limits::{kernel, mats_gap, Diagram, EXACT_TOL};
use crate::linalg::{self, Mat};
use crate::measure::MeasMorphism;
use crate::modcat::{compose, is_morphism, Element, ModuleObj, Morphism, MORPHISM_TOL};
use crate::normcalc::{op_norm_upper, Exponent, Norm, NormExpr, DEFAULT_TOL};

/// `Hom(M, N)`: per atom all `dim N x dim M` matrices, row-major, with the operator norm.
pub fn hom_module(m: &ModuleObj, n: &ModuleObj) -> Result<ModuleObj> {
    if m.space() != n.space() {
        return Err(Error::SpaceMismatch);
    }
    let norms: Vec<Norm> = (0..m.atoms()).map(|a| NormExpr::op_norm(m.norm(a).clone(), n.norm(a).clone())).collect();
    ModuleObj::from_norms(m.space().clone(), norms)
}

/// `M* = Hom(M, L0(X))`.
pub fn dual(m: &ModuleObj) -> Result<ModuleObj> {
    hom_module(m, &ModuleObj::free(m.space()))
}

/// `T -> phi . T` from `Hom(M, Q)` to `Hom(M, R)`.
pub fn hom_post(m: &ModuleObj, phi: &Morphism) -> Result<Morphism> {
    let src = hom_module(m, phi.source())?;
    let tgt = hom_module(m, phi.target())?;
    let mats = (0..m.atoms()).map(|a| linalg::kron(phi.mat(a), &Mat::identity(m.dim(a), m.dim(a)))).collect();
    Morphism::unchecked(&src, &tgt, mats)
}

/// `T -> T . phi` from `Hom(Q, N)` to `Hom(R, N)` for `phi : R -> Q`.
pub fn hom_pre(n: &ModuleObj, phi: &Morphism) -> Result<Morphism> {
    let src = hom_module(phi.target(), n)?;
    let tgt = hom_module(phi.source(), n)?;
    let mats = (0..n.atoms()).map(|a| linalg::kron(&Mat::identity(n.dim(a), n.dim(a)), &phi.mat(a).transpose())).collect();
    Morphism::unchecked(&src, &tgt, mats)
}

/// `tau* M` with the map `v -> v . tau`.
#[derive(Debug, Clone)]
pub struct InverseImage {
    pub tau: MeasMorphism,
    pub base: ModuleObj,
    pub module: ModuleObj,
}

impl InverseImage {
    pub fn lift(&self, v: &Element) -> Result<Element> {
        if v.module != self.base {
            return Err(Error::SpaceMismatch);
        }
        let vectors = self.tau.map().iter().map(|&y| v.vectors[y].clone()).collect();
        Element::new(&self.module, vectors)
    }
}

/// The fiber of `tau* M` at `x` is the fiber of `M` at `tau(x)`.
pub fn inverse_image(tau: &MeasMorphism, m: &ModuleObj) -> Result<InverseImage> {
    if m.space() != &tau.target {
        return Err(Error::SpaceMismatch);
    }
    let fibers = tau.map().iter().map(|&y| m.fiber(y).clone()).collect();
    let module = ModuleObj::new(tau.source.clone(), fibers)?;
    Ok(InverseImage { tau: tau.clone(), base: m.clone(), module })
}

/// `tau* phi`, copying matrices along `tau`.
pub fn inverse_image_morphism(tau: &MeasMorphism, phi: &Morphism) -> Result<Morphism> {
    let src = inverse_image(tau, phi.source())?.module;
    let tgt = inverse_image(tau, phi.target())?.module;
    let mats = tau.map().iter().map(|&y| phi.mat(y).clone()).collect();
    Morphism::unchecked(&src, &tgt, mats)
}

/// Outcome of the universal property check for `(tau* M, tau*)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SquareReport {
    pub trials: usize,
    pub max_residual: f64,
    /// The lifted elements generate every fiber, so mediators are unique.
    pub certified: bool,
    pub mediators_bounded: bool,
    pub passed: bool,
}

/// For random `N` over the source space and random `tau`-linear maps
/// `T : M -> N` with `|T v| <= |v| . tau`, solves `Phi . tau* = T` and checks
/// that `Phi` is a morphism; uniqueness holds when lifts span each fiber.
pub fn invim_pullback_square(tau: &MeasMorphism, m: &ModuleObj, trials: usize, seed: u64, tol: f64) -> Result<SquareReport> {
    let inv = inverse_image(tau, m)?;
    let x = &tau.source;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The lift at x is the identity on the copied fiber.
    let certified = (0..x.len()).all(|k| {
        let d = inv.module.dim(k);
        linalg::rank(&Mat::identity(d, d)) == d
    });
    let mut worst: f64 = 0.0;
    let mut bounded = true;
    for _ in 0..trials {
        let norms: Vec<Norm> = (0..x.len())
            .map(|_| {
                let d = rng.gen_range(1..=3);
                let p = [Exponent::One, Exponent::Two, Exponent::Inf][rng.gen_range(0..3)];
                let w: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
                NormExpr::lp(p, w).expect("positive weights")
            })
            .collect();
        let n = ModuleObj::from_norms(x.clone(), norms)?;
        let mut t_mats = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let (e, d) = (n.dim(k), inv.module.dim(k));
            let raw = Mat::from_fn(e, d, |_, _| rng.gen_range(-1.0..1.0));
            let s = op_norm_upper(&raw, inv.module.norm(k), n.norm(k), DEFAULT_TOL)?.upper;
            t_mats.push(if s > 0.0 { raw / s } else { raw });
        }
        let mut phi_mats = Vec::with_capacity(x.len());
        for (k, t) in t_mats.iter().enumerate() {
            let d = inv.module.dim(k);
            let lift = Mat::identity(d, d);
            let phi = t * linalg::pinv(&lift);
            worst = worst.max(linalg::max_abs(&(&phi * &lift - t)));
            phi_mats.push(phi);
        }
        let report = is_morphism(&inv.module, &n, &phi_mats, tol.max(MORPHISM_TOL))?;
        bounded &= report.ok;
    }
    Ok(SquareReport {
        trials,
        max_residual: worst,
        certified,
        mediators_bounded: bounded,
        passed: certified && bounded && worst <= tol,
    })
}

/// Components `eta_i : F(i) -> G(i)` natural in `i`.
#[derive(Debug, Clone)]
pub struct NatTrans {
    pub source: Diagram,
    pub target: Diagram,
    pub components: Vec<Morphism>,
}

impl NatTrans {
    pub fn new(source: Diagram, target: Diagram, components: Vec<Morphism>) -> Result<Self> {
        if source.index != target.index || components.len() != source.objects.len() {
            return Err(Error::InvalidDiagram("natural transformation needs one component per object".into()));
        }
        for (k, a) in source.index.arrows().iter().enumerate() {
            let left = compose(&target.arrows[k], &components[a.dom])?;
            let right = compose(&components[a.cod], &source.arrows[k])?;
            if mats_gap(left.mats(), right.mats()) > EXACT_TOL {
                return Err(Error::InvalidDiagram(format!("naturality fails at {}", a.name)));
            }
        }
        Ok(NatTrans { source, target, components })
    }
}

/// Solves `a X = b` exactly or reports the residual.
fn solve_exact(a: &Mat, b: &Mat) -> Result<Mat> {
    let x = linalg::lstsq(a, b);
    let gap = if b.is_empty() { 0.0 } else { linalg::max_abs(&(a * &x - b)) };
    if gap > 1e-9 * (1.0 + linalg::max_abs(b)) {
        return Err(Error::Inconsistent(gap));
    }
    Ok(x)
}

/// Objectwise kernels with their connecting maps, and the inclusion.
pub fn nat_kernel(eta: &NatTrans) -> Result<(Diagram, NatTrans)> {
    let kernels = eta.components.iter().map(kernel).collect::<Result<Vec<_>>>()?;
    let index = eta.source.index.clone();
    let generators = index
        .generators()
        .map(|k| {
            let a = &index.arrows()[k];
            let (ki, inc_i) = &kernels[a.dom];
            let (kj, inc_j) = &kernels[a.cod];
            // inc_j . Phi = F(f) . inc_i
            let mats = (0..ki.atoms())
                .map(|atom| solve_exact(inc_j.mat(atom), &(eta.source.arrows[k].mat(atom) * inc_i.mat(atom))))
                .collect::<Result<Vec<_>>>()?;
            Morphism::unchecked(ki, kj, mats)
        })
        .collect::<Result<Vec<_>>>()?;
    let objects = kernels.iter().map(|(k, _)| k.clone()).collect();
    let d = Diagram::new(index, objects, generators)?;
    let inclusions = kernels.into_iter().map(|(_, inc)| inc).collect();
    let nat = NatTrans::new(d.clone(), eta.source.clone(), inclusions)?;
    Ok((d, nat))
}

/// Objectwise cokernels with their connecting maps, and the projection.
pub fn nat_cokernel(eta: &NatTrans) -> Result<(Diagram, NatTrans)> {
    let cokernels = eta.components.iter().map(cokernel).collect::<Result<Vec<_>>>()?;
    let index = eta.source.index.clone();
    let generators = index
        .generators()
        .map(|k| {
            let a = &index.arrows()[k];
            let (ci, q_i) = &cokernels[a.dom];
            let (cj, q_j) = &cokernels[a.cod];
            // Phi . q_i = q_j . G(f)
            let mats = (0..ci.atoms())
                .map(|atom| {
                    let rhs = q_j.mat(atom) * eta.target.arrows[k].mat(atom);
                    Ok(solve_exact(&q_i.mat(atom).transpose(), &rhs.transpose())?.transpose())
                })
                .collect::<Result<Vec<_>>>()?;
            Morphism::unchecked(ci, cj, mats)
        })
        .collect::<Result<Vec<_>>>()?;
    let objects = cokernels.iter().map(|(c, _)| c.clone()).collect();
    let d = Diagram::new(index, objects, generators)?;
    let projections = cokernels.into_iter().map(|(_, q)| q).collect();
    let nat = NatTrans::new(eta.target.clone(), d.clone(), projections)?;
    Ok((d, nat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{Direction, FiniteCategory, PosetSystem};
    use crate::measure::{dirac_point, MeasureSpace};
    use crate::normcalc::eval_norm;

    fn line(p: Exponent, d: usize) -> ModuleObj {
        ModuleObj::uniform(&dirac_point(), NormExpr::unit(p, d))
    }

    #[test]
    fn hom_examples() {
        let free = ModuleObj::free(&dirac_point());
        let h = hom_module(&free, &free).unwrap();
        assert_eq!(h.dims(), vec![1]);
        assert_eq!(eval_norm(h.norm(0), &[-2.5], 1e-9).unwrap(), 2.5);
        let z = hom_module(&line(Exponent::Two, 3), &ModuleObj::zero(&dirac_point())).unwrap();
        assert!(z.is_zero());
        let h = hom_module(&line(Exponent::One, 2), &free).unwrap();
        assert_eq!(eval_norm(h.norm(0), &[0.5, -3.0], 1e-9).unwrap(), 3.0);
        let d = dual(&line(Exponent::Two, 2)).unwrap();
        assert!((eval_norm(d.norm(0), &[3.0, 4.0], 1e-9).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hom_post_is_functorial() {
        let m = line(Exponent::Inf, 2);
        let q = line(Exponent::Two, 2);
        let r = line(Exponent::One, 1);
        let phi = Morphism::new(&q, &q, vec![Mat::from_row_slice(2, 2, &[0.6, 0.0, 0.0, -0.8])]).unwrap();
        let psi = Morphism::new(&q, &r, vec![Mat::from_row_slice(1, 2, &[0.5, 0.5])]).unwrap();
        let whole = hom_post(&m, &compose(&psi, &phi).unwrap()).unwrap();
        let parts = compose(&hom_post(&m, &psi).unwrap(), &hom_post(&m, &phi).unwrap()).unwrap();
        assert!(mats_gap(whole.mats(), parts.mats()) < 1e-15);
        let id = hom_post(&m, &Morphism::identity(&q)).unwrap();
        assert_eq!(id.mat(0), &Mat::identity(4, 4));
        assert!(whole.within_bound(1e-9));
    }

    #[test]
    fn inverse_image_copies_fibers() {
        let x = MeasureSpace::from_pairs(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let tau = MeasMorphism::new(x, dirac_point(), vec![0, 0]).unwrap();
        let m = line(Exponent::Two, 2);
        let inv = inverse_image(&tau, &m).unwrap();
        let v = Element::from_slices(&m, &[&[3.0, 4.0]]).unwrap();
        let lifted = inv.lift(&v).unwrap();
        assert_eq!(lifted.pointwise_norm().unwrap().values, vec![5.0, 5.0]);
        let r = invim_pullback_square(&tau, &m, 5, 1, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn cokernels_of_shrinking_identities_vanish() {
        let m = line(Exponent::Two, 1);
        let n = 4;
        let steps: Vec<Morphism> =
            (1..n).map(|i| Morphism::identity(&m).scaled_unchecked(i as f64 / (i + 1) as f64)).collect();
        let src = PosetSystem::chain(vec![m.clone(); n], steps, Direction::Inverse).unwrap();
        let tgt = PosetSystem::chain(vec![m.clone(); n], vec![Morphism::identity(&m); n - 1], Direction::Inverse).unwrap();
        let components: Vec<Morphism> =
            (1..=n).map(|k| Morphism::identity(&m).scaled_unchecked(1.0 / k as f64)).collect();
        let eta = NatTrans::new(
            src.to_diagram(Direction::Inverse).unwrap(),
            tgt.to_diagram(Direction::Inverse).unwrap(),
            components,
        )
        .unwrap();
        let (coker, _) = nat_cokernel(&eta).unwrap();
        assert!(coker.objects.iter().all(ModuleObj::is_zero));
        let (ker, _) = nat_kernel(&eta).unwrap();
        assert!(ker.objects.iter().all(ModuleObj::is_zero));
    }

    #[test]
    fn kernel_of_zero_transformation_is_source() {
        let m = line(Exponent::One, 2);
        let d = Diagram::new(FiniteCategory::discrete(2), vec![m.clone(), m.clone()], Vec::new()).unwrap();
        let zero = vec![Morphism::zero(&m, &m).unwrap(), Morphism::zero(&m, &m).unwrap()];
        let eta = NatTrans::new(d.clone(), d, zero).unwrap();
        let (k, _) = nat_kernel(&eta).unwrap();
        assert_eq!(k.objects[0].dims(), vec![2]);
    }
}
