//! Objects, elements and morphisms of the category of Banach `L0(X)`-modules
//! with finite-dimensional fibers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::measure::{l0_distance, product_space, L0Fun, MeasureSpace};
use crate::normcalc::{eval_norm, norm_serde, op_norm_upper, Exponent, Norm, NormExpr, DEFAULT_TOL};

/// Slack allowed in the condition `|phi(v)| <= |v|`.
pub const MORPHISM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub dim: usize,
    #[serde(with = "norm_serde")]
    pub norm: Norm,
}

impl Fiber {
    pub fn new(norm: Norm) -> Self {
        Fiber { dim: norm.dim(), norm }
    }
}

/// One normed fiber per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModule", into = "RawModule")]
pub struct ModuleObj {
    space: MeasureSpace,
    fibers: Arc<[Fiber]>,
}

#[derive(Serialize, Deserialize)]
struct RawModule {
    space: MeasureSpace,
    fibers: Vec<Fiber>,
}

impl TryFrom<RawModule> for ModuleObj {
    type Error = Error;
    fn try_from(raw: RawModule) -> Result<Self> {
        ModuleObj::new(raw.space, raw.fibers)
    }
}

impl From<ModuleObj> for RawModule {
    fn from(m: ModuleObj) -> Self {
        RawModule { space: m.space, fibers: m.fibers.to_vec() }
    }
}

impl ModuleObj {
    pub fn new(space: MeasureSpace, fibers: Vec<Fiber>) -> Result<Self> {
        if fibers.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), got: fibers.len() });
        }
        for f in &fibers {
            if f.norm.dim() != f.dim {
                return Err(Error::DimensionMismatch { expected: f.dim, got: f.norm.dim() });
            }
        }
        Ok(ModuleObj { space, fibers: fibers.into() })
    }

    pub fn from_norms(space: MeasureSpace, norms: Vec<Norm>) -> Result<Self> {
        ModuleObj::new(space, norms.into_iter().map(Fiber::new).collect())
    }

    /// The same norm on every fiber.
    pub fn uniform(space: &MeasureSpace, norm: Norm) -> Self {
        let fibers = vec![Fiber::new(norm); space.len()];
        ModuleObj { space: space.clone(), fibers: fibers.into() }
    }

    pub fn zero(space: &MeasureSpace) -> Self {
        ModuleObj::uniform(space, NormExpr::unit(Exponent::Two, 0))
    }

    /// `L0(X)` itself: rank one with `|f| = |f|`.
    pub fn free(space: &MeasureSpace) -> Self {
        ModuleObj::uniform(space, NormExpr::unit(Exponent::Two, 1))
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn fibers(&self) -> &[Fiber] {
        &self.fibers
    }

    pub fn fiber(&self, atom: usize) -> &Fiber {
        &self.fibers[atom]
    }

    pub fn norm(&self, atom: usize) -> &Norm {
        &self.fibers[atom].norm
    }

    pub fn dim(&self, atom: usize) -> usize {
        self.fibers[atom].dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.fibers.iter().map(|f| f.dim).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.fibers.iter().all(|f| f.dim == 0)
    }

    pub fn atoms(&self) -> usize {
        self.space.len()
    }

    pub(crate) fn atom_id(&self, atom: usize) -> String {
        self.space.atoms()[atom].id.clone()
    }
}

/// A per-atom family of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub module: ModuleObj,
    pub vectors: Vec<Vector>,
}

#[derive(Serialize, Deserialize)]
struct RawElement {
    vectors: Vec<Vec<f64>>,
}

impl Element {
    pub fn new(module: &ModuleObj, vectors: Vec<Vector>) -> Result<Self> {
        if vectors.len() != module.atoms() {
            return Err(Error::DimensionMismatch { expected: module.atoms(), got: vectors.len() });
        }
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != module.dim(k) {
                return Err(Error::DimensionMismatch { expected: module.dim(k), got: v.len() });
            }
        }
        Ok(Element { module: module.clone(), vectors })
    }

    pub fn from_slices(module: &ModuleObj, vectors: &[&[f64]]) -> Result<Self> {
        Element::new(module, vectors.iter().map(|v| Vector::from_column_slice(v)).collect())
    }

    pub fn zero(module: &ModuleObj) -> Self {
        let vectors = module.fibers().iter().map(|f| Vector::zeros(f.dim)).collect();
        Element { module: module.clone(), vectors }
    }

    pub fn pointwise_norm(&self) -> Result<L0Fun> {
        self.pointwise_norm_tol(DEFAULT_TOL)
    }

    pub fn pointwise_norm_tol(&self, tol: f64) -> Result<L0Fun> {
        let values = self
            .vectors
            .iter()
            .zip(self.module.fibers())
            .map(|(v, f)| eval_norm(&f.norm, v.as_slice(), tol))
            .collect::<Result<Vec<_>>>()?;
        L0Fun::new(self.module.space().clone(), values)
    }

    fn same_module(&self, other: &Element) -> Result<()> {
        if self.module != other.module {
            return Err(Error::SpaceMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        self.same_module(other)?;
        let vectors = self.vectors.iter().zip(&other.vectors).map(|(a, b)| a + b).collect();
        Ok(Element { module: self.module.clone(), vectors })
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Element {
        Element { module: self.module.clone(), vectors: self.vectors.iter().map(|v| -v).collect() }
    }

    /// `f . v`, scaling each fiber by the value of `f` on its atom.
    pub fn scale(&self, f: &L0Fun) -> Result<Element> {
        if &f.space != self.module.space() {
            return Err(Error::SpaceMismatch);
        }
        let vectors = self.vectors.iter().zip(&f.values).map(|(v, c)| v * *c).collect();
        Ok(Element { module: self.module.clone(), vectors })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = RawElement { vectors: self.vectors.iter().map(|v| v.iter().cloned().collect()).collect() };
        serde_json::to_value(raw).expect("vectors serialize")
    }

    pub fn from_json(module: &ModuleObj, value: serde_json::Value) -> Result<Self> {
        let raw: RawElement = serde_json::from_value(value)?;
        Element::new(module, raw.vectors.into_iter().map(Vector::from_vec).collect())
    }
}

/// `d(v, w) = d_L0(|v - w|, 0)`.
pub fn module_distance(v: &Element, w: &Element) -> Result<f64> {
    let diff = v.sub(w)?.pointwise_norm()?;
    let zero = L0Fun::constant(v.module.space(), 0.0);
    l0_distance(&diff, &zero)
}

/// `sum_n chi_{E_n} v_n` for a partition `E_n` of the atoms, given by index sets.
pub fn glue(partition: &[Vec<usize>], elems: &[Element]) -> Result<Element> {
    let first = elems.first().ok_or_else(|| Error::InvalidSpace("nothing to glue".into()))?;
    if partition.len() != elems.len() {
        return Err(Error::DimensionMismatch { expected: partition.len(), got: elems.len() });
    }
    let n = first.module.atoms();
    let mut owner = vec![None; n];
    for (block, atoms) in partition.iter().enumerate() {
        for &a in atoms {
            if a >= n || owner[a].is_some() {
                return Err(Error::InvalidSpace("blocks are not a partition of the atoms".into()));
            }
            owner[a] = Some(block);
        }
    }
    if owner.iter().any(Option::is_none) {
        return Err(Error::InvalidSpace("blocks do not cover the atoms".into()));
    }
    for e in elems {
        first.same_module(e)?;
    }
    let vectors = owner.iter().enumerate().map(|(a, b)| elems[b.unwrap()].vectors[a].clone()).collect();
    Ok(Element { module: first.module.clone(), vectors })
}

/// A per-atom matrix family with pointwise operator norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphism {
    source: ModuleObj,
    target: ModuleObj,
    mats: Arc<[Mat]>,
    norm_bound: Arc<[f64]>,
}

/// Per-atom operator norm bounds of a candidate morphism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorphismReport {
    pub ok: bool,
    pub norms: Vec<f64>,
    /// First atom violating the bound.
    pub atom: Option<String>,
}

fn check_shapes(source: &ModuleObj, target: &ModuleObj, mats: &[Mat]) -> Result<()> {
    if source.space() != target.space() {
        return Err(Error::SpaceMismatch);
    }
    if mats.len() != source.atoms() {
        return Err(Error::DimensionMismatch { expected: source.atoms(), got: mats.len() });
    }
    for (k, m) in mats.iter().enumerate() {
        if m.ncols() != source.dim(k) {
            return Err(Error::DimensionMismatch { expected: source.dim(k), got: m.ncols() });
        }
        if m.nrows() != target.dim(k) {
            return Err(Error::DimensionMismatch { expected: target.dim(k), got: m.nrows() });
        }
    }
    Ok(())
}

fn norm_bounds(source: &ModuleObj, target: &ModuleObj, mats: &[Mat], tol: f64) -> Result<Vec<f64>> {
    mats.iter()
        .enumerate()
        .map(|(k, m)| match op_norm_upper(m, source.norm(k), target.norm(k), tol) {
            Ok(r) => Ok(r.upper),
            Err(Error::NoRoute(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        })
        .collect()
}

/// Checks `|phi(v)| <= |v|` atom by atom through certified operator norm bounds.
pub fn is_morphism(source: &ModuleObj, target: &ModuleObj, mats: &[Mat], tol: f64) -> Result<MorphismReport> {
    check_shapes(source, target, mats)?;
    let norms = norm_bounds(source, target, mats, DEFAULT_TOL.min(tol))?;
    let bad = norms.iter().position(|&n| !(n <= 1.0 + tol));
    Ok(MorphismReport { ok: bad.is_none(), atom: bad.map(|k| source.atom_id(k)), norms })
}

impl Morphism {
    /// Validated constructor.
    pub fn new(source: &ModuleObj, target: &ModuleObj, mats: Vec<Mat>) -> Result<Self> {
        let m = Morphism::unchecked(source, target, mats)?;
        if let Some(k) = m.norm_bound.iter().position(|&n| !(n <= 1.0 + MORPHISM_TOL)) {
            return Err(Error::NotAMorphism { atom: source.atom_id(k), norm: m.norm_bound[k] });
        }
        Ok(m)
    }

    /// Shape-checked, with norm bounds recorded but not enforced.
    pub fn unchecked(source: &ModuleObj, target: &ModuleObj, mats: Vec<Mat>) -> Result<Self> {
        check_shapes(source, target, &mats)?;
        let bounds = norm_bounds(source, target, &mats, DEFAULT_TOL)?;
        Ok(Morphism { source: source.clone(), target: target.clone(), mats: mats.into(), norm_bound: bounds.into() })
    }

    pub fn identity(m: &ModuleObj) -> Self {
        let mats: Vec<Mat> = m.dims().into_iter().map(|d| Mat::identity(d, d)).collect();
        let bound: Vec<f64> = m.dims().into_iter().map(|d| if d == 0 { 0.0 } else { 1.0 }).collect();
        Morphism { source: m.clone(), target: m.clone(), mats: mats.into(), norm_bound: bound.into() }
    }

    pub fn zero(source: &ModuleObj, target: &ModuleObj) -> Result<Self> {
        if source.space() != target.space() {
            return Err(Error::SpaceMismatch);
        }
        let mats: Vec<Mat> = (0..source.atoms()).map(|k| Mat::zeros(target.dim(k), source.dim(k))).collect();
        let bound = vec![0.0; mats.len()];
        Ok(Morphism { source: source.clone(), target: target.clone(), mats: mats.into(), norm_bound: bound.into() })
    }

    pub fn source(&self) -> &ModuleObj {
        &self.source
    }

    pub fn target(&self) -> &ModuleObj {
        &self.target
    }

    pub fn mats(&self) -> &[Mat] {
        &self.mats
    }

    pub fn mat(&self, atom: usize) -> &Mat {
        &self.mats[atom]
    }

    pub fn norm_bound(&self) -> &[f64] {
        &self.norm_bound
    }

    /// Whether the recorded bounds satisfy the morphism condition.
    pub fn within_bound(&self, tol: f64) -> bool {
        self.norm_bound.iter().all(|&n| n <= 1.0 + tol)
    }

    pub fn apply(&self, v: &Element) -> Result<Element> {
        if v.module != self.source {
            return Err(Error::NotComposable);
        }
        let vectors = self.mats.iter().zip(&v.vectors).map(|(m, x)| m * x).collect();
        Ok(Element { module: self.target.clone(), vectors })
    }

    /// Same matrices scaled by `c`, norm condition not enforced.
    pub fn scaled_unchecked(&self, c: f64) -> Self {
        let mats: Vec<Mat> = self.mats.iter().map(|m| m * c).collect();
        let bound: Vec<f64> = self.norm_bound.iter().map(|b| b * c.abs()).collect();
        Morphism { source: self.source.clone(), target: self.target.clone(), mats: mats.into(), norm_bound: bound.into() }
    }

    /// `(self - other) / 2`, a morphism by the triangle inequality.
    pub fn half_difference(&self, other: &Morphism) -> Result<Morphism> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::NotComposable);
        }
        let mats: Vec<Mat> = self.mats.iter().zip(other.mats.iter()).map(|(a, b)| (a - b) * 0.5).collect();
        Morphism::unchecked(&self.source, &self.target, mats)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mats: Vec<Vec<Vec<f64>>> =
            self.mats.iter().map(|m| (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()).collect();
        serde_json::json!({ "mats": mats, "norm_bound": self.norm_bound.to_vec() })
    }
}

/// `phi . psi`.
pub fn compose(phi: &Morphism, psi: &Morphism) -> Result<Morphism> {
    if psi.target != phi.source {
        return Err(Error::NotComposable);
    }
    let mats: Vec<Mat> = phi.mats.iter().zip(psi.mats.iter()).map(|(a, b)| a * b).collect();
    // Submultiplicativity keeps the product bound honest without a new solve.
    let bound: Vec<f64> = phi
        .norm_bound
        .iter()
        .zip(psi.norm_bound.iter())
        .map(|(&a, &b)| if a == 0.0 || b == 0.0 { 0.0 } else { a * b })
        .collect();
    Ok(Morphism { source: psi.source.clone(), target: phi.target.clone(), mats: mats.into(), norm_bound: bound.into() })
}

/// Injective on every fiber.
pub fn is_mono(phi: &Morphism) -> bool {
    phi.mats.iter().all(|m| linalg::rank(m) == m.ncols())
}

/// Surjective (equivalently: dense range) on every fiber.
pub fn is_epi(phi: &Morphism) -> bool {
    phi.mats.iter().all(|m| linalg::rank(m) == m.nrows())
}

/// `l2` fibers of dimension `|S|` with basis elements `e_s`.
pub fn hilbert_module(space: &MeasureSpace, labels: &[String]) -> (ModuleObj, Vec<Element>) {
    let n = labels.len();
    let m = ModuleObj::uniform(space, NormExpr::unit(Exponent::Two, n));
    let basis = (0..n)
        .map(|s| {
            let mut v = Vector::zeros(n);
            v[s] = 1.0;
            Element { module: m.clone(), vectors: vec![v; space.len()] }
        })
        .collect();
    (m, basis)
}

/// `L0(X; M)`: the fiber at `(x, y)` is the fiber of `M` at `y`.
pub fn lb_module(x: &MeasureSpace, m: &ModuleObj) -> ModuleObj {
    let space = product_space(x, m.space());
    let fibers: Vec<Fiber> = (0..x.len()).flat_map(|_| m.fibers().iter().cloned()).collect();
    ModuleObj { space, fibers: fibers.into() }
}

/// `chi_E v` as a simple map into `L0(X; M)`: `v` on atoms of `E`, zero elsewhere.
pub fn lb_simple(x: &MeasureSpace, set: &[usize], v: &Element) -> Result<Element> {
    let module = lb_module(x, &v.module);
    let ny = v.module.atoms();
    let vectors = (0..x.len() * ny)
        .map(|k| {
            let (i, j) = (k / ny, k % ny);
            if set.contains(&i) {
                v.vectors[j].clone()
            } else {
                Vector::zeros(v.vectors[j].len())
            }
        })
        .collect();
    Element::new(&module, vectors)
}
