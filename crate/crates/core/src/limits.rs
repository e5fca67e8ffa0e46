//! Finite index categories, diagrams, cones, and every finite limit.
//!
//! Limits are concrete: a basis-embedded submodule of an `l-infinity` product,
//! with norm `x -> sup(K x)` for an orthonormal basis `K` of the solution space
//! of the cone equations.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::measure::MeasureSpace;
use crate::modcat::{compose, Fiber, ModuleObj, Morphism};
use crate::normcalc::{Norm, NormExpr};

/// Tolerance for the exact matrix identities (functoriality, commutation).
pub const EXACT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub name: String,
    pub dom: usize,
    pub cod: usize,
}

/// Objects, arrows (identities included) and a full composition table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCategory", into = "RawCategory")]
pub struct FiniteCategory {
    objects: Vec<String>,
    arrows: Vec<Arrow>,
    identities: Vec<usize>,
    table: HashMap<(usize, usize), usize>,
}

#[derive(Serialize, Deserialize)]
struct RawCategory {
    objects: Vec<String>,
    /// Non-identity arrows.
    arrows: Vec<RawArrow>,
    /// Entries `[g, f, h]` meaning `g . f = h`, for non-identity `f`, `g`.
    #[serde(default)]
    compose: Vec<[String; 3]>,
}

#[derive(Serialize, Deserialize)]
struct RawArrow {
    name: String,
    dom: String,
    cod: String,
}

impl TryFrom<RawCategory> for FiniteCategory {
    type Error = Error;
    fn try_from(raw: RawCategory) -> Result<Self> {
        let obj = |name: &str| {
            raw.objects
                .iter()
                .position(|o| o == name)
                .ok_or_else(|| Error::InvalidCategory(format!("unknown object {name}")))
        };
        let arrows = raw
            .arrows
            .iter()
            .map(|a| Ok(Arrow { name: a.name.clone(), dom: obj(&a.dom)?, cod: obj(&a.cod)? }))
            .collect::<Result<Vec<_>>>()?;
        let arrow = |name: &str| {
            arrows
                .iter()
                .position(|a| a.name == name)
                .ok_or_else(|| Error::InvalidCategory(format!("unknown arrow {name}")))
        };
        let table = raw
            .compose
            .iter()
            .map(|[g, f, h]| Ok(((arrow(g)?, arrow(f)?), arrow(h)?)))
            .collect::<Result<Vec<_>>>()?;
        FiniteCategory::new(raw.objects.clone(), arrows, table)
    }
}

impl From<FiniteCategory> for RawCategory {
    fn from(c: FiniteCategory) -> Self {
        let generators: Vec<usize> = (0..c.arrows.len()).filter(|&a| !c.is_identity(a)).collect();
        let arrows = generators
            .iter()
            .map(|&a| RawArrow {
                name: c.arrows[a].name.clone(),
                dom: c.objects[c.arrows[a].dom].clone(),
                cod: c.objects[c.arrows[a].cod].clone(),
            })
            .collect();
        let mut compose: Vec<[String; 3]> = c
            .table
            .iter()
            .filter(|((g, f), _)| !c.is_identity(*g) && !c.is_identity(*f))
            .map(|((g, f), h)| [c.arrows[*g].name.clone(), c.arrows[*f].name.clone(), c.arrows[*h].name.clone()])
            .collect();
        compose.sort();
        RawCategory { objects: c.objects, arrows, compose }
    }
}

impl FiniteCategory {
    /// `arrows` are the non-identity arrows; `table` lists `((g, f), g . f)`
    /// for every composable non-identity pair, indices into `arrows`.
    pub fn new(objects: Vec<String>, arrows: Vec<Arrow>, table: Vec<((usize, usize), usize)>) -> Result<Self> {
        let n = objects.len();
        let g = arrows.len();
        for a in &arrows {
            if a.dom >= n || a.cod >= n {
                return Err(Error::InvalidCategory(format!("arrow {} has an unknown end", a.name)));
            }
        }
        let mut all = arrows;
        let identities: Vec<usize> = (0..n).map(|i| g + i).collect();
        for (i, o) in objects.iter().enumerate() {
            all.push(Arrow { name: format!("id_{o}"), dom: i, cod: i });
        }
        let mut comp = HashMap::new();
        for ((gg, f), h) in table {
            if gg >= g || f >= g || h >= g {
                return Err(Error::InvalidCategory("composition entry out of range".into()));
            }
            if all[f].cod != all[gg].dom || all[h].dom != all[f].dom || all[h].cod != all[gg].cod {
                return Err(Error::InvalidCategory(format!("ill-typed composite {} . {}", all[gg].name, all[f].name)));
            }
            comp.insert((gg, f), h);
        }
        for a in 0..all.len() {
            comp.insert((identities[all[a].cod], a), a);
            comp.insert((a, identities[all[a].dom]), a);
        }
        let cat = FiniteCategory { objects, arrows: all, identities, table: comp };
        cat.validate()?;
        Ok(cat)
    }

    fn validate(&self) -> Result<()> {
        let m = self.arrows.len();
        for f in 0..m {
            for g in 0..m {
                if self.arrows[f].cod == self.arrows[g].dom && !self.table.contains_key(&(g, f)) {
                    return Err(Error::InvalidCategory(format!(
                        "missing composite {} . {}",
                        self.arrows[g].name, self.arrows[f].name
                    )));
                }
            }
        }
        for f in 0..m {
            for g in (0..m).filter(|&g| self.arrows[f].cod == self.arrows[g].dom) {
                for h in (0..m).filter(|&h| self.arrows[g].cod == self.arrows[h].dom) {
                    let left = self.table[&(h, self.table[&(g, f)])];
                    let right = self.table[&(self.table[&(h, g)], f)];
                    if left != right {
                        return Err(Error::InvalidCategory("composition is not associative".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn discrete(n: usize) -> Self {
        FiniteCategory::new((0..n).map(|i| format!("o{i}")).collect(), Vec::new(), Vec::new()).expect("discrete")
    }

    /// `a, b : 0 -> 1`.
    pub fn parallel_pair() -> Self {
        let arrows = vec![Arrow { name: "a".into(), dom: 0, cod: 1 }, Arrow { name: "b".into(), dom: 0, cod: 1 }];
        FiniteCategory::new(vec!["src".into(), "tgt".into()], arrows, Vec::new()).expect("parallel pair")
    }

    /// `0 -> 2 <- 1`.
    pub fn cospan() -> Self {
        let arrows = vec![Arrow { name: "f".into(), dom: 0, cod: 2 }, Arrow { name: "g".into(), dom: 1, cod: 2 }];
        FiniteCategory::new(vec!["left".into(), "right".into(), "base".into()], arrows, Vec::new()).expect("cospan")
    }

    /// `1 <- 0 -> 2`.
    pub fn span() -> Self {
        let arrows = vec![Arrow { name: "f".into(), dom: 0, cod: 1 }, Arrow { name: "g".into(), dom: 0, cod: 2 }];
        FiniteCategory::new(vec!["base".into(), "left".into(), "right".into()], arrows, Vec::new()).expect("span")
    }

    /// A poset with an arrow `i -> j` for each `i < j` (`leq[i][j]`).
    pub fn poset(leq: &[Vec<bool>]) -> Result<Self> {
        let n = leq.len();
        let mut arrows = Vec::new();
        let mut index = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && leq[i][j] {
                    index.insert((i, j), arrows.len());
                    arrows.push(Arrow { name: format!("{i}<{j}"), dom: i, cod: j });
                }
            }
        }
        let mut table = Vec::new();
        for (&(i, j), &f) in &index {
            for (&(j2, k), &g) in &index {
                if j2 == j {
                    let h = *index
                        .get(&(i, k))
                        .ok_or_else(|| Error::InvalidCategory("order relation is not transitive".into()))?;
                    table.push(((g, f), h));
                }
            }
        }
        FiniteCategory::new((0..n).map(|i| format!("{i}")).collect(), arrows, table)
    }

    /// Same objects, arrows reversed.
    pub fn opposite(&self) -> Self {
        let mut arrows = self.arrows.clone();
        for a in &mut arrows {
            std::mem::swap(&mut a.dom, &mut a.cod);
        }
        let table = self.table.iter().map(|(&(g, f), &h)| ((f, g), h)).collect();
        FiniteCategory { objects: self.objects.clone(), arrows, identities: self.identities.clone(), table }
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn identity(&self, object: usize) -> usize {
        self.identities[object]
    }

    pub fn is_identity(&self, arrow: usize) -> bool {
        self.identities.contains(&arrow)
    }

    /// Index of `g . f`.
    pub fn compose(&self, g: usize, f: usize) -> Option<usize> {
        self.table.get(&(g, f)).copied()
    }

    /// Non-identity arrows.
    pub fn generators(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.arrows.len()).filter(|&a| !self.is_identity(a))
    }

    pub fn arrow_index(&self, name: &str) -> Option<usize> {
        self.arrows.iter().position(|a| a.name == name)
    }
}

/// A functor from a finite category into modules over one space.
#[derive(Debug, Clone)]
pub struct Diagram {
    pub index: FiniteCategory,
    pub objects: Vec<ModuleObj>,
    /// One morphism per arrow of `index`, identities included.
    pub arrows: Vec<Morphism>,
}

impl Diagram {
    /// `generators[k]` is the image of the `k`-th non-identity arrow.
    pub fn new(index: FiniteCategory, objects: Vec<ModuleObj>, generators: Vec<Morphism>) -> Result<Self> {
        if objects.len() != index.objects().len() {
            return Err(Error::InvalidDiagram("one module per object required".into()));
        }
        let space = objects.first().map(|m| m.space().clone());
        if objects.iter().any(|m| Some(m.space()) != space.as_ref()) {
            return Err(Error::SpaceMismatch);
        }
        let gens: Vec<usize> = index.generators().collect();
        if gens.len() != generators.len() {
            return Err(Error::InvalidDiagram("one morphism per non-identity arrow required".into()));
        }
        let mut arrows: Vec<Option<Morphism>> = vec![None; index.arrows().len()];
        for (k, m) in gens.iter().zip(generators) {
            arrows[*k] = Some(m);
        }
        for (i, o) in objects.iter().enumerate() {
            arrows[index.identity(i)] = Some(Morphism::identity(o));
        }
        let arrows: Vec<Morphism> = arrows.into_iter().map(Option::unwrap).collect();
        let d = Diagram { index, objects, arrows };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        for (k, a) in self.index.arrows().iter().enumerate() {
            let m = &self.arrows[k];
            if m.source() != &self.objects[a.dom] || m.target() != &self.objects[a.cod] {
                return Err(Error::InvalidDiagram(format!("arrow {} has the wrong ends", a.name)));
            }
            if !m.within_bound(crate::modcat::MORPHISM_TOL) {
                return Err(Error::InvalidDiagram(format!("arrow {} is not a morphism", a.name)));
            }
        }
        for (&(g, f), &h) in &self.index.table {
            let gf = compose(&self.arrows[g], &self.arrows[f])?;
            if mats_gap(gf.mats(), self.arrows[h].mats()) > EXACT_TOL {
                return Err(Error::InvalidDiagram(format!(
                    "composition not preserved at {} . {}",
                    self.index.arrows()[g].name,
                    self.index.arrows()[f].name
                )));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Option<&MeasureSpace> {
        self.objects.first().map(|m| m.space())
    }

    pub fn arrow(&self, name: &str) -> Option<&Morphism> {
        self.index.arrow_index(name).map(|k| &self.arrows[k])
    }
}

/// Largest entrywise gap between two matrix families.
pub fn mats_gap(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if x.shape() == y.shape() { linalg::max_abs(&(x - y)) } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// An apex with one leg into each object of a diagram.
#[derive(Debug, Clone)]
pub struct Cone {
    pub apex: ModuleObj,
    pub legs: Vec<Morphism>,
}

impl Cone {
    /// Largest gap in `D(f) . leg_i = leg_j` over all arrows `f : i -> j`.
    pub fn residual(&self, d: &Diagram) -> Result<f64> {
        if self.legs.len() != d.objects.len() {
            return Err(Error::InvalidDiagram("one leg per object required".into()));
        }
        let mut worst: f64 = 0.0;
        for (k, a) in d.index.arrows().iter().enumerate() {
            let lhs = compose(&d.arrows[k], &self.legs[a.dom])?;
            worst = worst.max(mats_gap(lhs.mats(), self.legs[a.cod].mats()));
        }
        Ok(worst)
    }
}

/// Submodule of the `l-infinity` product of `factors` cut out per atom by
/// `constraints[atom] * x = 0`; legs are the coordinate projections.
pub(crate) fn constrained_product(space: &MeasureSpace, factors: &[ModuleObj], constraints: &[Mat]) -> Result<Cone> {
    let (ambient, projections) = product(space, factors)?;
    let mut fibers = Vec::with_capacity(space.len());
    let mut bases = Vec::with_capacity(space.len());
    for atom in 0..space.len() {
        let c = &constraints[atom];
        let norm = ambient.norm(atom).clone();
        if c.nrows() == 0 || linalg::max_abs(c) == 0.0 {
            bases.push(Mat::identity(norm.dim(), norm.dim()));
            fibers.push(Fiber::new(single_child(&norm)));
            continue;
        }
        let k = linalg::null_space(c);
        let inner = single_child(&norm);
        fibers.push(Fiber::new(NormExpr::compose(k.clone(), inner)?));
        bases.push(k);
    }
    let apex = ModuleObj::new(space.clone(), fibers)?;
    let legs = projections
        .iter()
        .map(|p| {
            let mats = p.mats().iter().zip(&bases).map(|(m, k)| m * k).collect();
            Morphism::unchecked(&apex, p.target(), mats)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cone { apex, legs })
}

/// A one-child sup is the child itself.
fn single_child(n: &Norm) -> Norm {
    match n.as_ref() {
        NormExpr::SupOf(slots) | NormExpr::SumOf(slots) if slots.len() == 1 => slots[0].norm.clone(),
        _ => n.clone(),
    }
}

/// `Ker(phi)` with its inclusion.
pub fn kernel(phi: &Morphism) -> Result<(ModuleObj, Morphism)> {
    let cone = constrained_product(phi.source().space(), std::slice::from_ref(phi.source()), phi.mats())?;
    let leg = cone.legs.into_iter().next().expect("one factor");
    Ok((cone.apex, leg))
}

/// `Ker((phi - psi) / 2)`.
pub fn equalizer(phi: &Morphism, psi: &Morphism) -> Result<(ModuleObj, Morphism)> {
    if phi.source() != psi.source() || phi.target() != psi.target() {
        return Err(Error::InvalidDiagram("equalizer needs a parallel pair".into()));
    }
    kernel(&phi.half_difference(psi)?)
}

/// `l-infinity` product with its projections.
pub fn product(space: &MeasureSpace, factors: &[ModuleObj]) -> Result<(ModuleObj, Vec<Morphism>)> {
    if factors.iter().any(|m| m.space() != space) {
        return Err(Error::SpaceMismatch);
    }
    let norms: Vec<Norm> = (0..space.len())
        .map(|atom| NormExpr::sup(factors.iter().map(|m| m.norm(atom).clone()).collect()))
        .collect();
    let apex = ModuleObj::from_norms(space.clone(), norms)?;
    let projections = slice_maps(&apex, factors, true)?;
    Ok((apex, projections))
}

/// Coordinate projections out of (or injections into) a concatenation.
pub(crate) fn slice_maps(total: &ModuleObj, parts: &[ModuleObj], project: bool) -> Result<Vec<Morphism>> {
    let space = total.space();
    let mut offsets = vec![0usize; space.len()];
    let mut out = Vec::with_capacity(parts.len());
    for part in parts {
        let mats: Vec<Mat> = (0..space.len())
            .map(|atom| {
                let d = part.dim(atom);
                let n = total.dim(atom);
                let sel = Mat::from_fn(d, n, |i, j| if j == offsets[atom] + i { 1.0 } else { 0.0 });
                offsets[atom] += d;
                if project {
                    sel
                } else {
                    sel.transpose()
                }
            })
            .collect();
        let bound = if project { (total, part) } else { (part, total) };
        out.push(Morphism::unchecked(bound.0, bound.1, mats)?);
    }
    Ok(out)
}

/// `M x_Q N` inside `M (+)_inf N`, with its two projections.
pub fn pullback(phi: &Morphism, psi: &Morphism) -> Result<(ModuleObj, Morphism, Morphism)> {
    if phi.target() != psi.target() {
        return Err(Error::InvalidDiagram("pullback needs a common codomain".into()));
    }
    let space = phi.source().space();
    let constraints: Vec<Mat> =
        (0..space.len()).map(|a| linalg::hstack(&[phi.mat(a), &(-psi.mat(a))], phi.target().dim(a))).collect();
    let cone = constrained_product(space, &[phi.source().clone(), psi.source().clone()], &constraints)?;
    let mut legs = cone.legs.into_iter();
    Ok((cone.apex, legs.next().unwrap(), legs.next().unwrap()))
}

/// A system over a finite directed poset, given for every pair `i <= j`.
///
/// For inverse systems `maps[(i, j)] : M_j -> M_i`; for direct systems
/// `maps[(i, j)] : M_i -> M_j`.
#[derive(Debug, Clone)]
pub struct PosetSystem {
    pub leq: Vec<Vec<bool>>,
    pub modules: Vec<ModuleObj>,
    pub maps: BTreeMap<(usize, usize), Morphism>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inverse,
    Direct,
}

impl PosetSystem {
    pub fn new(
        leq: Vec<Vec<bool>>,
        modules: Vec<ModuleObj>,
        maps: BTreeMap<(usize, usize), Morphism>,
        dir: Direction,
    ) -> Result<Self> {
        let s = PosetSystem { leq, modules, maps };
        s.validate(dir)?;
        Ok(s)
    }

    /// Builds all maps from a rooted tree: `parent[i]` is the successor of `i`
    /// (the root is the maximum) and `edges[i]` the map along that edge.
    pub fn from_tree(parent: &[Option<usize>], modules: Vec<ModuleObj>, edges: Vec<Option<Morphism>>, dir: Direction) -> Result<Self> {
        let n = parent.len();
        let ancestors = |i: usize| {
            let mut chain = vec![i];
            let mut cur = i;
            while let Some(p) = parent[cur] {
                chain.push(p);
                cur = p;
                if chain.len() > n {
                    break;
                }
            }
            chain
        };
        let mut leq = vec![vec![false; n]; n];
        let mut maps = BTreeMap::new();
        for i in 0..n {
            let chain = ancestors(i);
            if chain.len() > n {
                return Err(Error::InvalidSystem("parent links contain a cycle".into()));
            }
            let mut acc = Morphism::identity(&modules[i]);
            for (step, &j) in chain.iter().enumerate() {
                if step > 0 {
                    let e = edges[chain[step - 1]]
                        .as_ref()
                        .ok_or_else(|| Error::InvalidSystem("missing edge map".into()))?;
                    acc = match dir {
                        Direction::Direct => compose(e, &acc)?,
                        Direction::Inverse => compose(&acc, e)?,
                    };
                }
                leq[i][j] = true;
                maps.insert((i, j), acc.clone());
            }
        }
        PosetSystem::new(leq, modules, maps, dir)
    }

    /// A chain `0 <= 1 <= ... <= n-1` from the maps between neighbours.
    pub fn chain(modules: Vec<ModuleObj>, steps: Vec<Morphism>, dir: Direction) -> Result<Self> {
        let n = modules.len();
        let parent: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
        let mut edges: Vec<Option<Morphism>> = steps.into_iter().map(Some).collect();
        edges.push(None);
        PosetSystem::from_tree(&parent, modules, edges, dir)
    }

    fn validate(&self, dir: Direction) -> Result<()> {
        let n = self.modules.len();
        if self.leq.len() != n || self.leq.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSystem("order relation has the wrong size".into()));
        }
        for i in 0..n {
            if !self.leq[i][i] {
                return Err(Error::InvalidSystem("order relation is not reflexive".into()));
            }
            for j in 0..n {
                if i != j && self.leq[i][j] && self.leq[j][i] {
                    return Err(Error::InvalidSystem("order relation is not antisymmetric".into()));
                }
                if !(0..n).any(|k| self.leq[i][k] && self.leq[j][k]) {
                    return Err(Error::InvalidSystem(format!("{i} and {j} have no upper bound")));
                }
            }
        }
        for i in 0..n {
            for j in (0..n).filter(|&j| self.leq[i][j]) {
                let m = self.maps.get(&(i, j)).ok_or_else(|| Error::InvalidSystem(format!("missing map {i}<={j}")))?;
                let (src, tgt) = match dir {
                    Direction::Direct => (&self.modules[i], &self.modules[j]),
                    Direction::Inverse => (&self.modules[j], &self.modules[i]),
                };
                if m.source() != src || m.target() != tgt {
                    return Err(Error::InvalidSystem(format!("map {i}<={j} has the wrong ends")));
                }
                if i == j && mats_gap(m.mats(), Morphism::identity(src).mats()) > EXACT_TOL {
                    return Err(Error::InvalidSystem(format!("map {i}<={i} is not the identity")));
                }
                for k in (0..n).filter(|&k| self.leq[j][k]) {
                    let mk = &self.maps[&(j, k)];
                    let ik = &self.maps[&(i, k)];
                    let composite = match dir {
                        Direction::Direct => compose(mk, m)?,
                        Direction::Inverse => compose(m, mk)?,
                    };
                    if mats_gap(composite.mats(), ik.mats()) > EXACT_TOL {
                        return Err(Error::InvalidSystem(format!("maps {i}<={j}<={k} do not compose")));
                    }
                }
            }
        }
        Ok(())
    }

    /// The maximum element (finite directed posets always have one).
    pub fn maximum(&self) -> usize {
        let n = self.modules.len();
        (0..n).find(|&m| (0..n).all(|i| self.leq[i][m])).expect("finite directed posets have a maximum")
    }

    /// The system as a diagram: over the poset for direct systems, over its
    /// opposite for inverse systems.
    pub fn to_diagram(&self, dir: Direction) -> Result<Diagram> {
        let poset = FiniteCategory::poset(&self.leq)?;
        let index = match dir {
            Direction::Direct => poset,
            Direction::Inverse => poset.opposite(),
        };
        let generators = index
            .generators()
            .map(|k| {
                let a = &index.arrows()[k];
                let key = match dir {
                    Direction::Direct => (a.dom, a.cod),
                    Direction::Inverse => (a.cod, a.dom),
                };
                self.maps[&key].clone()
            })
            .collect();
        Diagram::new(index, self.modules.clone(), generators)
    }
}

/// Threads `(v_i)` with `v_i = P_ij v_j`, normed by `sup_i |v_i|`.
pub fn inverse_limit(system: &PosetSystem) -> Result<Cone> {
    let space = system
        .modules
        .first()
        .ok_or_else(|| Error::InvalidSystem("empty index set".into()))?
        .space()
        .clone();
    let constraints = thread_equations(&space, &system.modules, |atom| {
        let mut rows = Vec::new();
        for (&(i, j), m) in &system.maps {
            if i != j {
                rows.push((i, j, m.mat(atom).clone()));
            }
        }
        rows
    });
    constrained_product(&space, &system.modules, &constraints)
}

/// Per-atom stacked equations `M x_from - x_to = 0`, one block per `(to, from, M)`.
fn thread_equations<F>(space: &MeasureSpace, modules: &[ModuleObj], blocks: F) -> Vec<Mat>
where
    F: Fn(usize) -> Vec<(usize, usize, Mat)>,
{
    (0..space.len())
        .map(|atom| {
            let dims: Vec<usize> = modules.iter().map(|m| m.dim(atom)).collect();
            let offsets: Vec<usize> = dims.iter().scan(0, |acc, d| {
                let o = *acc;
                *acc += d;
                Some(o)
            }).collect();
            let total: usize = dims.iter().sum();
            let eqs = blocks(atom);
            let rows: usize = eqs.iter().map(|(to, _, _)| dims[*to]).sum();
            let mut c = Mat::zeros(rows, total);
            let mut r = 0;
            for (to, from, m) in eqs {
                for i in 0..dims[to] {
                    for j in 0..dims[from] {
                        c[(r + i, offsets[from] + j)] += m[(i, j)];
                    }
                    c[(r + i, offsets[to] + i)] -= 1.0;
                }
                r += dims[to];
            }
            c
        })
        .collect()
}

/// The limit as an equalizer of two maps between products: objects
/// `Y = prod_i D(i)`, `Z = prod_f D(cod f)`, with `a(y)_f = y_cod f` and
/// `b(y)_f = D(f) y_dom f`.
pub fn limit_of_diagram(d: &Diagram) -> Result<Cone> {
    let space = d.space().ok_or_else(|| Error::InvalidDiagram("empty diagram".into()))?.clone();
    let (y, proj_y) = product(&space, &d.objects)?;
    let arrows = d.index.arrows();
    let cods: Vec<ModuleObj> = arrows.iter().map(|a| d.objects[a.cod].clone()).collect();
    let (z, _) = product(&space, &cods)?;
    let a_mats: Vec<Mat> = (0..space.len())
        .map(|atom| {
            let blocks: Vec<Mat> = arrows.iter().map(|f| proj_y[f.cod].mat(atom).clone()).collect();
            linalg::vstack(&blocks.iter().collect::<Vec<_>>(), y.dim(atom))
        })
        .collect();
    let b_mats: Vec<Mat> = (0..space.len())
        .map(|atom| {
            let blocks: Vec<Mat> =
                arrows.iter().enumerate().map(|(k, f)| d.arrows[k].mat(atom) * proj_y[f.dom].mat(atom)).collect();
            linalg::vstack(&blocks.iter().collect::<Vec<_>>(), y.dim(atom))
        })
        .collect();
    let a = Morphism::unchecked(&y, &z, a_mats)?;
    let b = Morphism::unchecked(&y, &z, b_mats)?;
    let (apex, e) = equalizer(&a, &b)?;
    let legs = proj_y.iter().map(|p| compose(p, &e)).collect::<Result<Vec<_>>>()?;
    Ok(Cone { apex, legs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::dirac_point;
    use crate::normcalc::{eval_norm, Exponent};

    fn line(p: Exponent, d: usize) -> ModuleObj {
        ModuleObj::uniform(&dirac_point(), NormExpr::unit(p, d))
    }

    fn map(src: &ModuleObj, tgt: &ModuleObj, rows: usize, cols: usize, entries: &[f64]) -> Morphism {
        Morphism::new(src, tgt, vec![Mat::from_row_slice(rows, cols, entries)]).unwrap()
    }

    #[test]
    fn category_validation() {
        assert!(FiniteCategory::parallel_pair().compose(0, 0).is_none());
        let bad = vec![Arrow { name: "f".into(), dom: 0, cod: 0 }];
        assert!(FiniteCategory::new(vec!["x".into()], bad, Vec::new()).is_err());
        let chain = FiniteCategory::poset(&[vec![true, true, true], vec![false, true, true], vec![false, false, true]]).unwrap();
        assert_eq!(chain.generators().count(), 3);
        let json = serde_json::to_value(&chain).unwrap();
        let back: FiniteCategory = serde_json::from_value(json).unwrap();
        assert_eq!(back.arrows().len(), chain.arrows().len());
    }

    #[test]
    fn kernel_examples() {
        let r2 = line(Exponent::Two, 2);
        let r1 = line(Exponent::Two, 1);
        let pr = map(&r2, &r1, 1, 2, &[1.0, 0.0]);
        let (k, inc) = kernel(&pr).unwrap();
        assert_eq!(k.dims(), vec![1]);
        let col = inc.mat(0);
        assert!(col[(0, 0)].abs() < 1e-15 && (col[(1, 0)].abs() - 1.0).abs() < 1e-15);
        let (k0, _) = kernel(&Morphism::zero(&r2, &r1).unwrap()).unwrap();
        assert_eq!(k0.dims(), vec![2]);
        let (kid, _) = kernel(&Morphism::identity(&r2)).unwrap();
        assert!(kid.is_zero());
        assert!(inc.within_bound(1e-9), "{:?}", inc.norm_bound());
    }

    #[test]
    fn equalizer_example() {
        let r2 = line(Exponent::Two, 2);
        let a = Morphism::identity(&r2);
        let b = map(&r2, &r2, 2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let (e, inc) = equalizer(&a, &b).unwrap();
        assert_eq!(e.dims(), vec![1]);
        assert!(inc.mat(0)[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn product_norm_is_max() {
        let (p, legs) = product(&dirac_point(), &[line(Exponent::One, 1), line(Exponent::Two, 2)]).unwrap();
        assert_eq!(eval_norm(p.norm(0), &[2.0, 3.0, 0.0], 1e-9).unwrap(), 3.0);
        assert_eq!(legs.len(), 2);
        let (z, _) = product(&dirac_point(), &[]).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn pullback_diagonal() {
        let r = line(Exponent::Two, 1);
        let id = Morphism::identity(&r);
        let (p, pm, pn) = pullback(&id, &id).unwrap();
        assert_eq!(p.dims(), vec![1]);
        let x = [1.0];
        let v = eval_norm(p.norm(0), &x, 1e-9).unwrap();
        let t = (pm.mat(0) * nalgebra::DVector::from_column_slice(&x))[0];
        assert!((v - t.abs()).abs() < 1e-15);
        assert!(mats_gap(pm.mats(), pn.mats()) < 1e-15);
    }

    #[test]
    fn inverse_limit_chain_scaling() {
        let m = line(Exponent::Two, 1);
        let n = 4;
        let steps: Vec<Morphism> =
            (1..n).map(|i| Morphism::identity(&m).scaled_unchecked(i as f64 / (i + 1) as f64)).collect();
        let sys = PosetSystem::chain(vec![m.clone(); n], steps, Direction::Inverse).unwrap();
        assert_eq!(sys.maximum(), n - 1);
        let cone = inverse_limit(&sys).unwrap();
        assert_eq!(cone.apex.dims(), vec![1]);
        // Leg i scales the top coordinate by (i + 1) / n.
        let top = cone.legs[n - 1].mat(0)[(0, 0)];
        for (i, leg) in cone.legs.iter().enumerate() {
            let ratio = leg.mat(0)[(0, 0)] / top;
            assert!((ratio - (i + 1) as f64 / n as f64).abs() < 1e-12);
        }
        let d = sys.to_diagram(Direction::Inverse).unwrap();
        assert!(cone.residual(&d).unwrap() < 1e-12);
    }

    #[test]
    fn engine_matches_product_on_discrete() {
        let objs = vec![line(Exponent::One, 2), line(Exponent::Inf, 1)];
        let d = Diagram::new(FiniteCategory::discrete(2), objs.clone(), Vec::new()).unwrap();
        let cone = limit_of_diagram(&d).unwrap();
        assert_eq!(cone.apex.dims(), vec![3]);
        assert!(cone.residual(&d).unwrap() < 1e-12);
    }
}
