//! Finite atomic measure spaces, the ring `L0(X)` and measure-space maps.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: String,
    pub mass: f64,
}

/// Ordered list of atoms with strictly positive finite masses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct MeasureSpace {
    atoms: Arc<[Atom]>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    atoms: Vec<Atom>,
}

impl TryFrom<RawSpace> for MeasureSpace {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        MeasureSpace::new(raw.atoms)
    }
}

impl From<MeasureSpace> for RawSpace {
    fn from(s: MeasureSpace) -> Self {
        RawSpace { atoms: s.atoms.to_vec() }
    }
}

impl PartialEq for MeasureSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.atoms, &other.atoms) || self.atoms == other.atoms
    }
}

impl MeasureSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for a in &atoms {
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::InvalidSpace(format!("atom {} has mass {}", a.id, a.mass)));
            }
            if !seen.insert(a.id.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate atom id {}", a.id)));
            }
        }
        Ok(MeasureSpace { atoms: atoms.into() })
    }

    /// Convenience constructor from `(id, mass)` pairs.
    pub fn from_pairs(pairs: &[(&str, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|(id, mass)| Atom { id: id.to_string(), mass: *mass }).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.id == id)
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }
}

/// The one-point probability space.
pub fn dirac_point() -> MeasureSpace {
    MeasureSpace::from_pairs(&[("p", 1.0)]).expect("valid point space")
}

/// Product measure with atoms `(x,y)` in lexicographic order.
pub fn product_space(x: &MeasureSpace, y: &MeasureSpace) -> MeasureSpace {
    let atoms = x
        .atoms()
        .iter()
        .flat_map(|a| {
            y.atoms().iter().map(move |b| Atom { id: format!("({},{})", a.id, b.id), mass: a.mass * b.mass })
        })
        .collect();
    MeasureSpace::new(atoms).expect("products of valid spaces are valid")
}

/// An element of `L0(X)`: one finite value per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct L0Fun {
    pub space: MeasureSpace,
    pub values: Vec<f64>,
}

impl L0Fun {
    pub fn new(space: MeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("L0 values must be finite".into()));
        }
        Ok(L0Fun { space, values })
    }

    pub fn constant(space: &MeasureSpace, c: f64) -> Self {
        L0Fun { space: space.clone(), values: vec![c; space.len()] }
    }
}

/// An extended-real valued function, element of the lattice `L0_ext(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct L0ExtFun {
    pub space: MeasureSpace,
    pub values: Vec<f64>,
}

impl L0ExtFun {
    pub fn new(space: MeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch { expected: space.len(), got: values.len() });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("NaN is not an extended real".into()));
        }
        Ok(L0ExtFun { space, values })
    }
}

impl From<L0Fun> for L0ExtFun {
    fn from(f: L0Fun) -> Self {
        L0ExtFun { space: f.space, values: f.values }
    }
}

/// `sum_k 2^-(k+1) min(|f_k - g_k|, 1)` over the canonical atom order.
pub fn l0_distance(f: &L0Fun, g: &L0Fun) -> Result<f64> {
    if f.space != g.space {
        return Err(Error::SpaceMismatch);
    }
    Ok(f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .map(|(k, (a, b))| 0.5f64.powi(k as i32 + 1) * (a - b).abs().min(1.0))
        .sum())
}

fn lattice_fold(fs: &[L0ExtFun], pick: fn(f64, f64) -> f64) -> Result<L0ExtFun> {
    let first = fs.first().ok_or_else(|| Error::Parse("empty family".into()))?;
    let mut values = first.values.clone();
    for f in &fs[1..] {
        if f.space != first.space {
            return Err(Error::SpaceMismatch);
        }
        for (v, w) in values.iter_mut().zip(&f.values) {
            *v = pick(*v, *w);
        }
    }
    Ok(L0ExtFun { space: first.space.clone(), values })
}

pub fn lattice_sup(fs: &[L0ExtFun]) -> Result<L0ExtFun> {
    lattice_fold(fs, f64::max)
}

pub fn lattice_inf(fs: &[L0ExtFun]) -> Result<L0ExtFun> {
    lattice_fold(fs, f64::min)
}

/// A map of atoms `X -> Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasMorphism {
    pub source: MeasureSpace,
    pub target: MeasureSpace,
    map: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pushforward {
    pub masses: Vec<f64>,
    pub absolutely_continuous: bool,
}

impl MeasMorphism {
    /// `map[i]` is the index of the target atom hit by source atom `i`.
    pub fn new(source: MeasureSpace, target: MeasureSpace, map: Vec<usize>) -> Result<Self> {
        if map.len() != source.len() {
            return Err(Error::DimensionMismatch { expected: source.len(), got: map.len() });
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= target.len()) {
            return Err(Error::InvalidSpace(format!("target atom index {bad} out of range")));
        }
        let tau = MeasMorphism { source, target, map };
        if !tau.pushforward().absolutely_continuous {
            return Err(Error::InvalidSpace("pushforward not absolutely continuous".into()));
        }
        Ok(tau)
    }

    pub fn from_ids(source: MeasureSpace, target: MeasureSpace, pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = Vec::with_capacity(source.len());
        for a in source.atoms() {
            let img = pairs
                .get(&a.id)
                .ok_or_else(|| Error::InvalidSpace(format!("atom {} has no image", a.id)))?;
            map.push(target.index_of(img).ok_or_else(|| Error::InvalidSpace(format!("unknown target atom {img}")))?);
        }
        Self::new(source, target, map)
    }

    pub fn identity(x: &MeasureSpace) -> Self {
        MeasMorphism { source: x.clone(), target: x.clone(), map: (0..x.len()).collect() }
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn image_of(&self, i: usize) -> usize {
        self.map[i]
    }

    /// `self` after `first`.
    pub fn after(&self, first: &MeasMorphism) -> Result<MeasMorphism> {
        if first.target != self.source {
            return Err(Error::SpaceMismatch);
        }
        Ok(MeasMorphism {
            source: first.source.clone(),
            target: self.target.clone(),
            map: first.map.iter().map(|&j| self.map[j]).collect(),
        })
    }

    pub fn pushforward(&self) -> Pushforward {
        let mut masses = vec![0.0; self.target.len()];
        for (i, &j) in self.map.iter().enumerate() {
            masses[j] += self.source.atoms()[i].mass;
        }
        let absolutely_continuous =
            masses.iter().zip(self.target.atoms()).all(|(m, t)| *m == 0.0 || t.mass > 0.0);
        Pushforward { masses, absolutely_continuous }
    }
}

#[derive(Serialize, Deserialize)]
struct RawMeasMorphism {
    source: MeasureSpace,
    target: MeasureSpace,
    map: BTreeMap<String, String>,
}

impl Serialize for MeasMorphism {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let map = self
            .map
            .iter()
            .enumerate()
            .map(|(i, &j)| (self.source.atoms()[i].id.clone(), self.target.atoms()[j].id.clone()))
            .collect();
        RawMeasMorphism { source: self.source.clone(), target: self.target.clone(), map }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasMorphism {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMeasMorphism::deserialize(d)?;
        MeasMorphism::from_ids(raw.source, raw.target, &raw.map).map_err(serde::de::Error::custom)
    }
}

/// Atom-indexed lookup used when parsing per-atom data keyed by id.
pub fn id_index(space: &MeasureSpace) -> HashMap<&str, usize> {
    space.atoms().iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> MeasureSpace {
        MeasureSpace::from_pairs(&[("a", 1.0), ("b", 2.0)]).unwrap()
    }

    #[test]
    fn distance_hand_sums() {
        let x = ab();
        let f = L0Fun::new(x.clone(), vec![3.0, 0.5]).unwrap();
        let g = L0Fun::constant(&x, 0.0);
        assert!((l0_distance(&f, &g).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(l0_distance(&f, &f).unwrap(), 0.0);
        let a = MeasureSpace::from_pairs(&[("a", 1.0)]).unwrap();
        let f = L0Fun::new(a.clone(), vec![10.0]).unwrap();
        assert_eq!(l0_distance(&f, &L0Fun::constant(&a, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn distance_on_point_space() {
        let p = dirac_point();
        let f = L0Fun::new(p.clone(), vec![0.3]).unwrap();
        let g = L0Fun::new(p, vec![0.1]).unwrap();
        assert!((l0_distance(&f, &g).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_other_space() {
        let f = L0Fun::constant(&ab(), 1.0);
        let g = L0Fun::constant(&dirac_point(), 1.0);
        assert_eq!(l0_distance(&f, &g), Err(Error::SpaceMismatch));
    }

    #[test]
    fn lattice_examples() {
        let x = ab();
        let f = L0ExtFun::new(x.clone(), vec![1.0, 5.0]).unwrap();
        let g = L0ExtFun::new(x.clone(), vec![2.0, 3.0]).unwrap();
        assert_eq!(lattice_sup(&[f.clone(), g]).unwrap().values, vec![2.0, 5.0]);
        assert_eq!(lattice_sup(&[f.clone()]).unwrap(), f);
        let h = L0ExtFun::new(x.clone(), vec![f64::INFINITY, 0.0]).unwrap();
        let k = L0ExtFun::new(x, vec![1.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(lattice_inf(&[h, k]).unwrap().values, vec![1.0, f64::NEG_INFINITY]);
        assert!(lattice_sup(&[]).is_err());
    }

    #[test]
    fn pushforward_hand_sums() {
        let y = MeasureSpace::from_pairs(&[("c", 5.0)]).unwrap();
        let tau = MeasMorphism::new(ab(), y, vec![0, 0]).unwrap();
        assert_eq!(tau.pushforward().masses, vec![3.0]);
        assert_eq!(MeasMorphism::identity(&ab()).pushforward().masses, vec![1.0, 2.0]);
        let a = MeasureSpace::from_pairs(&[("a", 1.0)]).unwrap();
        let cd = MeasureSpace::from_pairs(&[("c", 1.0), ("d", 1.0)]).unwrap();
        let tau = MeasMorphism::new(a, cd, vec![0]).unwrap();
        let push = tau.pushforward();
        assert_eq!(push.masses, vec![1.0, 0.0]);
        assert!(push.absolutely_continuous);
    }

    #[test]
    fn product_examples() {
        let c = MeasureSpace::from_pairs(&[("c", 3.0)]).unwrap();
        let xy = product_space(&ab(), &c);
        assert_eq!(xy.atoms()[0], Atom { id: "(a,c)".into(), mass: 3.0 });
        assert_eq!(xy.atoms()[1], Atom { id: "(b,c)".into(), mass: 6.0 });
        let xp = product_space(&ab(), &dirac_point());
        assert_eq!(xp.masses(), ab().masses());
        assert_eq!(product_space(&dirac_point(), &dirac_point()).len(), 1);
    }

    #[test]
    fn invalid_spaces_rejected() {
        assert!(MeasureSpace::from_pairs(&[("a", 0.0)]).is_err());
        assert!(MeasureSpace::from_pairs(&[("a", f64::INFINITY)]).is_err());
        assert!(MeasureSpace::from_pairs(&[("a", 1.0), ("a", 2.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"atoms":[{"id":"a","mass":1.0},{"id":"b","mass":2.0}]}"#;
        let x: MeasureSpace = serde_json::from_str(json).unwrap();
        assert_eq!(x, ab());
        assert_eq!(serde_json::to_string(&x).unwrap(), json);
        let bad = r#"{"atoms":[{"id":"a","mass":-1.0}]}"#;
        assert!(serde_json::from_str::<MeasureSpace>(bad).is_err());
        let y = MeasureSpace::from_pairs(&[("c", 1.0)]).unwrap();
        let tau = MeasMorphism::new(ab(), y, vec![0, 0]).unwrap();
        let s = serde_json::to_string(&tau).unwrap();
        assert!(s.contains(r#""map":{"a":"c","b":"c"}"#));
        assert_eq!(serde_json::from_str::<MeasMorphism>(&s).unwrap(), tau);
    }
}
