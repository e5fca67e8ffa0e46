//! JSON instance files for `banmod check`.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "space": {"atoms": [{"id": "a", "mass": 1.0}]},
//!   "modules": {"A": [{"lp": {"p": 2, "weights": [1, 1]}}]},
//!   "morphisms": {"f": {"source": "A", "target": "A", "mats": [[[1, 0], [0, 1]]]}},
//!   "construction": "kernel",
//!   "args": ["f"]
//! }
//! ```
//!
//! Modules list one norm per atom, morphisms one row-major matrix per atom.
//! `limit` and `colimit` take a `diagram` instead of `args`.

use std::collections::BTreeMap;

use banmod::audit::{specialized_colimit, specialized_limit, Shape};
use banmod::colimits::{colimit_of_diagram, Cocone};
use banmod::limits::{limit_of_diagram, Cone, Diagram, FiniteCategory};
use banmod::linalg::Mat;
use banmod::measure::MeasureSpace;
use banmod::modcat::{is_morphism, ModuleObj, Morphism, MorphismReport};
use banmod::normcalc::{norm_serde, Norm};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const CONSTRUCTIONS: [&str; 10] =
    ["kernel", "cokernel", "equalizer", "coequalizer", "product", "coproduct", "pullback", "pushout", "limit", "colimit"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub schema_version: u32,
    pub space: MeasureSpace,
    pub modules: BTreeMap<String, Vec<NormJson>>,
    #[serde(default)]
    pub morphisms: BTreeMap<String, RawMorphism>,
    pub construction: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub diagram: Option<RawDiagram>,
}

#[derive(Deserialize)]
pub struct NormJson(#[serde(with = "norm_serde")] Norm);

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMorphism {
    pub source: String,
    pub target: String,
    pub mats: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiagram {
    pub index: FiniteCategory,
    /// Index object name to module name.
    pub objects: BTreeMap<String, String>,
    /// Index arrow name to morphism name.
    pub arrows: BTreeMap<String, String>,
}

#[derive(Debug, Serialize)]
pub struct MorphismCheck {
    pub name: String,
    #[serde(flatten)]
    pub report: MorphismReport,
}

pub enum Built {
    Limit(Diagram, Cone),
    Colimit(Diagram, Cocone),
}

/// Modules and morphisms resolved against the instance's space.
pub struct Loaded {
    pub instance: Instance,
    modules: BTreeMap<String, ModuleObj>,
    raw_mats: BTreeMap<String, Vec<Mat>>,
    morphisms: BTreeMap<String, Morphism>,
}

pub fn parse(text: &str) -> Result<Instance, Failure> {
    let inst: Instance = serde_json::from_str(text).map_err(|e| Failure::Usage(format!("malformed instance: {e}")))?;
    if inst.schema_version != banmod::audit::SCHEMA_VERSION {
        return Err(Failure::Usage(format!("unsupported schema_version {}", inst.schema_version)));
    }
    if !CONSTRUCTIONS.contains(&inst.construction.as_str()) {
        return Err(Failure::Usage(format!("unknown construction {}", inst.construction)));
    }
    Ok(inst)
}

fn matrix(name: &str, atom: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Mat, Failure> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Failure::Usage(format!("morphism {name}: matrix on atom {atom} must be {nrows}x{ncols}")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Loaded {
    pub fn new(instance: Instance) -> Result<Self, Failure> {
        let space = instance.space.clone();
        let mut modules = BTreeMap::new();
        for (name, norms) in &instance.modules {
            let norms = norms.iter().map(|n| n.0.clone()).collect();
            let m = ModuleObj::from_norms(space.clone(), norms).map_err(|e| Failure::Usage(format!("module {name}: {e}")))?;
            modules.insert(name.clone(), m);
        }
        let mut raw_mats = BTreeMap::new();
        for (name, raw) in &instance.morphisms {
            let lookup = |m: &str| modules.get(m).ok_or_else(|| Failure::Usage(format!("morphism {name}: unknown module {m}")));
            let (src, tgt) = (lookup(&raw.source)?, lookup(&raw.target)?);
            if raw.mats.len() != space.len() {
                return Err(Failure::Usage(format!("morphism {name}: need one matrix per atom")));
            }
            let mats = raw
                .mats
                .iter()
                .enumerate()
                .map(|(k, rows)| matrix(name, &space.atoms()[k].id, rows, tgt.dim(k), src.dim(k)))
                .collect::<Result<Vec<_>, _>>()?;
            raw_mats.insert(name.clone(), mats);
        }
        Ok(Loaded { instance, modules, raw_mats, morphisms: BTreeMap::new() })
    }

    /// Bounds every morphism's operator norm atom by atom.
    pub fn check_morphisms(&mut self, tol: f64) -> Result<Vec<MorphismCheck>, Failure> {
        let mut out = Vec::new();
        for (name, mats) in &self.raw_mats {
            let raw = &self.instance.morphisms[name];
            let (src, tgt) = (&self.modules[&raw.source], &self.modules[&raw.target]);
            let report = is_morphism(src, tgt, mats, tol).map_err(|e| Failure::Semantic(format!("morphism {name}: {e}")))?;
            if report.ok {
                let m = Morphism::unchecked(src, tgt, mats.clone()).map_err(|e| Failure::Semantic(e.to_string()))?;
                self.morphisms.insert(name.clone(), m);
            }
            out.push(MorphismCheck { name: name.clone(), report });
        }
        Ok(out)
    }

    fn module(&self, name: &str) -> Result<&ModuleObj, Failure> {
        self.modules.get(name).ok_or_else(|| Failure::Usage(format!("unknown module {name}")))
    }

    fn morphism(&self, name: &str) -> Result<&Morphism, Failure> {
        self.morphisms.get(name).ok_or_else(|| Failure::Usage(format!("unknown morphism {name}")))
    }

    fn args<const N: usize>(&self) -> Result<[&Morphism; N], Failure> {
        let args = &self.instance.args;
        if args.len() != N {
            return Err(Failure::Usage(format!("{} takes {N} morphism(s)", self.instance.construction)));
        }
        let v = args.iter().map(|a| self.morphism(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(v.try_into().unwrap_or_else(|_| unreachable!()))
    }

    /// Builds the requested diagram and its (co)limit.
    pub fn build(&self) -> Result<Built, Failure> {
        let sem = |e: banmod::Error| Failure::Semantic(e.to_string());
        let construction = self.instance.construction.as_str();
        let is_limit = matches!(construction, "kernel" | "equalizer" | "product" | "pullback" | "limit");
        let (d, shape) = match construction {
            "kernel" | "cokernel" => {
                let [f] = self.args::<1>()?;
                let zero = Morphism::zero(f.source(), f.target()).map_err(sem)?;
                let objects = vec![f.source().clone(), f.target().clone()];
                (Diagram::new(FiniteCategory::parallel_pair(), objects, vec![f.clone(), zero]).map_err(sem)?, Some(Shape::ParallelPair))
            }
            "equalizer" | "coequalizer" => {
                let [f, g] = self.args::<2>()?;
                let objects = vec![f.source().clone(), f.target().clone()];
                let d = Diagram::new(FiniteCategory::parallel_pair(), objects, vec![f.clone(), g.clone()]).map_err(sem)?;
                (d, Some(Shape::ParallelPair))
            }
            "product" | "coproduct" => {
                let factors = self.instance.args.iter().map(|a| self.module(a).cloned()).collect::<Result<Vec<_>, _>>()?;
                if factors.is_empty() {
                    return Err(Failure::Usage(format!("{construction} needs at least one module")));
                }
                (Diagram::new(FiniteCategory::discrete(factors.len()), factors, Vec::new()).map_err(sem)?, Some(Shape::Discrete))
            }
            "pullback" => {
                let [f, g] = self.args::<2>()?;
                let objects = vec![f.source().clone(), g.source().clone(), f.target().clone()];
                (Diagram::new(FiniteCategory::cospan(), objects, vec![f.clone(), g.clone()]).map_err(sem)?, Some(Shape::Cospan))
            }
            "pushout" => {
                let [f, g] = self.args::<2>()?;
                let objects = vec![f.source().clone(), f.target().clone(), g.target().clone()];
                (Diagram::new(FiniteCategory::span(), objects, vec![f.clone(), g.clone()]).map_err(sem)?, Some(Shape::Span))
            }
            _ => (self.diagram()?, None),
        };
        let built = match (is_limit, shape) {
            (true, Some(s)) => Built::Limit(d.clone(), specialized_limit(&d, s).map_err(sem)?),
            (true, None) => Built::Limit(d.clone(), limit_of_diagram(&d).map_err(sem)?),
            (false, Some(s)) => Built::Colimit(d.clone(), specialized_colimit(&d, s).map_err(sem)?),
            (false, None) => Built::Colimit(d.clone(), colimit_of_diagram(&d).map_err(sem)?),
        };
        Ok(built)
    }

    fn diagram(&self) -> Result<Diagram, Failure> {
        let raw = self
            .instance
            .diagram
            .as_ref()
            .ok_or_else(|| Failure::Usage(format!("{} needs a diagram", self.instance.construction)))?;
        let index = raw.index.clone();
        let objects = index
            .objects()
            .iter()
            .map(|o| {
                let m = raw.objects.get(o).ok_or_else(|| Failure::Usage(format!("diagram object {o} has no module")))?;
                self.module(m).cloned()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let generators = index
            .generators()
            .map(|k| {
                let a = &index.arrows()[k].name;
                let m = raw.arrows.get(a).ok_or_else(|| Failure::Usage(format!("diagram arrow {a} has no morphism")))?;
                self.morphism(m).cloned()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if objects.is_empty() {
            return Err(Failure::Usage("diagram has no objects".into()));
        }
        Diagram::new(index, objects, generators).map_err(|e| Failure::Semantic(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "schema_version": 1,
        "space": {"atoms": [{"id": "a", "mass": 1.0}]},
        "modules": {"M": [{"lp": {"p": 1, "weights": [1.0, 1.0]}}]},
        "morphisms": {"half": {"source": "M", "target": "M", "mats": [[[0.5, 0.0], [0.0, 0.5]]]}},
        "construction": "kernel",
        "args": ["half"]
    }"#;

    fn usage(r: Result<impl Sized, Failure>) -> bool {
        matches!(r, Err(Failure::Usage(_)))
    }

    #[test]
    fn loads_and_builds_a_kernel() {
        let mut l = Loaded::new(parse(TINY).unwrap()).unwrap();
        let checks = l.check_morphisms(1e-9).unwrap();
        assert!(checks[0].report.ok);
        assert!((checks[0].report.norms[0] - 0.5).abs() < 1e-9);
        match l.build().unwrap() {
            Built::Limit(d, cone) => {
                assert_eq!(cone.apex.dim(0), 0);
                assert!(cone.residual(&d).unwrap() < 1e-12);
            }
            Built::Colimit(..) => panic!("kernel is a limit"),
        }
    }

    #[test]
    fn rejects_other_schema_versions() {
        assert!(usage(parse(&TINY.replace("\"schema_version\": 1", "\"schema_version\": 2"))));
    }

    #[test]
    fn rejects_unknown_fields_and_constructions() {
        assert!(usage(parse(&TINY.replace("\"args\"", "\"argz\""))));
        assert!(usage(parse(&TINY.replace("\"kernel\"", "\"tensor\""))));
    }

    #[test]
    fn arity_is_checked() {
        let mut l = Loaded::new(parse(&TINY.replace("[\"half\"]", "[\"half\", \"half\"]")).unwrap()).unwrap();
        l.check_morphisms(1e-9).unwrap();
        assert!(usage(l.build()));
    }

    #[test]
    fn unknown_module_reference() {
        assert!(usage(Loaded::new(parse(&TINY.replace("\"target\": \"M\"", "\"target\": \"N\"")).unwrap())));
    }
}
