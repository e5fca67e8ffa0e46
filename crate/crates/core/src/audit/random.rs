//! Seeded random spaces, modules, morphisms, diagrams and (co)cones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::colimits::Cocone;
use crate::error::Result;
use crate::limits::{Cone, Diagram, Direction, FiniteCategory, PosetSystem};
use crate::linalg::{self, Mat, Vector};
use crate::measure::{MeasMorphism, MeasureSpace};
use crate::modcat::{ModuleObj, Morphism};
use crate::normcalc::{op_norm_upper, Exponent, Norm, NormExpr, DEFAULT_TOL};

/// Bounds on generated instances.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub max_atoms: usize,
    pub max_dim: usize,
    pub max_objects: usize,
    pub exponents: Vec<Exponent>,
    /// Chance that a generated fiber is zero-dimensional.
    pub zero_fiber: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            max_atoms: 4,
            max_dim: 4,
            max_objects: 4,
            exponents: vec![Exponent::One, Exponent::Two, Exponent::Inf],
            zero_fiber: 0.05,
        }
    }
}

/// Index shapes for random diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Discrete,
    ParallelPair,
    Cospan,
    Span,
    Tree,
}

pub const SHAPES: [Shape; 5] = [Shape::Discrete, Shape::ParallelPair, Shape::Cospan, Shape::Span, Shape::Tree];

/// Random source for one trial.
pub struct Sampler {
    pub rng: ChaCha8Rng,
    pub cfg: AuditConfig,
}

impl Sampler {
    pub fn new(seed: u64, cfg: AuditConfig) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), cfg }
    }

    /// Independent stream `trial` of `seed`.
    pub fn for_trial(seed: u64, trial: u64, cfg: AuditConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Sampler { rng, cfg }
    }

    pub fn space(&mut self) -> MeasureSpace {
        let n = self.rng.gen_range(1..=self.cfg.max_atoms.max(1));
        self.space_of(n)
    }

    pub fn space_of(&mut self, n: usize) -> MeasureSpace {
        let ids: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
        let pairs: Vec<(&str, f64)> = ids.iter().map(|id| (id.as_str(), self.rng.gen_range(0.1..3.0))).collect();
        MeasureSpace::from_pairs(&pairs).expect("positive masses")
    }

    pub fn exponent(&mut self) -> Exponent {
        let k = self.rng.gen_range(0..self.cfg.exponents.len());
        self.cfg.exponents[k]
    }

    pub fn dim(&mut self) -> usize {
        if self.rng.gen_bool(self.cfg.zero_fiber) {
            0
        } else {
            self.rng.gen_range(1..=self.cfg.max_dim.max(1))
        }
    }

    /// Weighted `lp` norm with weights in `[0.5, 2]`.
    pub fn lp_norm(&mut self, dim: usize) -> Norm {
        let p = self.exponent();
        let weights = (0..dim).map(|_| self.rng.gen_range(0.5..2.0)).collect();
        NormExpr::lp(p, weights).expect("positive weights")
    }

    pub fn module(&mut self, space: &MeasureSpace) -> ModuleObj {
        let norms = (0..space.len())
            .map(|_| {
                let d = self.dim();
                self.lp_norm(d)
            })
            .collect();
        ModuleObj::from_norms(space.clone(), norms).expect("matching atoms")
    }

    /// Entries uniform in `[-1, 1]`, of random rank.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> Mat {
        let full = rows.min(cols);
        if full == 0 {
            return Mat::zeros(rows, cols);
        }
        let r = self.rng.gen_range(1..=full);
        let u = Mat::from_fn(rows, r, |_, _| self.rng.gen_range(-1.0..1.0));
        let v = Mat::from_fn(r, cols, |_, _| self.rng.gen_range(-1.0..1.0));
        u * v
    }

    /// Random per-atom matrices divided by their operator norm times a factor in `[0.5, 1]`.
    pub fn morphism(&mut self, source: &ModuleObj, target: &ModuleObj) -> Result<Morphism> {
        let mats = (0..source.atoms())
            .map(|a| {
                let raw = self.matrix(target.dim(a), source.dim(a));
                self.normalize(raw, source.norm(a), target.norm(a))
            })
            .collect::<Result<Vec<_>>>()?;
        Morphism::unchecked(source, target, mats)
    }

    fn normalize(&mut self, raw: Mat, src: &Norm, tgt: &Norm) -> Result<Mat> {
        let s = op_norm_upper(&raw, src, tgt, DEFAULT_TOL)?.upper;
        let factor = self.rng.gen_range(0.5..=1.0);
        Ok(if s > 0.0 && s.is_finite() { raw * (factor / s) } else { raw * 0.0 })
    }

    /// A map of atoms between two spaces.
    pub fn meas_morphism(&mut self, source: &MeasureSpace, target: &MeasureSpace) -> MeasMorphism {
        let map = (0..source.len()).map(|_| self.rng.gen_range(0..target.len())).collect();
        MeasMorphism::new(source.clone(), target.clone(), map).expect("positive masses")
    }

    /// Parents pointing to larger indices; the last node is the root.
    pub fn tree(&mut self, n: usize) -> Vec<Option<usize>> {
        (0..n).map(|i| (i + 1 < n).then(|| self.rng.gen_range(i + 1..n))).collect()
    }

    pub fn system(&mut self, space: &MeasureSpace, dir: Direction) -> Result<PosetSystem> {
        let n = self.rng.gen_range(1..=self.cfg.max_objects.max(1));
        let parent = self.tree(n);
        let modules: Vec<ModuleObj> = (0..n).map(|_| self.module(space)).collect();
        let edges = (0..n)
            .map(|i| {
                parent[i]
                    .map(|p| match dir {
                        Direction::Direct => self.morphism(&modules[i], &modules[p]),
                        Direction::Inverse => self.morphism(&modules[p], &modules[i]),
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>>>()?;
        PosetSystem::from_tree(&parent, modules, edges, dir)
    }

    pub fn diagram(&mut self, space: &MeasureSpace, shape: Shape) -> Result<Diagram> {
        let index = match shape {
            Shape::Discrete => FiniteCategory::discrete(self.rng.gen_range(1..=self.cfg.max_objects.max(1))),
            Shape::ParallelPair => FiniteCategory::parallel_pair(),
            Shape::Cospan => FiniteCategory::cospan(),
            Shape::Span => FiniteCategory::span(),
            Shape::Tree => {
                let dir = if self.rng.gen_bool(0.5) { Direction::Direct } else { Direction::Inverse };
                return self.system(space, dir)?.to_diagram(dir);
            }
        };
        let objects: Vec<ModuleObj> = (0..index.objects().len()).map(|_| self.module(space)).collect();
        let generators = index
            .generators()
            .map(|k| {
                let a = &index.arrows()[k];
                self.morphism(&objects[a.dom], &objects[a.cod])
            })
            .collect::<Result<Vec<_>>>()?;
        Diagram::new(index, objects, generators)
    }

    pub fn any_diagram(&mut self, space: &MeasureSpace) -> Result<Diagram> {
        let shape = SHAPES[self.rng.gen_range(0..SHAPES.len())];
        self.diagram(space, shape)
    }

    /// Random cone: legs projected onto the cone equations, then rescaled per atom.
    pub fn cone(&mut self, d: &Diagram, apex: &ModuleObj) -> Result<Cone> {
        let mats = self.constrained_legs(d, apex, Side::Cone)?;
        let legs = transpose_atoms(mats, d.objects.len())
            .into_iter()
            .zip(&d.objects)
            .map(|(m, o)| Morphism::unchecked(apex, o, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Cone { apex: apex.clone(), legs })
    }

    pub fn cocone(&mut self, d: &Diagram, nadir: &ModuleObj) -> Result<Cocone> {
        let mats = self.constrained_legs(d, nadir, Side::Cocone)?;
        let legs = transpose_atoms(mats, d.objects.len())
            .into_iter()
            .zip(&d.objects)
            .map(|(m, o)| Morphism::unchecked(o, nadir, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Cocone { nadir: nadir.clone(), legs })
    }

    /// Per atom, one matrix per object.
    fn constrained_legs(&mut self, d: &Diagram, tip: &ModuleObj, side: Side) -> Result<Vec<Vec<Mat>>> {
        let mut out = Vec::with_capacity(tip.atoms());
        for atom in 0..tip.atoms() {
            let a = tip.dim(atom);
            let dims: Vec<usize> = d.objects.iter().map(|o| o.dim(atom)).collect();
            let shapes: Vec<(usize, usize)> = match side {
                Side::Cone => dims.iter().map(|&di| (di, a)).collect(),
                Side::Cocone => dims.iter().map(|&di| (a, di)).collect(),
            };
            let total: usize = shapes.iter().map(|(r, c)| r * c).sum();
            let unpack = |x: &Vector| -> Vec<Mat> {
                let mut off = 0;
                shapes
                    .iter()
                    .map(|&(r, c)| {
                        let m = linalg::unflatten(&x.as_slice()[off..off + r * c], r, c);
                        off += r * c;
                        m
                    })
                    .collect()
            };
            // Residual of the cone equations as a linear map of the packed legs.
            let equations = |legs: &[Mat]| -> Vector {
                let mut parts: Vec<f64> = Vec::new();
                for k in d.index.generators() {
                    let f = &d.index.arrows()[k];
                    let map = d.arrows[k].mat(atom);
                    let gap = match side {
                        Side::Cone => map * &legs[f.dom] - &legs[f.cod],
                        Side::Cocone => &legs[f.cod] * map - &legs[f.dom],
                    };
                    parts.extend(linalg::flatten(&gap).iter());
                }
                Vector::from_vec(parts)
            };
            let x = Vector::from_fn(total, |_, _| self.rng.gen_range(-1.0..1.0));
            let projected = if total == 0 {
                x
            } else {
                let cols: Vec<Vector> = (0..total)
                    .map(|j| {
                        let mut e = Vector::zeros(total);
                        e[j] = 1.0;
                        equations(&unpack(&e))
                    })
                    .collect();
                let rows = cols.first().map_or(0, |c| c.len());
                if rows == 0 {
                    x
                } else {
                    let k = linalg::null_space(&linalg::from_columns(rows, &cols));
                    &k * (k.transpose() * x)
                }
            };
            let mut legs = unpack(&projected);
            let mut s: f64 = 0.0;
            for (i, leg) in legs.iter().enumerate() {
                let n = match side {
                    Side::Cone => op_norm_upper(leg, tip.norm(atom), d.objects[i].norm(atom), DEFAULT_TOL)?,
                    Side::Cocone => op_norm_upper(leg, d.objects[i].norm(atom), tip.norm(atom), DEFAULT_TOL)?,
                };
                s = s.max(n.upper);
            }
            let factor = self.rng.gen_range(0.5..=1.0);
            let c = if s > 0.0 && s.is_finite() { factor / s } else { 0.0 };
            for leg in &mut legs {
                *leg *= c;
            }
            out.push(legs);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum Side {
    Cone,
    Cocone,
}

/// `[atom][object]` to `[object][atom]`.
fn transpose_atoms(mats: Vec<Vec<Mat>>, objects: usize) -> Vec<Vec<Mat>> {
    let mut out: Vec<Vec<Mat>> = (0..objects).map(|_| Vec::with_capacity(mats.len())).collect();
    for per_atom in mats {
        for (i, m) in per_atom.into_iter().enumerate() {
            out[i].push(m);
        }
    }
    out
}
