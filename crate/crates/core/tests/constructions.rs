use banmod::audit::{check_isometric_iso, AuditConfig, Sampler, Shape};
use banmod::colimits::{coequalizer, cokernel, colimit_of_diagram, coproduct, direct_limit, image, pushout};
use banmod::functors::{hom_module, hom_post, hom_pre};
use banmod::limits::{equalizer, inverse_limit, kernel, limit_of_diagram, mats_gap, product, pullback, Direction, FiniteCategory};
use banmod::linalg::{self, Mat};
use banmod::modcat::{compose, ModuleObj, Morphism};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn sampler(seed: u64) -> Sampler {
    Sampler::new(seed, AuditConfig::default())
}

fn zero_gap(a: &Morphism, b: &Morphism) -> f64 {
    mats_gap(a.mats(), b.mats())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kernel_is_an_isometric_null_space(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let (m, n) = (s.module(&x), s.module(&x));
        let phi = s.morphism(&m, &n).unwrap();
        let (k, inc) = kernel(&phi).unwrap();
        for atom in 0..x.len() {
            prop_assert_eq!(k.dim(atom), m.dim(atom) - linalg::rank(phi.mat(atom)));
        }
        let killed = compose(&phi, &inc).unwrap();
        prop_assert!(killed.mats().iter().all(|a| a.amax() <= TOL));
        prop_assert!(check_isometric_iso(&Morphism::identity(&k), 4, TOL, seed).unwrap().iso);
        prop_assert!(inc.within_bound(TOL));
    }

    #[test]
    fn cokernel_dimension_is_the_corank(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let (m, n) = (s.module(&x), s.module(&x));
        let phi = s.morphism(&m, &n).unwrap();
        let (c, q) = cokernel(&phi).unwrap();
        for atom in 0..x.len() {
            prop_assert_eq!(c.dim(atom), n.dim(atom) - linalg::rank(phi.mat(atom)));
        }
        prop_assert!(compose(&q, &phi).unwrap().mats().iter().all(|a| a.amax() <= TOL));
        prop_assert!(q.within_bound(TOL));
    }

    #[test]
    fn equalizer_and_coequalizer_commute(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let (m, n) = (s.module(&x), s.module(&x));
        let (f, g) = (s.morphism(&m, &n).unwrap(), s.morphism(&m, &n).unwrap());
        let (_, e) = equalizer(&f, &g).unwrap();
        prop_assert!(zero_gap(&compose(&f, &e).unwrap(), &compose(&g, &e).unwrap()) <= TOL);
        let (_, q) = coequalizer(&f, &g).unwrap();
        prop_assert!(zero_gap(&compose(&q, &f).unwrap(), &compose(&q, &g).unwrap()) <= TOL);
    }

    #[test]
    fn pullback_and_pushout_squares_commute(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let (a, b, c) = (s.module(&x), s.module(&x), s.module(&x));
        let (f, g) = (s.morphism(&a, &c).unwrap(), s.morphism(&b, &c).unwrap());
        let (_, pl, pr) = pullback(&f, &g).unwrap();
        prop_assert!(zero_gap(&compose(&f, &pl).unwrap(), &compose(&g, &pr).unwrap()) <= TOL);
        let (f, g) = (s.morphism(&c, &a).unwrap(), s.morphism(&c, &b).unwrap());
        let (_, il, ir) = pushout(&f, &g).unwrap();
        prop_assert!(zero_gap(&compose(&il, &f).unwrap(), &compose(&ir, &g).unwrap()) <= TOL);
    }

    #[test]
    fn product_projections_split_coproduct_injections(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let factors: Vec<ModuleObj> = (0..3).map(|_| s.module(&x)).collect();
        let (p, proj) = product(&x, &factors).unwrap();
        let (c, inj) = coproduct(&x, &factors).unwrap();
        for atom in 0..x.len() {
            prop_assert_eq!(p.dim(atom), c.dim(atom));
            prop_assert_eq!(p.dim(atom), factors.iter().map(|f| f.dim(atom)).sum::<usize>());
        }
        for (i, f) in factors.iter().enumerate() {
            // Same coordinates on both sides, so proj_i . inj_i is the identity.
            let mats: Vec<Mat> = (0..x.len()).map(|a| proj[i].mat(a) * inj[i].mat(a)).collect();
            prop_assert!(mats_gap(&mats, Morphism::identity(f).mats()) <= 1e-15);
        }
    }

    #[test]
    fn engines_produce_commuting_cones(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let d = s.any_diagram(&x).unwrap();
        prop_assert!(limit_of_diagram(&d).unwrap().residual(&d).unwrap() <= TOL);
        prop_assert!(colimit_of_diagram(&d).unwrap().residual(&d).unwrap() <= TOL);
    }

    #[test]
    fn poset_limits_commute(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let inv = s.system(&x, Direction::Inverse).unwrap();
        let d = inv.to_diagram(Direction::Inverse).unwrap();
        prop_assert!(inverse_limit(&inv).unwrap().residual(&d).unwrap() <= TOL);
        let dir = s.system(&x, Direction::Direct).unwrap();
        let d = dir.to_diagram(Direction::Direct).unwrap();
        prop_assert!(direct_limit(&dir).unwrap().residual(&d).unwrap() <= TOL);
    }

    #[test]
    fn image_factors_the_morphism(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let (m, n) = (s.module(&x), s.module(&x));
        let phi = s.morphism(&m, &n).unwrap();
        let f = image(&phi).unwrap();
        prop_assert!(zero_gap(&compose(&f.out, &f.into).unwrap(), &phi) <= TOL);
    }

    #[test]
    fn composition_is_associative_with_identities(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let ms: Vec<ModuleObj> = (0..4).map(|_| s.module(&x)).collect();
        let f = s.morphism(&ms[0], &ms[1]).unwrap();
        let g = s.morphism(&ms[1], &ms[2]).unwrap();
        let h = s.morphism(&ms[2], &ms[3]).unwrap();
        let left = compose(&compose(&h, &g).unwrap(), &f).unwrap();
        let right = compose(&h, &compose(&g, &f).unwrap()).unwrap();
        prop_assert!(zero_gap(&left, &right) <= 1e-14);
        prop_assert!(zero_gap(&compose(&f, &Morphism::identity(&ms[0])).unwrap(), &f) == 0.0);
        prop_assert!(left.within_bound(TOL));
    }

    #[test]
    fn hom_is_functorial(seed in any::<u64>()) {
        let mut s = sampler(seed);
        let x = s.space();
        let ms: Vec<ModuleObj> = (0..4).map(|_| s.module(&x)).collect();
        let f = s.morphism(&ms[1], &ms[2]).unwrap();
        let g = s.morphism(&ms[2], &ms[3]).unwrap();
        let gf = compose(&g, &f).unwrap();
        let post = compose(&hom_post(&ms[0], &g).unwrap(), &hom_post(&ms[0], &f).unwrap()).unwrap();
        prop_assert!(zero_gap(&hom_post(&ms[0], &gf).unwrap(), &post) <= 1e-14);
        let pre = compose(&hom_pre(&ms[0], &f).unwrap(), &hom_pre(&ms[0], &g).unwrap()).unwrap();
        prop_assert!(zero_gap(&hom_pre(&ms[0], &gf).unwrap(), &pre) <= 1e-14);
        let id = hom_post(&ms[0], &Morphism::identity(&ms[1])).unwrap();
        prop_assert!(zero_gap(&id, &Morphism::identity(&hom_module(&ms[0], &ms[1]).unwrap())) == 0.0);
    }
}

#[test]
fn category_json_round_trip() {
    for c in [FiniteCategory::parallel_pair(), FiniteCategory::cospan(), FiniteCategory::discrete(3)] {
        let text = serde_json::to_string(&c).unwrap();
        let back: FiniteCategory = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
    let bad = r#"{"objects":["a"],"arrows":[{"name":"f","dom":"a","cod":"b"}]}"#;
    assert!(serde_json::from_str::<FiniteCategory>(bad).is_err());
}

#[test]
fn module_json_round_trip() {
    let mut s = sampler(5);
    let x = s.space();
    let m = s.module(&x);
    let back: ModuleObj = serde_json::from_value(serde_json::to_value(&m).unwrap()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn every_shape_has_specialized_constructions() {
    let mut s = sampler(17);
    for shape in [Shape::Discrete, Shape::ParallelPair, Shape::Cospan, Shape::Span] {
        let x = s.space();
        let d = s.diagram(&x, shape).unwrap();
        let agreement = banmod::audit::engine_agreement(&d, shape, TOL, 3).unwrap();
        assert!(agreement.passed(TOL), "{shape:?}: {agreement:?}");
    }
}
