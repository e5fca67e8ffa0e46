mod common;

use banmod::linalg::Mat;
use banmod::normcalc::{
    dist_to_subspace, dist_with, eval_norm, op_norm, simplex_solve, DistRoute, Exponent, LpStatus, NormExpr, StandardLp,
    DEFAULT_TOL,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![Just(Exponent::One), Just(Exponent::Two), Just(Exponent::Inf)]
}

fn weighted(max_dim: usize) -> impl Strategy<Value = (Exponent, Vec<f64>)> {
    (exponent(), prop::collection::vec(0.25f64..4.0, 1..=max_dim))
}

proptest! {
    #[test]
    fn lp_matches_definition((p, w) in weighted(6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = common::vec(&mut rng, w.len());
        let n = NormExpr::lp(p, w.clone()).unwrap();
        let got = eval_norm(&n, &x, DEFAULT_TOL).unwrap();
        prop_assert!((got - common::lp(p, &w, &x)).abs() <= 1e-12 * (1.0 + got));
    }

    #[test]
    fn norm_axioms((p, w) in weighted(5), seed in any::<u64>(), c in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (common::vec(&mut rng, w.len()), common::vec(&mut rng, w.len()));
        let n = NormExpr::lp(p, w).unwrap();
        let f = |v: &[f64]| eval_norm(&n, v, DEFAULT_TOL).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = x.iter().map(|a| c * a).collect();
        prop_assert!(f(&sum) <= f(&x) + f(&y) + 1e-12);
        prop_assert!((f(&scaled) - c.abs() * f(&x)).abs() <= 1e-12 * (1.0 + f(&scaled)));
        prop_assert!(f(&x) >= 0.0);
    }

    #[test]
    fn sup_and_sum_of_blocks(a in weighted(3), b in weighted(3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = NormExpr::lp(a.0, a.1.clone()).unwrap();
        let nb = NormExpr::lp(b.0, b.1.clone()).unwrap();
        let (x, y) = (common::vec(&mut rng, a.1.len()), common::vec(&mut rng, b.1.len()));
        let xy: Vec<f64> = x.iter().chain(&y).cloned().collect();
        let (fa, fb) = (common::lp(a.0, &a.1, &x), common::lp(b.0, &b.1, &y));
        let sup = eval_norm(&NormExpr::sup(vec![na.clone(), nb.clone()]), &xy, DEFAULT_TOL).unwrap();
        let sum = eval_norm(&NormExpr::sum(vec![na, nb]), &xy, DEFAULT_TOL).unwrap();
        prop_assert!((sup - fa.max(fb)).abs() <= 1e-12 * (1.0 + sup));
        prop_assert!((sum - (fa + fb)).abs() <= 1e-12 * (1.0 + sum));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn distance_is_invariant_along_the_subspace(
        (p, w) in weighted(4), seed in any::<u64>(), t in -3.0f64..3.0
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = w.len();
        let basis = common::mat(&mut rng, n, 1);
        prop_assume!(basis.norm() > 0.1);
        let v = common::vec(&mut rng, n);
        let moved: Vec<f64> = v.iter().enumerate().map(|(i, x)| x + t * basis[(i, 0)]).collect();
        let norm = NormExpr::lp(p, w.clone()).unwrap();
        let d0 = dist_to_subspace(&norm, &basis, &v, 1e-10).unwrap();
        let d1 = dist_to_subspace(&norm, &basis, &moved, 1e-10).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-7 * (1.0 + d0));
        prop_assert!(d0 <= common::lp(p, &w, &v) + 1e-9);
        prop_assert!(d0 >= -1e-12);
    }

    #[test]
    fn op_norm_of_polyhedral_source_matches_vertices(
        src_w in prop::collection::vec(0.5f64..2.0, 1..=5),
        tgt in weighted(4),
        inf_source in any::<bool>(),
        seed in any::<u64>()
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = if inf_source { Exponent::Inf } else { Exponent::One };
        let a = common::mat(&mut rng, tgt.1.len(), src_w.len());
        let src = NormExpr::lp(sp, src_w.clone()).unwrap();
        let tn = NormExpr::lp(tgt.0, tgt.1.clone()).unwrap();
        let got = op_norm(&a, &src, &tn, 1e-10).unwrap();
        let want = common::op_norm_by_vertices(&a, (sp, &src_w), (tgt.0, &tgt.1));
        prop_assert!((got.value - want).abs() <= 1e-9 * (1.0 + want), "{} vs {}", got.value, want);
        prop_assert!(got.upper >= want - 1e-9);
    }

    #[test]
    fn euclidean_op_norm_is_the_top_singular_value(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::mat(&mut rng, rows, cols);
        let got = op_norm(&a, &NormExpr::unit(Exponent::Two, cols), &NormExpr::unit(Exponent::Two, rows), 1e-12).unwrap();
        let want = common::spectral_norm(&a);
        prop_assert!((got.value - want).abs() <= 1e-9 * (1.0 + want));
    }
}

#[test]
fn euclidean_norm_of_three_four() {
    let n = NormExpr::lp(Exponent::Two, vec![1.0, 1.0]).unwrap();
    assert_eq!(eval_norm(&n, &[3.0, 4.0], DEFAULT_TOL).unwrap(), 5.0);
}

#[test]
fn distance_agrees_with_grid_and_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let p = common::polyhedral(&mut rng);
        let n = 3;
        let k = 1 + (rand::Rng::gen_range(&mut rng, 0..2));
        let w = common::weights(&mut rng, n);
        let basis = common::mat(&mut rng, n, k);
        let v = common::vec(&mut rng, n);
        let norm = NormExpr::lp(p, w.clone()).unwrap();
        let lp = dist_to_subspace(&norm, &basis, &v, 1e-10).unwrap();
        let grid = common::grid_dist(p, &w, &basis, &v, 1e-3, 40.0);
        assert!(lp <= grid + 1e-9 && grid - lp <= 1e-2, "lp {lp} grid {grid}");
        let descent = dist_with(&norm, &basis, &v, 1e-10, DistRoute::Descent).unwrap();
        assert!((descent.value - lp).abs() <= 1e-6, "descent {} lp {lp}", descent.value);
    }
}

#[test]
fn degenerate_lp_regression() {
    let raw: serde_json::Value = serde_json::from_str(include_str!("data/degenerate_lp.json")).unwrap();
    let rows: Vec<Vec<f64>> = serde_json::from_value(raw["a"].clone()).unwrap();
    let c: Vec<f64> = serde_json::from_value(raw["c"].clone()).unwrap();
    let b: Vec<f64> = serde_json::from_value(raw["b"].clone()).unwrap();
    let a = Mat::from_fn(rows.len(), c.len(), |i, j| rows[i][j]);
    let sol = simplex_solve(&StandardLp { c: c.clone(), a: a.clone(), b: b.clone() });
    assert_eq!(sol.status, LpStatus::Optimal);
    // Reference optimum from an independent solver.
    assert!((sol.value - 1.3425002162329824).abs() <= 1e-7, "{}", sol.value);
    let x = nalgebra::DVector::from_vec(sol.x.clone());
    let gap = (&a * &x - nalgebra::DVector::from_vec(b)).amax();
    assert!(gap <= 1e-8 && sol.x.iter().all(|&t| t >= -1e-12));
}

#[test]
fn quotient_norm_by_hand() {
    // l1 on R^2 modulo span(1, 1): |(x, y)| = |x - y|.
    let q = NormExpr::quotient(NormExpr::unit(Exponent::One, 2), Mat::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
    let got = eval_norm(&q, &[3.0, -1.0], 1e-10).unwrap();
    assert!((got - 4.0).abs() < 1e-9);
    // linf modulo the same line: |x - y| / 2.
    let q = NormExpr::quotient(NormExpr::unit(Exponent::Inf, 2), Mat::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
    assert!((eval_norm(&q, &[3.0, -1.0], 1e-10).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn dual_of_l1_is_linf() {
    let d = NormExpr::dual(NormExpr::lp(Exponent::One, vec![1.0, 2.0]).unwrap());
    // sup <a, x> over |x_1| + 2|x_2| <= 1 is max(|a_1|, |a_2| / 2).
    let got = eval_norm(&d, &[0.5, 3.0], 1e-10).unwrap();
    assert!((got - 1.5).abs() < 1e-9);
}
