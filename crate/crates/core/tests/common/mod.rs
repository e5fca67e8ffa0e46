//! Brute-force oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use banmod::linalg::Mat;
use banmod::normcalc::Exponent;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Weighted `lp` norm straight from the definition.
pub fn lp(p: Exponent, w: &[f64], x: &[f64]) -> f64 {
    let a = w.iter().zip(x).map(|(w, x)| (w * x).abs());
    match p {
        Exponent::One => a.sum(),
        Exponent::Two => a.map(|t| t * t).sum::<f64>().sqrt(),
        Exponent::Inf => a.fold(0.0, f64::max),
    }
}

/// Extreme points of the unit ball of a weighted `l1` or `linf` norm.
pub fn ball_vertices(p: Exponent, w: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len();
    match p {
        Exponent::One => (0..2 * n)
            .map(|k| {
                let mut v = vec![0.0; n];
                v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 } / w[k / 2];
                v
            })
            .collect(),
        Exponent::Inf => (0..1usize << n)
            .map(|mask| (0..n).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 } / w[j]).collect())
            .collect(),
        Exponent::Two => panic!("the l2 ball has no vertices"),
    }
}

/// Operator norm as the largest target norm over the source ball's vertices.
pub fn op_norm_by_vertices(a: &Mat, src: (Exponent, &[f64]), tgt: (Exponent, &[f64])) -> f64 {
    ball_vertices(src.0, src.1)
        .iter()
        .map(|v| {
            let y = a * DMatrix::from_column_slice(v.len(), 1, v);
            lp(tgt.0, tgt.1, y.as_slice())
        })
        .fold(0.0, f64::max)
}

/// Largest singular value from the eigenvalues of `a^T a`.
pub fn spectral_norm(a: &Mat) -> f64 {
    let g = a.transpose() * a;
    g.symmetric_eigen().eigenvalues.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
}

/// `min_t lp(v + basis t)` on a grid of the given step, for one or two
/// basis columns. The grid lives in orthonormal coordinates of the span so
/// nearly parallel columns do not stretch the valley. Two columns are
/// searched coarse to fine, which the convexity of the objective allows.
pub fn grid_dist(p: Exponent, w: &[f64], basis: &Mat, v: &[f64], step: f64, radius: f64) -> f64 {
    let basis = &basis.clone().qr().q();
    let f = |t: &[f64]| {
        let mut x = v.to_vec();
        for (c, tc) in t.iter().enumerate() {
            for i in 0..x.len() {
                x[i] += basis[(i, c)] * tc;
            }
        }
        lp(p, w, &x)
    };
    match basis.ncols() {
        0 => f(&[]),
        1 => {
            let n = (radius / step).ceil() as i64;
            (-n..=n).map(|k| f(&[k as f64 * step])).fold(f64::INFINITY, f64::min)
        }
        2 => {
            let (mut centre, mut h, mut span) = ([0.0, 0.0], radius / 100.0, radius);
            loop {
                let n = (span / h).ceil() as i64;
                let mut best = (f64::INFINITY, centre);
                for i in -n..=n {
                    for j in -n..=n {
                        let t = [centre[0] + i as f64 * h, centre[1] + j as f64 * h];
                        let val = f(&t);
                        if val < best.0 {
                            best = (val, t);
                        }
                    }
                }
                if h <= step {
                    return best.0;
                }
                centre = best.1;
                span = 6.0 * h;
                h = (h / 10.0).max(step);
            }
        }
        k => panic!("grid search over {k} directions is not supported"),
    }
}

pub fn vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

pub fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.5..2.0)).collect()
}

pub fn mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn exponent(rng: &mut ChaCha8Rng) -> Exponent {
    [Exponent::One, Exponent::Two, Exponent::Inf][rng.gen_range(0..3)]
}

pub fn polyhedral(rng: &mut ChaCha8Rng) -> Exponent {
    if rng.gen_bool(0.5) {
        Exponent::One
    } else {
        Exponent::Inf
    }
}
