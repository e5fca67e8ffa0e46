//! Dense linear-algebra helpers shared by the constructions.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Singular values below `RANK_TOL * max(1, largest)` count as zero.
pub const RANK_TOL: f64 = 1e-10;

fn threshold(sv: &Vector) -> f64 {
    RANK_TOL * sv.iter().cloned().fold(1.0, f64::max)
}

pub fn rank(a: &Mat) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = svd(a).s;
    let t = threshold(&sv);
    sv.iter().filter(|&&s| s > t).count()
}

/// Thin singular value decomposition `a = u diag(s) v^T` with `v` square and
/// `s` sorted descending. Columns of `u` for zero singular values are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Mat,
    pub s: Vector,
    pub v: Mat,
}

/// One-sided Jacobi. Slower than bidiagonalization but accurate to working
/// precision on rank-deficient input, where nalgebra's iteration can stall.
pub fn svd(a: &Mat) -> Svd {
    let (m, n) = a.shape();
    let mut u = a.clone();
    let mut v = Mat::identity(n, n);
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for (w, rows) in [(&mut u, m), (&mut v, n)] {
                    for i in 0..rows {
                        let (x, y) = (w[(i, p)], w[(i, q)]);
                        w[(i, p)] = c * x - sn * y;
                        w[(i, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (u.column(j).norm(), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut uu = Mat::zeros(m, n);
    let mut vv = Mat::zeros(n, n);
    let mut s = Vector::zeros(n);
    for (k, &(sigma, j)) in order.iter().enumerate() {
        s[k] = sigma;
        if sigma > 0.0 {
            uu.set_column(k, &(u.column(j) / sigma));
        }
        vv.set_column(k, &v.column(j));
    }
    Svd { u: uu, s, v: vv }
}

/// Orthonormal basis of the null space, one column per dimension.
pub fn null_space(a: &Mat) -> Mat {
    let n = a.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Mat::identity(n, n);
    }
    let d = svd(a);
    let t = threshold(&d.s);
    let cols: Vec<Vector> = (0..n).filter(|&i| d.s[i] <= t).map(|i| d.v.column(i).into_owned()).collect();
    from_columns(n, &cols)
}

/// Orthonormal basis of the column space.
pub fn column_space(a: &Mat) -> Mat {
    let m = a.nrows();
    if m == 0 || a.ncols() == 0 {
        return Mat::zeros(m, 0);
    }
    let d = svd(a);
    let t = threshold(&d.s);
    let cols: Vec<Vector> = (0..d.s.len())
        .filter(|&i| d.s[i] > t)
        .map(|i| d.u.column(i).into_owned())
        .collect();
    from_columns(m, &cols)
}

pub fn from_columns(rows: usize, cols: &[Vector]) -> Mat {
    let mut m = Mat::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Coordinates completing the column space of `basis` to a basis of the
/// ambient space, picked by complete-pivoting elimination.
pub fn complement_coords(basis: &Mat) -> Vec<usize> {
    let n = basis.nrows();
    let r = basis.ncols();
    let mut work = basis.transpose();
    let mut used_rows = vec![false; r];
    let mut pivots = vec![false; n];
    for _ in 0..r {
        let mut best = (0.0, 0, 0);
        for i in (0..r).filter(|&i| !used_rows[i]) {
            for j in (0..n).filter(|&j| !pivots[j]) {
                if work[(i, j)].abs() > best.0 {
                    best = (work[(i, j)].abs(), i, j);
                }
            }
        }
        let (_, pi, pj) = best;
        used_rows[pi] = true;
        pivots[pj] = true;
        let pivot_row = work.row(pi).into_owned();
        for i in (0..r).filter(|&i| !used_rows[i]) {
            let f = work[(i, pj)] / pivot_row[pj];
            let mut row = work.row_mut(i);
            row -= &pivot_row * f;
        }
    }
    (0..n).filter(|&j| !pivots[j]).collect()
}

/// Coordinate selector: columns are the standard basis vectors at `coords`.
pub fn selector(n: usize, coords: &[usize]) -> Mat {
    let mut s = Mat::zeros(n, coords.len());
    for (k, &j) in coords.iter().enumerate() {
        s[(j, k)] = 1.0;
    }
    s
}

pub fn inverse(a: &Mat) -> Option<Mat> {
    if a.nrows() != a.ncols() {
        return None;
    }
    if a.nrows() == 0 {
        return Some(Mat::zeros(0, 0));
    }
    if rank(a) < a.nrows() {
        return None;
    }
    a.clone().try_inverse()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &Mat, b: &Mat) -> Mat {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Mat::zeros(a.ncols(), b.ncols());
    }
    pinv(a) * b
}

pub fn pinv(a: &Mat) -> Mat {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Mat::zeros(a.ncols(), a.nrows());
    }
    let d = svd(a);
    let t = threshold(&d.s);
    let mut out = Mat::zeros(a.ncols(), a.nrows());
    for k in (0..d.s.len()).filter(|&k| d.s[k] > t) {
        out += d.v.column(k) * d.u.column(k).transpose() / d.s[k];
    }
    out
}

pub fn hstack(blocks: &[&Mat], rows: usize) -> Mat {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        m.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    m
}

pub fn vstack(blocks: &[&Mat], cols: usize) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        m.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    m
}

pub fn block_diag(blocks: &[&Mat]) -> Mat {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = Mat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        m.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    m
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_vec(a: &Vector) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Row-major flattening of an `e x d` matrix.
pub fn flatten(a: &Mat) -> Vector {
    Vector::from_iterator(a.len(), (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]))
}

pub fn unflatten(v: &[f64], rows: usize, cols: usize) -> Mat {
    Mat::from_row_slice(rows, cols, v)
}

/// Whether the square matrix `[a | b]` is invertible.
pub fn is_complementary(a: &Mat, b: &Mat) -> bool {
    a.nrows() == a.ncols() + b.ncols() && rank(&hstack(&[a, b], a.nrows())) == a.nrows()
}
