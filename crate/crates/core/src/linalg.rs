//! Dense extended-precision linear algebra for the moment systems.

use rug::Float;

use crate::mp;

pub type Matrix = Vec<Vec<Float>>;

/// Pivot threshold 10^(-0.8 * bits * log10 2) applied after row equilibration.
pub fn pivot_threshold(prec: u32) -> Float {
    mp::digits_tol(prec, 0.8)
}

/// Solves the square system `a x = b` by Gaussian elimination with partial pivoting.
///
/// Rows are scaled to unit max-norm first. Returns `None` when a pivot falls below
/// [`pivot_threshold`].
pub fn solve_square(a: &Matrix, b: &[Float], prec: u32) -> Option<Vec<Float>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut m: Matrix = a.clone();
    let mut rhs: Vec<Float> = b.to_vec();
    for i in 0..n {
        let s = m[i]
            .iter()
            .map(|v| Float::with_val(prec, v.abs_ref()))
            .fold(mp::zero(prec), |x, y| x.max(&y));
        if s.is_zero() {
            return None;
        }
        for v in m[i].iter_mut() {
            *v /= &s;
        }
        rhs[i] /= &s;
    }
    let thr = pivot_threshold(prec);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[i][col]
                    .cmp_abs(&m[j][col])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if Float::with_val(prec, m[piv][col].abs_ref()) < thr {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let (top, bottom) = m.split_at_mut(col + 1);
        let prow = &top[col];
        for (off, row) in bottom.iter_mut().enumerate() {
            let r = col + 1 + off;
            if row[col].is_zero() {
                continue;
            }
            let f = Float::with_val(prec, &row[col] / &prow[col]);
            for k in col..n {
                let t = Float::with_val(prec, &f * &prow[k]);
                row[k] -= t;
            }
            let t = Float::with_val(prec, &f * &rhs[col]);
            rhs[r] -= t;
        }
    }
    let mut x = vec![mp::zero(prec); n];
    for i in (0..n).rev() {
        let mut s = rhs[i].clone();
        for k in i + 1..n {
            s -= Float::with_val(prec, &m[i][k] * &x[k]);
        }
        x[i] = s / &m[i][i];
    }
    Some(x)
}

/// Right singular vector of the smallest singular value, by one-sided Jacobi.
///
/// Works for any shape; with more columns than rows the result spans part of the null space.
pub fn smallest_singular_vector(a: &Matrix, cols: usize, prec: u32) -> Vec<Float> {
    let rows = a.len();
    // work on columns: u[c] is column c of A V
    let mut u: Vec<Vec<Float>> = (0..cols)
        .map(|c| (0..rows).map(|r| a[r][c].clone()).collect())
        .collect();
    let mut v: Vec<Vec<Float>> = (0..cols)
        .map(|c| {
            (0..cols)
                .map(|r| {
                    if r == c {
                        mp::one(prec)
                    } else {
                        mp::zero(prec)
                    }
                })
                .collect()
        })
        .collect();
    let eps = mp::digits_tol(prec, 0.95);
    let dot = |x: &[Float], y: &[Float]| {
        let mut s = mp::zero(prec);
        for (a, b) in x.iter().zip(y) {
            s += Float::with_val(prec, a * b);
        }
        s
    };
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                let bound = Float::with_val(prec, &alpha * &beta).sqrt() * &eps;
                if Float::with_val(prec, gamma.abs_ref()) <= bound || gamma.is_zero() {
                    continue;
                }
                rotated = true;
                let zeta =
                    Float::with_val(prec, &beta - &alpha) / (Float::with_val(prec, &gamma * 2u32));
                let sgn = if zeta.is_sign_negative() { -1 } else { 1 };
                let t = Float::with_val(prec, sgn)
                    / (Float::with_val(prec, zeta.abs_ref())
                        + (Float::with_val(prec, zeta.square_ref()) + 1u32).sqrt());
                let c = (Float::with_val(prec, t.square_ref()) + 1u32)
                    .sqrt()
                    .recip();
                let s = Float::with_val(prec, &c * &t);
                for w in [&mut u, &mut v] {
                    let (lo, hi) = w.split_at_mut(q);
                    let (cp, cq) = (&mut lo[p], &mut hi[0]);
                    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                        let nx = Float::with_val(prec, &c * &*x) - Float::with_val(prec, &s * &*y);
                        let ny = Float::with_val(prec, &s * &*x) + Float::with_val(prec, &c * &*y);
                        *x = nx;
                        *y = ny;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<Float> = u.iter().map(|c| dot(c, c)).collect();
    let k = (0..cols)
        .min_by(|&i, &j| norms[i].partial_cmp(&norms[j]).unwrap())
        .unwrap();
    v[k].clone()
}

pub fn mat_vec(a: &Matrix, x: &[Float], prec: u32) -> Vec<Float> {
    a.iter()
        .map(|row| {
            let mut s = mp::zero(prec);
            for (r, v) in row.iter().zip(x) {
                s += Float::with_val(prec, r * v);
            }
            s
        })
        .collect()
}
