//! Real zeros by sign-change bracketing on a Chebyshev grid and Illinois refinement.

use rayon::prelude::*;
use rug::Float;

use crate::mp;

pub const MAX_GRID: usize = 1 << 12;

/// Zero tolerance 10^(-0.25 * bits), relative to max(1, |x|).
pub fn zero_tolerance(prec: u32) -> Float {
    let ten = Float::with_val(prec, 10);
    use rug::ops::Pow;
    ten.pow(-(0.25 * prec as f64))
}

/// Outcome of a scan when the count never matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountFailure {
    pub found: usize,
}

fn chebyshev_grid(a: f64, b: f64, m: usize, prec: u32) -> Vec<Float> {
    let c = Float::with_val(prec, a + b) / 2u32;
    let r = Float::with_val(prec, b - a) / 2u32;
    let pi = mp::pi(prec);
    (0..m)
        .map(|i| {
            if i == 0 {
                return mp::real(prec, a);
            }
            if i == m - 1 {
                return mp::real(prec, b);
            }
            let t = Float::with_val(prec, &pi * i as u32) / (m as u32 - 1);
            Float::with_val(prec, &c - Float::with_val(prec, &r * t.cos()))
        })
        .collect()
}

fn sgn(v: &Float) -> i32 {
    if v.is_zero() {
        0
    } else if v.is_sign_negative() {
        -1
    } else {
        1
    }
}

/// Finds exactly `expected` simple zeros of `f` in [a, b].
///
/// The grid starts at 16 * expected points and doubles up to [`MAX_GRID`]. If the number of
/// sign changes never equals `expected`, the last count is returned as the error.
pub fn find_zeros<F>(
    f: F,
    a: f64,
    b: f64,
    expected: usize,
    prec: u32,
) -> Result<Vec<Float>, CountFailure>
where
    F: Fn(&Float) -> Float + Sync,
{
    let mut m = (16 * expected).max(16);
    let mut found;
    loop {
        let grid = chebyshev_grid(a, b, m, prec);
        let vals: Vec<Float> = grid.par_iter().map(&f).collect();
        let mut brackets = Vec::new();
        let mut exact = Vec::new();
        for i in 0..m {
            if sgn(&vals[i]) == 0 {
                exact.push(i);
            }
        }
        for i in 0..m - 1 {
            let (s0, s1) = (sgn(&vals[i]), sgn(&vals[i + 1]));
            if s0 * s1 < 0 {
                brackets.push(i);
            }
        }
        found = brackets.len() + exact.len();
        if found == expected {
            let mut zs: Vec<Float> = brackets
                .par_iter()
                .map(|&i| {
                    refine(
                        &f,
                        grid[i].clone(),
                        vals[i].clone(),
                        grid[i + 1].clone(),
                        vals[i + 1].clone(),
                        prec,
                    )
                })
                .collect();
            zs.extend(exact.iter().map(|&i| grid[i].clone()));
            zs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(zs);
        }
        if found > expected || m >= MAX_GRID {
            return Err(CountFailure { found });
        }
        m = (2 * m).min(MAX_GRID);
    }
}

/// Illinois (modified regula falsi) with a bisection safeguard.
pub fn refine<F>(
    f: &F,
    mut a: Float,
    mut fa: Float,
    mut b: Float,
    mut fb: Float,
    prec: u32,
) -> Float
where
    F: Fn(&Float) -> Float,
{
    let tol = zero_tolerance(prec);
    let mut side = 0i32;
    let mut checkpoint = Float::with_val(prec, &b - &a);
    for it in 0..(8 * prec as usize) {
        let width = Float::with_val(prec, &b - &a);
        let scale = Float::with_val(prec, a.abs_ref())
            .max(&Float::with_val(prec, b.abs_ref()))
            .max(&mp::one(prec));
        if width <= Float::with_val(prec, &tol * &scale) {
            break;
        }
        let bisect = it % 3 == 2 && Float::with_val(prec, &width * 2u32) > checkpoint;
        if it % 3 == 2 {
            checkpoint = width.clone();
        }
        let mut c = if bisect {
            Float::with_val(prec, &a + &b) / 2u32
        } else {
            let num = Float::with_val(prec, &a * &fb) - Float::with_val(prec, &b * &fa);
            num / Float::with_val(prec, &fb - &fa)
        };
        if !(c > a && c < b) {
            c = Float::with_val(prec, &a + &b) / 2u32;
            if !(c > a && c < b) {
                break;
            }
        }
        let fc = f(&c);
        let sc = sgn(&fc);
        if sc == 0 {
            return c;
        }
        if sc == sgn(&fb) {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2u32;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2u32;
            }
            side = 1;
        }
    }
    Float::with_val(prec, &a + &b) / 2u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_of_cubic() {
        let p = 256;
        let f = |x: &Float| {
            let x2 = Float::with_val(p, x.square_ref());
            Float::with_val(p, &x2 * x) - Float::with_val(p, x * 0.25f64)
        };
        let zs = find_zeros(f, -1.0, 1.0, 3, p).unwrap();
        // x^3 - x/4 = 0 at 0 and ±1/2
        let want = [-0.5, 0.0, 0.5];
        for (z, w) in zs.iter().zip(want) {
            assert!(Float::with_val(p, z - w).abs() < 1e-60);
        }
        assert_eq!(
            find_zeros(f, -1.0, 1.0, 2, p),
            Err(CountFailure { found: 3 })
        );
    }

    #[test]
    fn crowded_endpoint_root() {
        let p = 256;
        // root at 1 - 1e-7, close to the right endpoint
        let r = mp::real(p, 1.0) - mp::real(p, 1e-7);
        let f = |x: &Float| Float::with_val(p, x - &r);
        let zs = find_zeros(f, -1.0, 1.0, 1, p).unwrap();
        assert!(Float::with_val(p, &zs[0] - &r).abs() < 1e-62);
    }
}
