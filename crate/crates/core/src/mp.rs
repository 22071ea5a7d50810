//! Extended-precision scalars: MPFR reals and a small complex type on top of them.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::Float;

pub const DEFAULT_PRECISION: u32 = 256;

pub fn real(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}

pub fn zero(prec: u32) -> Float {
    Float::with_val(prec, 0)
}

pub fn one(prec: u32) -> Float {
    Float::with_val(prec, 1)
}

pub fn pi(prec: u32) -> Float {
    Float::with_val(prec, rug::float::Constant::Pi)
}

/// Relative tolerance 10^(-fraction * decimal digits at `prec` bits).
pub fn digits_tol(prec: u32, fraction: f64) -> Float {
    let digits = fraction * prec as f64 * std::f64::consts::LOG10_2;
    let ten = Float::with_val(prec, 10);
    ten.pow(-digits)
}

use rug::ops::Pow;

#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Float,
    pub im: Float,
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6e} + {:.6e}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl Complex {
    pub fn new(re: Float, im: Float) -> Self {
        Complex { re, im }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Complex {
            re: real(prec, re),
            im: real(prec, im),
        }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        Complex { re, im: zero(prec) }
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 0.0)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(prec, 1.0, 0.0)
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Complex {
            re: self.re.clone(),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn scale(&self, s: &Float) -> Self {
        let p = self.prec();
        Complex {
            re: Float::with_val(p, &self.re * s),
            im: Float::with_val(p, &self.im * s),
        }
    }

    pub fn add_real(&self, s: &Float) -> Self {
        Complex {
            re: Float::with_val(self.prec(), &self.re + s),
            im: self.im.clone(),
        }
    }

    pub fn sub_real(&self, s: &Float) -> Self {
        Complex {
            re: Float::with_val(self.prec(), &self.re - s),
            im: self.im.clone(),
        }
    }

    pub fn recip(&self) -> Self {
        let p = self.prec();
        let d = self.norm_sqr();
        Complex {
            re: Float::with_val(p, &self.re / &d),
            im: Float::with_val(p, -&self.im) / &d,
        }
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        let r = self.abs();
        let mut re = Float::with_val(p, &r + &self.re);
        re /= 2;
        let re = re.sqrt();
        let mut im = Float::with_val(p, &r - &self.re);
        im /= 2;
        let mut im = im.sqrt();
        if self.im.is_sign_negative() && !self.im.is_zero() {
            im = -im;
        }
        Complex { re, im }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Complex> for &Complex {
            type Output = Complex;
            fn $m(self, o: &Complex) -> Complex {
                let f: fn(&Complex, &Complex) -> Complex = $body;
                f(self, o)
            }
        }
        impl $tr<Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: Complex) -> Complex {
                (&self).$m(&o)
            }
        }
        impl $tr<&Complex> for Complex {
            type Output = Complex;
            fn $m(self, o: &Complex) -> Complex {
                (&self).$m(o)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    let p = a.prec();
    Complex {
        re: Float::with_val(p, &a.re + &b.re),
        im: Float::with_val(p, &a.im + &b.im),
    }
});
binop!(Sub, sub, |a, b| {
    let p = a.prec();
    Complex {
        re: Float::with_val(p, &a.re - &b.re),
        im: Float::with_val(p, &a.im - &b.im),
    }
});
binop!(Mul, mul, |a, b| {
    let p = a.prec();
    let re = Float::with_val(p, &a.re * &b.re) - Float::with_val(p, &a.im * &b.im);
    let im = Float::with_val(p, &a.re * &b.im) + Float::with_val(p, &a.im * &b.re);
    Complex { re, im }
});
binop!(Div, div, |a, b| a * &b.recip());

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex {
            re: -self.re,
            im: -self.im,
        }
    }
}

/// Sum of w_i / (z - x_i). Returns `None` if z hits one of the x_i exactly.
pub fn weighted_cauchy(xs: &[Float], ws: &[Float], z: &Complex) -> Option<Complex> {
    let p = z.prec();
    let mut re = zero(p);
    let mut im = zero(p);
    let zi2 = Float::with_val(p, z.im.square_ref());
    let mut d = zero(p);
    let mut t = zero(p);
    for (x, w) in xs.iter().zip(ws) {
        d.assign_sub(&z.re, x);
        if d.is_zero() && z.im.is_zero() {
            return None;
        }
        // w (conj(z) - x) / |z - x|^2
        t.assign_sq(&d);
        t += &zi2;
        let wd = Float::with_val(p, w / &t);
        re += Float::with_val(p, &wd * &d);
        im -= Float::with_val(p, &wd * &z.im);
    }
    Some(Complex { re, im })
}

/// Real-axis version of [`weighted_cauchy`].
pub fn weighted_cauchy_real(xs: &[Float], ws: &[Float], z: &Float) -> Option<Float> {
    let p = z.prec();
    let mut s = zero(p);
    let mut d = zero(p);
    for (x, w) in xs.iter().zip(ws) {
        d.assign_sub(z, x);
        if d.is_zero() {
            return None;
        }
        s += Float::with_val(p, w / &d);
    }
    Some(s)
}

trait AssignHelpers {
    fn assign_sub(&mut self, a: &Float, b: &Float);
    fn assign_sq(&mut self, a: &Float);
}

impl AssignHelpers for Float {
    fn assign_sub(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a - b);
    }
    fn assign_sq(&mut self, a: &Float) {
        use rug::Assign;
        self.assign(a.square_ref());
    }
}

/// Horner evaluation of a real polynomial (ascending coefficients) at a real point.
pub fn horner_real(coeffs: &[Float], x: &Float) -> Float {
    let p = x.prec();
    let mut acc = zero(p);
    for c in coeffs.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

pub fn horner_complex(coeffs: &[Float], z: &Complex) -> Complex {
    let p = z.prec();
    let mut re = zero(p);
    let mut im = zero(p);
    for c in coeffs.iter().rev() {
        let nre = Float::with_val(p, &re * &z.re) - Float::with_val(p, &im * &z.im);
        let nim = Float::with_val(p, &re * &z.im) + Float::with_val(p, &im * &z.re);
        re = nre + c;
        im = nim;
    }
    Complex { re, im }
}

/// Product of (z - r) over the given real roots.
pub fn root_product(roots: &[Float], z: &Complex) -> Complex {
    let mut acc = Complex::one(z.prec());
    for r in roots {
        acc = &acc * &z.sub_real(r);
    }
    acc
}

pub fn root_product_real(roots: &[Float], x: &Float) -> Float {
    let mut acc = one(x.prec());
    for r in roots {
        acc *= Float::with_val(x.prec(), x - r);
    }
    acc
}
