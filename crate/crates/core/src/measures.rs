//! Measures on real intervals, Gauss rules, Cauchy transforms and Nikishin systems.

use nalgebra::{DMatrix, SymmetricEigen};
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mp::{self, weighted_cauchy, weighted_cauchy_real, Complex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn disjoint(&self, other: &Interval) -> bool {
        self.b < other.a || other.b < self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// True if `self` lies entirely to the left of `other`.
    pub fn left_of(&self, other: &Interval) -> bool {
        self.b < other.a
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFamily {
    Chebyshev1,
    Chebyshev2,
    Legendre,
    Jacobi { alpha: f64, beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassPoint {
    pub location: f64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub family: WeightFamily,
    #[serde(default = "default_sign")]
    pub sign: Sign,
    pub interval: Interval,
    #[serde(default)]
    pub mass_points: Vec<MassPoint>,
}

fn default_sign() -> Sign {
    Sign::Positive
}

impl WeightSpec {
    pub fn new(family: WeightFamily, a: f64, b: f64) -> Result<Self> {
        Ok(WeightSpec {
            family,
            sign: Sign::Positive,
            interval: Interval::new(a, b)?,
            mass_points: Vec::new(),
        })
    }

    pub fn with_atom(mut self, location: f64, mass: f64) -> Self {
        self.mass_points.push(MassPoint { location, mass });
        self
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = sign;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Interval::new(self.interval.a, self.interval.b)?;
        if let WeightFamily::Jacobi { alpha, beta } = self.family {
            if !(alpha > -1.0 && beta > -1.0) {
                return Err(Error::InvalidWeight(format!(
                    "Jacobi parameters must exceed -1, got alpha={alpha}, beta={beta}"
                )));
            }
        }
        let s = self.sign.value() as f64;
        for (i, mp) in self.mass_points.iter().enumerate() {
            if !mp.location.is_finite() || self.interval.contains(mp.location) {
                return Err(Error::InvalidMassPoint(format!(
                    "location {} must lie outside [{}, {}]",
                    mp.location, self.interval.a, self.interval.b
                )));
            }
            if !(mp.mass * s > 0.0) {
                return Err(Error::InvalidMassPoint(format!(
                    "mass {} does not carry the measure's sign",
                    mp.mass
                )));
            }
            if self.mass_points[..i]
                .iter()
                .any(|o| o.location == mp.location)
            {
                return Err(Error::InvalidMassPoint(format!(
                    "duplicate location {}",
                    mp.location
                )));
            }
        }
        Ok(())
    }
}

/// A constant-sign discrete measure: a Gauss rule on an interval plus finitely many atoms.
///
/// Nodes come first in `xs`/`ws`, atoms after them.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedMeasure {
    interval: Interval,
    xs: Vec<Float>,
    ws: Vec<Float>,
    n_nodes: usize,
    sign: i32,
    precision_bits: u32,
}

impl DiscretizedMeasure {
    /// Builds a measure from explicit nodes, weights and atoms.
    pub fn from_parts(
        interval: Interval,
        nodes: Vec<Float>,
        weights: Vec<Float>,
        atoms: Vec<(Float, Float)>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::NoNodes);
        }
        if nodes.len() != weights.len() {
            return Err(Error::InvalidInput("node and weight counts differ".into()));
        }
        let prec = nodes[0].prec();
        let sign = if weights[0].is_sign_negative() { -1 } else { 1 };
        let n_nodes = nodes.len();
        let mut xs = nodes;
        let mut ws = weights;
        for (x, m) in atoms {
            xs.push(x);
            ws.push(m);
        }
        for w in &ws {
            if w.is_zero() || (w.is_sign_negative() != (sign < 0)) {
                return Err(Error::InvalidWeight(
                    "weights must share one nonzero sign".into(),
                ));
            }
        }
        Ok(DiscretizedMeasure {
            interval,
            xs,
            ws,
            n_nodes,
            sign,
            precision_bits: prec,
        })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn sign(&self) -> i32 {
        self.sign
    }

    pub fn nodes(&self) -> &[Float] {
        &self.xs[..self.n_nodes]
    }

    pub fn weights(&self) -> &[Float] {
        &self.ws[..self.n_nodes]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Float, &Float)> {
        self.xs[self.n_nodes..].iter().zip(&self.ws[self.n_nodes..])
    }

    pub fn has_atoms(&self) -> bool {
        self.xs.len() > self.n_nodes
    }

    /// All support points (nodes then atoms).
    pub fn points(&self) -> &[Float] {
        &self.xs
    }

    /// Masses for [`Self::points`].
    pub fn masses(&self) -> &[Float] {
        &self.ws
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn total_mass(&self) -> Float {
        let mut s = mp::zero(self.precision_bits);
        for w in &self.ws {
            s += w;
        }
        s
    }

    /// Convex hull of the support, atoms included.
    pub fn hull(&self) -> Interval {
        let mut a = self.interval.a;
        let mut b = self.interval.b;
        for (x, _) in self.atoms() {
            let x = x.to_f64();
            a = a.min(x);
            b = b.max(x);
        }
        Interval { a, b }
    }

    /// The measure multiplied by a nonzero constant.
    pub fn scaled(&self, c: &Float) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::InvalidInput("scale must be nonzero".into()));
        }
        let mut out = self.clone();
        for w in &mut out.ws {
            *w *= c;
        }
        if c.is_sign_negative() {
            out.sign = -out.sign;
        }
        Ok(out)
    }

    /// The measure scaled to total |mass| one.
    pub fn normalized(&self) -> Self {
        let t = Float::with_val(self.precision_bits, self.total_mass().abs_ref());
        let c = Float::with_val(self.precision_bits, 1) / t;
        self.scaled(&c).expect("total mass is nonzero")
    }

    /// Integral of f against the measure.
    pub fn integrate<F: FnMut(&Float) -> Float>(&self, mut f: F) -> Float {
        let mut s = mp::zero(self.precision_bits);
        for (x, w) in self.xs.iter().zip(&self.ws) {
            s += f(x) * w;
        }
        s
    }
}

/// Gauss rule for the weight family, pushed forward affinely onto its interval.
pub fn build_gauss_rule(
    spec: &WeightSpec,
    n_nodes: usize,
    precision_bits: u32,
) -> Result<DiscretizedMeasure> {
    spec.validate()?;
    if n_nodes == 0 {
        return Err(Error::NoNodes);
    }
    let p = precision_bits;
    let (ts, ws) = match spec.family {
        WeightFamily::Chebyshev1 => chebyshev1_rule(n_nodes, p),
        WeightFamily::Chebyshev2 => chebyshev2_rule(n_nodes, p),
        WeightFamily::Legendre => jacobi_rule(n_nodes, 0.0, 0.0, p),
        WeightFamily::Jacobi { alpha, beta } => jacobi_rule(n_nodes, alpha, beta, p),
    };
    let c = Float::with_val(p, spec.interval.a + spec.interval.b) / 2;
    let r = Float::with_val(p, spec.interval.b - spec.interval.a) / 2;
    let neg = spec.sign == Sign::Negative;
    let nodes: Vec<Float> = ts.into_iter().map(|t| t * &r + &c).collect();
    let weights: Vec<Float> = ws.into_iter().map(|w| if neg { -w } else { w }).collect();
    let atoms = spec
        .mass_points
        .iter()
        .map(|m| (mp::real(p, m.location), mp::real(p, m.mass)))
        .collect();
    DiscretizedMeasure::from_parts(spec.interval, nodes, weights, atoms)
}

fn chebyshev1_rule(n: usize, p: u32) -> (Vec<Float>, Vec<Float>) {
    let pi = mp::pi(p);
    let w = Float::with_val(p, &pi / n as u32);
    // increasing order: k = n..1 of cos((2k-1)pi/2n)
    let ts = (1..=n)
        .rev()
        .map(|k| {
            let arg = Float::with_val(p, &pi * (2 * k as u32 - 1)) / (2 * n as u32);
            arg.cos()
        })
        .collect();
    (ts, vec![w; n])
}

fn chebyshev2_rule(n: usize, p: u32) -> (Vec<Float>, Vec<Float>) {
    let pi = mp::pi(p);
    let mut ts = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for k in (1..=n).rev() {
        let arg = Float::with_val(p, &pi * k as u32) / (n as u32 + 1);
        let s = Float::with_val(p, arg.sin_ref());
        ts.push(arg.cos());
        ws.push(Float::with_val(p, &pi / (n as u32 + 1)) * s.square());
    }
    (ts, ws)
}

/// Initial nodes from the eigenvalues of the Jacobi matrix (double precision).
fn golub_welsch(n: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let ab = alpha + beta;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        m[(k, k)] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let s = 2.0 * j + ab;
            let b2 = if j == 1.0 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * j * (j + alpha) * (j + beta) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            m[(k, k + 1)] = b2.sqrt();
            m[(k + 1, k)] = b2.sqrt();
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Returns (P_n(x), P_{n-1}(x)) for the Jacobi polynomials in standard normalization.
fn jacobi_pair(n: usize, a: &Float, b: &Float, x: &Float) -> (Float, Float) {
    let p = x.prec();
    let mut prev = mp::one(p);
    if n == 0 {
        return (prev, mp::zero(p));
    }
    let ab = Float::with_val(p, a + b);
    // P_1 = (a+1) + (a+b+2)(x-1)/2
    let mut cur = Float::with_val(p, a + 1u32)
        + Float::with_val(p, &ab + 2u32) * Float::with_val(p, x - 1u32) / 2u32;
    for k in 2..=n {
        let kf = k as u32;
        let s = Float::with_val(p, &ab + 2 * kf); // 2k + a + b
        let c0 = Float::with_val(p, &s - 2u32) * Float::with_val(p, &ab + kf) * (2 * kf);
        let c1 = Float::with_val(p, &s - 1u32);
        let lin = Float::with_val(p, &s * Float::with_val(p, &s - 2u32)) * x
            + Float::with_val(p, a.square_ref())
            - Float::with_val(p, b.square_ref());
        let c2 = Float::with_val(p, a + (kf - 1)) * Float::with_val(p, b + (kf - 1)) * &s * 2u32;
        let next = (c1 * lin * &cur - c2 * &prev) / c0;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn jacobi_rule(n: usize, alpha: f64, beta: f64, p: u32) -> (Vec<Float>, Vec<Float>) {
    let wp = p + 32;
    let a = mp::real(wp, alpha);
    let b = mp::real(wp, beta);
    let ab = Float::with_val(wp, &a + &b);
    let nf = n as u32;
    let s = Float::with_val(wp, &ab + 2 * nf);
    let deriv = |x: &Float, pn: &Float, pn1: &Float| -> Float {
        // (2n+a+b)(1-x^2) P_n' = n[(a-b) - (2n+a+b)x] P_n + 2(n+a)(n+b) P_{n-1}
        let one_m = Float::with_val(wp, 1u32) - Float::with_val(wp, x.square_ref());
        let t1 = (Float::with_val(wp, &a - &b) - Float::with_val(wp, &s * x)) * pn * nf;
        let t2 = Float::with_val(wp, &a + nf) * Float::with_val(wp, &b + nf) * pn1 * 2u32;
        (t1 + t2) / (one_m * &s)
    };
    // 2^{a+b+1} G(n+a+1) G(n+b+1) / (G(n+a+b+1) n!)
    let two = Float::with_val(wp, 2u32);
    let lg = |v: Float| v.ln_abs_gamma().0;
    let log_c = Float::with_val(wp, &ab + 1u32) * two.ln()
        + lg(Float::with_val(wp, &a + (nf + 1)))
        + lg(Float::with_val(wp, &b + (nf + 1)))
        - lg(Float::with_val(wp, &ab + (nf + 1)))
        - lg(Float::with_val(wp, nf + 1));
    let cst = log_c.exp();
    let stop = Float::with_val(wp, Float::i_exp(1, -(p as i32)));
    let mut ts = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for g in golub_welsch(n, alpha, beta) {
        let mut x = mp::real(wp, g);
        for _ in 0..100 {
            let (pn, pn1) = jacobi_pair(n, &a, &b, &x);
            let dp = deriv(&x, &pn, &pn1);
            let dx = pn / dp;
            x -= &dx;
            if Float::with_val(wp, dx.abs_ref()) <= stop {
                break;
            }
        }
        let (pn, pn1) = jacobi_pair(n, &a, &b, &x);
        let dp = deriv(&x, &pn, &pn1);
        let one_m = Float::with_val(wp, 1u32) - Float::with_val(wp, x.square_ref());
        let w = Float::with_val(wp, &cst / (one_m * dp.square()));
        ts.push(Float::with_val(p, &x));
        ws.push(Float::with_val(p, &w));
    }
    (ts, ws)
}

/// Cauchy transform of a discrete measure, atoms included.
pub fn cauchy_transform(mu: &DiscretizedMeasure, z: &Complex) -> Result<Complex> {
    weighted_cauchy(mu.points(), mu.masses(), z).ok_or(Error::NodeCollision)
}

/// Generating measures σ_0..σ_m with memoized densities of s_{j,k} with respect to σ_j.
#[derive(Clone, Debug)]
pub struct NikishinSystem {
    gens: Vec<DiscretizedMeasure>,
    // eff[j][k - j][a] = w_a * ŝ_{j+1,k}(x_a) at the support points of σ_j
    eff: Vec<Vec<Vec<Float>>>,
    dens: Vec<Vec<Vec<Float>>>,
}

impl NikishinSystem {
    pub fn new(gens: Vec<DiscretizedMeasure>) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::InvalidInput(
                "a Nikishin system needs at least one measure".into(),
            ));
        }
        let prec = gens[0].precision_bits();
        if gens.iter().any(|g| g.precision_bits() != prec) {
            return Err(Error::InvalidInput(
                "generators must share one precision".into(),
            ));
        }
        for j in 0..gens.len() - 1 {
            if !gens[j].hull().disjoint(&gens[j + 1].hull()) {
                return Err(Error::OverlappingSupports(j, j + 1));
            }
        }
        let m = gens.len() - 1;
        let mut eff: Vec<Vec<Vec<Float>>> = vec![Vec::new(); m + 1];
        let mut dens: Vec<Vec<Vec<Float>>> = vec![Vec::new(); m + 1];
        for j in (0..=m).rev() {
            let g = &gens[j];
            for k in j..=m {
                let d: Vec<Float> = if k == j {
                    vec![mp::one(prec); g.len()]
                } else {
                    let (next_x, next_w) = (gens[j + 1].points(), &eff[j + 1][k - j - 1]);
                    g.points()
                        .iter()
                        .map(|x| {
                            weighted_cauchy_real(next_x, next_w, x).expect("disjoint supports")
                        })
                        .collect()
                };
                let e = d
                    .iter()
                    .zip(g.masses())
                    .map(|(d, w)| Float::with_val(prec, d * w))
                    .collect();
                dens[j].push(d);
                eff[j].push(e);
            }
        }
        Ok(NikishinSystem { gens, eff, dens })
    }

    pub fn from_specs(specs: &[WeightSpec], n_nodes: usize, precision_bits: u32) -> Result<Self> {
        let gens = specs
            .iter()
            .map(|s| build_gauss_rule(s, n_nodes, precision_bits))
            .collect::<Result<Vec<_>>>()?;
        Self::new(gens)
    }

    /// Index of the last generator.
    pub fn m(&self) -> usize {
        self.gens.len() - 1
    }

    pub fn precision_bits(&self) -> u32 {
        self.gens[0].precision_bits()
    }

    pub fn generator(&self, j: usize) -> &DiscretizedMeasure {
        &self.gens[j]
    }

    pub fn generators(&self) -> &[DiscretizedMeasure] {
        &self.gens
    }

    fn check(&self, j: usize, k: usize) -> Result<()> {
        if j > k || k > self.m() {
            return Err(Error::IndexOutOfRange(format!(
                "s_hat({j},{k}) with m = {}",
                self.m()
            )));
        }
        Ok(())
    }

    /// Density of s_{j,k} with respect to σ_j at σ_j's support points, i.e. ŝ_{j+1,k} there.
    pub fn density(&self, j: usize, k: usize) -> Result<&[Float]> {
        self.check(j, k)?;
        Ok(&self.dens[j][k - j])
    }

    /// Masses of s_{j,k} at σ_j's support points.
    pub fn masses(&self, j: usize, k: usize) -> Result<&[Float]> {
        self.check(j, k)?;
        Ok(&self.eff[j][k - j])
    }

    pub fn s_hat(&self, j: usize, k: usize, z: &Complex) -> Result<Complex> {
        self.check(j, k)?;
        weighted_cauchy(self.gens[j].points(), &self.eff[j][k - j], z).ok_or(Error::NodeCollision)
    }

    pub fn s_hat_real(&self, j: usize, k: usize, x: &Float) -> Result<Float> {
        self.check(j, k)?;
        weighted_cauchy_real(self.gens[j].points(), &self.eff[j][k - j], x)
            .ok_or(Error::NodeCollision)
    }

    /// The system generated by σ_j, σ_{j-1}, ..., σ_i.
    pub fn reversed(&self, i: usize, j: usize) -> Result<NikishinSystem> {
        if i > j || j > self.m() {
            return Err(Error::IndexOutOfRange(format!("reversed({i},{j})")));
        }
        NikishinSystem::new(self.gens[i..=j].iter().rev().cloned().collect())
    }

    /// Total masses of s_{0,k}, k = 0..m.
    pub fn total_masses(&self) -> Vec<Float> {
        (0..=self.m())
            .map(|k| {
                let mut s = mp::zero(self.precision_bits());
                for w in &self.eff[0][k] {
                    s += w;
                }
                s
            })
            .collect()
    }
}

/// |LHS - RHS| of the identity expressing ⟨σ_j,…,σ_i⟩^ through forward-order transforms.
pub fn check_cauchy_identity(
    sys: &NikishinSystem,
    i: usize,
    j: usize,
    z: &Complex,
) -> Result<Float> {
    if i >= j || j > sys.m() {
        return Err(Error::IndexOutOfRange(format!(
            "identity needs i < j <= m, got i={i}, j={j}"
        )));
    }
    let lhs = sys.reversed(i, j)?.s_hat(0, j - i, z)?;
    let mut rhs = sys.s_hat(i, j, z)?;
    if (j - i) % 2 == 1 {
        rhs = -rhs;
    }
    for k in i..j {
        let fwd = sys.s_hat(i, k, z)?;
        let rev = sys.reversed(k + 1, j)?.s_hat(0, j - k - 1, z)?;
        let term = &fwd * &rev;
        rhs = if (k - i) % 2 == 0 {
            rhs + term
        } else {
            rhs - term
        };
    }
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn close(a: &Float, b: f64, tol: f64) -> bool {
        (a.to_f64() - b).abs() <= tol
    }

    #[test]
    fn chebyshev2_two_nodes() {
        let spec = WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap();
        let m = build_gauss_rule(&spec, 2, P).unwrap();
        let pi4 = std::f64::consts::FRAC_PI_4;
        assert!(close(&m.nodes()[0], -0.5, 1e-60) && close(&m.nodes()[1], 0.5, 1e-60));
        assert!(m.weights().iter().all(|w| close(w, pi4, 1e-15)));
    }

    #[test]
    fn legendre_one_node() {
        let spec = WeightSpec::new(WeightFamily::Legendre, -1.0, 1.0).unwrap();
        let m = build_gauss_rule(&spec, 1, P).unwrap();
        assert!(m.nodes()[0].to_f64().abs() < 1e-60);
        assert!(close(&m.weights()[0], 2.0, 1e-60));
    }

    #[test]
    fn chebyshev1_shifted() {
        let spec = WeightSpec::new(WeightFamily::Chebyshev1, 2.0, 3.0).unwrap();
        let m = build_gauss_rule(&spec, 3, P).unwrap();
        let pi = std::f64::consts::PI;
        for (k, x) in m.nodes().iter().enumerate() {
            let kk = (3 - k) as f64;
            let want = 2.5 + 0.5 * ((2.0 * kk - 1.0) * pi / 6.0).cos();
            assert!(close(x, want, 1e-15));
            assert!(close(&m.weights()[k], pi / 3.0, 1e-15));
        }
    }

    /// Exact moments of the reference weights on [-1, 1].
    fn moment(family: WeightFamily, p: u32) -> Float {
        let prec = P;
        if p % 2 == 1 {
            return mp::zero(prec);
        }
        let half = |v: f64| mp::real(prec, v);
        let beta = |a: Float, b: Float| -> Float {
            let s = Float::with_val(prec, &a + &b);
            (a.ln_abs_gamma().0 + b.ln_abs_gamma().0 - s.ln_abs_gamma().0).exp()
        };
        let k = p as f64;
        match family {
            // ∫ x^p (1-x^2)^{e} dx = B((p+1)/2, e+1)
            WeightFamily::Chebyshev1 => beta(half((k + 1.0) / 2.0), half(0.5)),
            WeightFamily::Chebyshev2 => beta(half((k + 1.0) / 2.0), half(1.5)),
            WeightFamily::Legendre => Float::with_val(prec, 2) / (p + 1),
            WeightFamily::Jacobi { .. } => unreachable!(),
        }
    }

    #[test]
    fn gauss_exactness_on_monomials() {
        let tol = mp::digits_tol(P, 0.28);
        for fam in [
            WeightFamily::Chebyshev1,
            WeightFamily::Chebyshev2,
            WeightFamily::Legendre,
        ] {
            let spec = WeightSpec::new(fam, -1.0, 1.0).unwrap();
            for n in [1usize, 4, 17] {
                let m = build_gauss_rule(&spec, n, P).unwrap();
                for p in 0..(2 * n as u32) {
                    let got = m.integrate(|x| {
                        use rug::ops::Pow;
                        x.clone().pow(p)
                    });
                    let err = Float::with_val(P, &got - moment(fam, p)).abs();
                    assert!(err <= tol, "{fam:?} n={n} p={p} err={}", err.to_f64());
                }
            }
        }
    }

    #[test]
    fn jacobi_matches_gegenbauer_and_legendre() {
        // alpha = beta = 1/2 is Chebyshev-2
        let a = build_gauss_rule(
            &WeightSpec::new(
                WeightFamily::Jacobi {
                    alpha: 0.5,
                    beta: 0.5,
                },
                -1.0,
                1.0,
            )
            .unwrap(),
            9,
            P,
        )
        .unwrap();
        let b = build_gauss_rule(
            &WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap(),
            9,
            P,
        )
        .unwrap();
        let tol = mp::digits_tol(P, 0.9);
        for i in 0..9 {
            assert!(Float::with_val(P, &a.nodes()[i] - &b.nodes()[i]).abs() < tol);
            assert!(Float::with_val(P, &a.weights()[i] - &b.weights()[i]).abs() < tol);
        }
        // a non-symmetric pair: total mass 2^{a+b+1} B(a+1, b+1)
        let j = build_gauss_rule(
            &WeightSpec::new(
                WeightFamily::Jacobi {
                    alpha: 1.5,
                    beta: -0.3,
                },
                -1.0,
                1.0,
            )
            .unwrap(),
            12,
            P,
        )
        .unwrap();
        let want = 2f64.powf(2.2) * (statrs_beta(2.5, 0.7));
        assert!(close(&j.total_mass(), want, 1e-12));
    }

    fn statrs_beta(a: f64, b: f64) -> f64 {
        let la = mp::real(P, a).ln_abs_gamma().0;
        let lb = mp::real(P, b).ln_abs_gamma().0;
        let lab = mp::real(P, a + b).ln_abs_gamma().0;
        (la + lb - lab).exp().to_f64()
    }

    #[test]
    fn invalid_inputs() {
        let bad = WeightSpec::new(
            WeightFamily::Jacobi {
                alpha: -1.0,
                beta: 0.0,
            },
            -1.0,
            1.0,
        )
        .unwrap();
        assert!(build_gauss_rule(&bad, 4, P).is_err());
        let ok = WeightSpec::new(WeightFamily::Legendre, -1.0, 1.0).unwrap();
        assert_eq!(build_gauss_rule(&ok, 0, P), Err(Error::NoNodes));
        assert!(build_gauss_rule(&ok.clone().with_atom(0.5, 1.0), 4, P).is_err());
        assert!(build_gauss_rule(&ok.clone().with_atom(1.5, -1.0), 4, P).is_err());
        assert!(Interval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn cauchy_transform_examples() {
        let spec = WeightSpec::new(WeightFamily::Chebyshev1, -1.0, 1.0).unwrap();
        let m = build_gauss_rule(&spec, 200, P).unwrap().normalized();
        let v = cauchy_transform(&m, &Complex::from_f64(P, 2.0, 0.0)).unwrap();
        assert!((v.re.to_f64() - 1.0 / 3f64.sqrt()).abs() < 1e-12 && v.im.is_zero());

        let atom = DiscretizedMeasure::from_parts(
            Interval::new(-0.5, 0.5).unwrap(),
            vec![mp::zero(P)],
            vec![mp::one(P)],
            vec![],
        )
        .unwrap();
        let v = cauchy_transform(&atom, &Complex::from_f64(P, 2.0, 0.0)).unwrap();
        assert_eq!(v.re.to_f64(), 0.5);
        assert_eq!(
            cauchy_transform(&atom, &Complex::zero(P)),
            Err(Error::NodeCollision)
        );

        let z = Complex::from_f64(P, 0.3, 0.7);
        let a = cauchy_transform(&m, &z).unwrap();
        let b = cauchy_transform(&m, &z.conj()).unwrap().conj();
        assert_eq!(a, b);
    }

    fn sys3() -> NikishinSystem {
        let specs = [
            WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap(),
            WeightSpec::new(WeightFamily::Chebyshev1, 2.0, 3.0).unwrap(),
            WeightSpec::new(WeightFamily::Legendre, -4.0, -2.0).unwrap(),
        ];
        NikishinSystem::from_specs(&specs, 24, P).unwrap()
    }

    #[test]
    fn s_hat_base_case_and_unfolding() {
        let s = sys3();
        let z = Complex::from_f64(P, 0.2, 1.1);
        assert_eq!(
            s.s_hat(1, 1, &z).unwrap(),
            cauchy_transform(s.generator(1), &z).unwrap()
        );
        let g0 = s.generator(0);
        let mut acc = Complex::zero(P);
        for (x, w) in g0.points().iter().zip(g0.masses()) {
            let d = s.s_hat_real(1, 1, x).unwrap();
            let num = Complex::from_real(Float::with_val(P, w * &d));
            acc = acc + num / z.sub_real(x);
        }
        assert!((acc - s.s_hat(0, 1, &z).unwrap()).abs() < mp::digits_tol(P, 0.9));
    }

    #[test]
    fn s_hat_matches_double_sum() {
        let s = sys3();
        let z = Complex::from_f64(P, -0.4, 0.9);
        let (g0, g1) = (s.generator(0), s.generator(1));
        let mut acc = Complex::zero(P);
        for (x, w) in g0.points().iter().zip(g0.masses()) {
            for (t, v) in g1.points().iter().zip(g1.masses()) {
                let c = Float::with_val(P, w * v) / Float::with_val(P, x - t);
                acc = acc + Complex::from_real(c) / z.sub_real(x);
            }
        }
        let err = (acc - s.s_hat(0, 1, &z).unwrap()).abs();
        assert!(err < 1e-30, "{}", err.to_f64());
    }

    #[test]
    fn cauchy_identity_examples() {
        let specs = [
            WeightSpec::new(WeightFamily::Chebyshev1, 2.0, 3.0).unwrap(),
            WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap(),
        ];
        let two = NikishinSystem::from_specs(&specs, 32, P).unwrap();
        let z = Complex::from_f64(P, 0.0, 5.0);
        let r = check_cauchy_identity(&two, 0, 1, &z).unwrap();
        assert!(r < 1e-25);
        assert_eq!(r, check_cauchy_identity(&two, 0, 1, &z.conj()).unwrap());
        let s = sys3();
        assert!(check_cauchy_identity(&s, 0, 2, &Complex::from_f64(P, 10.0, 0.0)).unwrap() < 1e-25);
        assert!(check_cauchy_identity(&s, 1, 1, &z).is_err());
    }

    #[test]
    fn s_hat_far_field_and_sign() {
        let s = sys3();
        let big = Complex::from_f64(P, 1e6, 0.0);
        let masses = s.total_masses();
        for k in 0..=2 {
            let v = s.s_hat(0, k, &big).unwrap();
            let zv = v.re.to_f64() * 1e6;
            let m = masses[k].to_f64();
            assert!((zv - m).abs() <= 1e-5 * m.abs());
        }
        // constant sign of ŝ_{1,2} on a grid left of Δ_1
        let signs: Vec<bool> = (0..20)
            .map(|i| {
                s.s_hat_real(1, 2, &mp::real(P, -1.0 + 0.1 * i as f64))
                    .unwrap()
                    .is_sign_positive()
            })
            .collect();
        assert!(signs.iter().all(|&b| b == signs[0]));
    }

    #[test]
    fn overlapping_supports_rejected() {
        let specs = [
            WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap(),
            WeightSpec::new(WeightFamily::Chebyshev1, 0.5, 3.0).unwrap(),
        ];
        assert!(matches!(
            NikishinSystem::from_specs(&specs, 8, P),
            Err(Error::OverlappingSupports(0, 1))
        ));
        // an atom can also make hulls overlap
        let specs = [
            WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0)
                .unwrap()
                .with_atom(2.5, 0.1),
            WeightSpec::new(WeightFamily::Chebyshev1, 2.0, 3.0).unwrap(),
        ];
        assert!(NikishinSystem::from_specs(&specs, 8, P).is_err());
    }
}
