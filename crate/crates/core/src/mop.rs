//! Mixed-type multiple orthogonal polynomials and their linear forms A_{n,j}.

use std::sync::{Arc, OnceLock};

use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::MultiIndexPair;
use crate::linalg::{self, Matrix};
use crate::measures::{DiscretizedMeasure, Interval, NikishinSystem};
use crate::mp::{
    self, horner_complex, horner_real, root_product, root_product_real, weighted_cauchy,
    weighted_cauchy_real, Complex,
};
use crate::zeros;

/// Two Nikishin systems S1 = N(σ¹_0..σ¹_m1), S2 = N(σ²_0..σ²_m2) with σ¹_0 = σ²_0.
///
/// Forms are indexed by j in -m2-1..=m1 with σ_j = σ¹_j for j >= 0 and σ_j = σ²_{-j} for j <= 0.
#[derive(Clone, Debug)]
pub struct SystemPair {
    s1: NikishinSystem,
    s2: NikishinSystem,
}

impl SystemPair {
    pub fn new(s1: NikishinSystem, s2: NikishinSystem) -> Result<Self> {
        if s1.generator(0) != s2.generator(0) {
            return Err(Error::BaseMeasureMismatch);
        }
        Ok(SystemPair { s1, s2 })
    }

    pub fn s1(&self) -> &NikishinSystem {
        &self.s1
    }

    pub fn s2(&self) -> &NikishinSystem {
        &self.s2
    }

    pub fn m1(&self) -> usize {
        self.s1.m()
    }

    pub fn m2(&self) -> usize {
        self.s2.m()
    }

    pub fn precision_bits(&self) -> u32 {
        self.s1.precision_bits()
    }

    /// The pair with the roles of S1 and S2 exchanged.
    pub fn swapped(&self) -> SystemPair {
        SystemPair {
            s1: self.s2.clone(),
            s2: self.s1.clone(),
        }
    }

    pub fn base(&self) -> &DiscretizedMeasure {
        self.s1.generator(0)
    }

    fn check_j(&self, j: i32) -> Result<()> {
        if j < -(self.m2() as i32) || j > self.m1() as i32 {
            return Err(Error::IndexOutOfRange(format!("measure index {j}")));
        }
        Ok(())
    }

    /// σ_j for j in -m2..=m1.
    pub fn measure(&self, j: i32) -> Result<&DiscretizedMeasure> {
        self.check_j(j)?;
        Ok(if j >= 0 {
            self.s1.generator(j as usize)
        } else {
            self.s2.generator((-j) as usize)
        })
    }

    /// Δ_j: convex hull of supp σ_j.
    pub fn delta(&self, j: i32) -> Result<Interval> {
        Ok(self.measure(j)?.hull())
    }

    /// δ_j for j = -m2..m1-1: +1 if Δ_j lies left of Δ_{j+1}, else -1.
    pub fn layout(&self) -> Vec<i32> {
        let lo = -(self.m2() as i32);
        (lo..self.m1() as i32)
            .map(|j| {
                let (a, b) = (self.delta(j).unwrap(), self.delta(j + 1).unwrap());
                if a.left_of(&b) {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    fn check_index(&self, n: &MultiIndexPair) -> Result<()> {
        if n.m1() != self.m1() || n.m2() != self.m2() {
            return Err(Error::InvalidIndex(format!(
                "index {n} does not fit systems with m1={}, m2={}",
                self.m1(),
                self.m2()
            )));
        }
        Ok(())
    }
}

fn column_offsets(n1: &[usize]) -> Vec<usize> {
    let mut off = Vec::with_capacity(n1.len());
    let mut acc = 0;
    for &v in n1 {
        off.push(acc);
        acc += v;
    }
    off
}

/// The |n2| x |n1| matrix of the conditions ∫ x^ν A_{n,0} ds²_{0,k} = 0.
///
/// Row (k, ν) for ν < n_{2,k}; column (j, p) for the coefficient of x^p in a_{n,j}.
pub fn assemble_moment_system(n: &MultiIndexPair, pair: &SystemPair) -> Result<Matrix> {
    pair.check_index(n)?;
    let prec = pair.precision_bits();
    let base = pair.base();
    let xs = base.points();
    let ws = base.masses();
    let (n1, n2) = (n.n1(), n.n2());
    let off = column_offsets(n1);
    let mut mat: Matrix = Vec::with_capacity(n.size2());
    for k in 0..=n.m2() {
        let v = pair.s2.density(0, k)?;
        // moments of x^q u_j v_k dσ_0 for each j
        let per_j: Vec<Vec<Float>> = (0..=n.m1())
            .map(|j| {
                let u = pair.s1.density(0, j).unwrap();
                let qmax = (n2[k] + n1[j]).saturating_sub(1);
                let mut moms = vec![mp::zero(prec); qmax.max(1)];
                for a in 0..xs.len() {
                    let mut t = Float::with_val(prec, &ws[a] * &u[a]);
                    t *= &v[a];
                    for m in moms.iter_mut() {
                        *m += &t;
                        t *= &xs[a];
                    }
                }
                moms
            })
            .collect();
        for nu in 0..n2[k] {
            let mut row = vec![mp::zero(prec); n.size1()];
            for j in 0..=n.m1() {
                for p in 0..n1[j] {
                    row[off[j] + p] = per_j[j][nu + p].clone();
                }
            }
            mat.push(row);
        }
    }
    Ok(mat)
}

/// Monic-normalized coefficient vector (a_{n,0}, ..., a_{n,m1}), ascending coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MopSolution {
    pub index: MultiIndexPair,
    pub coeffs: Vec<Vec<Float>>,
    /// Component whose leading coefficient is pinned to 1.
    pub monic: usize,
    /// True when the square pinned system was singular and the null-space path was taken.
    pub used_fallback: bool,
}

impl MopSolution {
    pub fn precision_bits(&self) -> u32 {
        self.coeffs
            .iter()
            .flatten()
            .next()
            .map(|c| c.prec())
            .unwrap_or(mp::DEFAULT_PRECISION)
    }

    /// Numerical degree of a_{n,j}: index of the last coefficient above the noise floor.
    pub fn degree(&self, j: usize) -> Option<usize> {
        let prec = self.precision_bits();
        let tol = mp::digits_tol(prec, 0.5);
        let global = self
            .coeffs
            .iter()
            .flatten()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max);
        let local = self.coeffs[j]
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max);
        if local == 0.0 || local < tol.to_f64() * global {
            return None;
        }
        self.coeffs[j]
            .iter()
            .rposition(|c| c.to_f64().abs() > tol.to_f64() * local)
    }

    /// deg a_{n,j} = n_{1,j} - 1 for all j with n_{1,j} >= 1, and a_{n,j} ≡ 0 otherwise.
    pub fn check_normality(&self) -> Result<()> {
        for (j, &nj) in self.index.n1().iter().enumerate() {
            let got = self.degree(j);
            let ok = if nj == 0 {
                got.is_none()
            } else {
                got == Some(nj - 1)
            };
            if !ok {
                return Err(Error::NormalityViolation {
                    j,
                    got,
                    expected: nj.saturating_sub(1),
                });
            }
        }
        Ok(())
    }
}

/// Solves the mixed-type orthogonality conditions for the index n.
pub fn solve_mop(n: &MultiIndexPair, pair: &SystemPair) -> Result<MopSolution> {
    let prec = pair.precision_bits();
    let mat = assemble_moment_system(n, pair)?;
    let n1 = n.n1();
    let off = column_offsets(n1);
    let monic = (0..n1.len())
        .rev()
        .find(|&j| n1[j] >= 1)
        .expect("|n1| >= 1");
    let pcol = off[monic] + n1[monic] - 1;
    let cols = n.size1();
    let square: Matrix = mat
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != pcol)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect();
    let rhs: Vec<Float> = mat
        .iter()
        .map(|row| Float::with_val(prec, -&row[pcol]))
        .collect();
    let (flat, used_fallback) = match linalg::solve_square(&square, &rhs, prec) {
        Some(x) => {
            let mut flat = Vec::with_capacity(cols);
            let mut it = x.into_iter();
            for c in 0..cols {
                flat.push(if c == pcol {
                    mp::one(prec)
                } else {
                    it.next().unwrap()
                });
            }
            (flat, false)
        }
        None => {
            let v = linalg::smallest_singular_vector(&mat, cols, prec);
            let vmax = v.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max);
            let floor = mp::digits_tol(prec, 0.5).to_f64() * vmax;
            let last = (0..n1.len())
                .rev()
                .find(|&j| {
                    n1[j] >= 1
                        && v[off[j]..off[j] + n1[j]]
                            .iter()
                            .any(|c| c.to_f64().abs() > floor)
                })
                .ok_or(Error::SingularSystem)?;
            let lead = v[off[last] + n1[last] - 1].clone();
            if lead.is_zero() {
                return Err(Error::SingularSystem);
            }
            (v.into_iter().map(|c| c / &lead).collect(), true)
        }
    };
    let coeffs = (0..n1.len())
        .map(|j| flat[off[j]..off[j] + n1[j]].to_vec())
        .collect();
    let sol = MopSolution {
        index: n.clone(),
        coeffs,
        monic,
        used_fallback,
    };
    sol.check_normality()?;
    Ok(sol)
}

/// Evaluators for all forms A_{n,j}, j = -m2-1..=m1, with cached values on the supports.
#[derive(Debug)]
pub struct FormEvaluator {
    sol: MopSolution,
    pair: Arc<SystemPair>,
    // A_{n,j} at the support points of σ_j, j = -m2..=m1 (slot j + m2)
    support_vals: Vec<Vec<Float>>,
    // A_{n,-j'} times the masses of σ²_{j'}, j' = 0..=m2
    neg_eff: Vec<Vec<Float>>,
    zeros: Vec<OnceLock<Result<Vec<Float>>>>,
}

impl FormEvaluator {
    pub fn new(sol: MopSolution, pair: Arc<SystemPair>) -> Result<Self> {
        pair.check_index(&sol.index)?;
        let prec = pair.precision_bits();
        let (m1, m2) = (pair.m1(), pair.m2());
        let mut support_vals = vec![Vec::new(); m1 + m2 + 1];
        for j in 0..=m1 {
            let g = pair.s1.generator(j);
            let mut vals = vec![mp::zero(prec); g.len()];
            for k in j..=m1 {
                let d = pair.s1.density(j, k)?;
                for (a, x) in g.points().iter().enumerate() {
                    let t = horner_real(&sol.coeffs[k], x) * &d[a];
                    vals[a] += t;
                }
            }
            support_vals[j + m2] = vals;
        }
        let mut neg_eff: Vec<Vec<Float>> = Vec::with_capacity(m2 + 1);
        for jp in 0..=m2 {
            let g = pair.s2.generator(jp);
            if jp > 0 {
                let prev = pair.s2.generator(jp - 1);
                let vals: Vec<Float> = g
                    .points()
                    .iter()
                    .map(|t| {
                        weighted_cauchy_real(prev.points(), &neg_eff[jp - 1], t)
                            .ok_or(Error::NodeCollision)
                    })
                    .collect::<Result<_>>()?;
                support_vals[m2 - jp] = vals;
            }
            let eff = support_vals[m2 - jp]
                .iter()
                .zip(g.masses())
                .map(|(v, w)| Float::with_val(prec, v * w))
                .collect();
            neg_eff.push(eff);
        }
        let zeros = (0..m1 + m2 + 2).map(|_| OnceLock::new()).collect();
        Ok(FormEvaluator {
            sol,
            pair,
            support_vals,
            neg_eff,
            zeros,
        })
    }

    pub fn solve(n: &MultiIndexPair, pair: Arc<SystemPair>) -> Result<Self> {
        let sol = solve_mop(n, &pair)?;
        Self::new(sol, pair)
    }

    pub fn solution(&self) -> &MopSolution {
        &self.sol
    }

    pub fn index(&self) -> &MultiIndexPair {
        &self.sol.index
    }

    pub fn pair(&self) -> &SystemPair {
        &self.pair
    }

    pub fn pair_arc(&self) -> Arc<SystemPair> {
        self.pair.clone()
    }

    pub fn precision_bits(&self) -> u32 {
        self.pair.precision_bits()
    }

    pub fn m1(&self) -> usize {
        self.pair.m1()
    }

    pub fn m2(&self) -> usize {
        self.pair.m2()
    }

    fn check_form(&self, j: i32) -> Result<()> {
        if j < -(self.m2() as i32) - 1 || j > self.m1() as i32 {
            return Err(Error::IndexOutOfRange(format!("form index {j}")));
        }
        Ok(())
    }

    /// A_{n,j} at the support points of σ_j, j in -m2..=m1.
    pub fn values_on_support(&self, j: i32) -> Result<&[Float]> {
        self.pair.check_j(j)?;
        Ok(&self.support_vals[(j + self.m2() as i32) as usize])
    }

    pub fn eval_form(&self, j: i32, z: &Complex) -> Result<Complex> {
        self.check_form(j)?;
        if j >= 0 {
            let j = j as usize;
            let mut acc = horner_complex(&self.sol.coeffs[j], z);
            for k in j + 1..=self.m1() {
                let s = self.pair.s1.s_hat(j + 1, k, z)?;
                acc = acc + horner_complex(&self.sol.coeffs[k], z) * s;
            }
            Ok(acc)
        } else {
            let jp = (-j - 1) as usize;
            weighted_cauchy(self.pair.s2.generator(jp).points(), &self.neg_eff[jp], z)
                .ok_or(Error::NodeCollision)
        }
    }

    pub fn eval_form_real(&self, j: i32, x: &Float) -> Result<Float> {
        self.check_form(j)?;
        if j >= 0 {
            let j = j as usize;
            let mut acc = horner_real(&self.sol.coeffs[j], x);
            for k in j + 1..=self.m1() {
                let s = self.pair.s1.s_hat_real(j + 1, k, x)?;
                acc += horner_real(&self.sol.coeffs[k], x) * s;
            }
            Ok(acc)
        } else {
            let jp = (-j - 1) as usize;
            weighted_cauchy_real(self.pair.s2.generator(jp).points(), &self.neg_eff[jp], x)
                .ok_or(Error::NodeCollision)
        }
    }

    /// Zeros of A_{n,j} on Δ_j, i.e. the zeros of Q_{n,j}; memoized.
    pub fn extract_q(&self, j: i32) -> Result<&[Float]> {
        self.check_form(j)?;
        let slot = (j + self.m2() as i32 + 1) as usize;
        self.zeros[slot]
            .get_or_init(|| self.compute_zeros(j))
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }

    fn compute_zeros(&self, j: i32) -> Result<Vec<Float>> {
        let n = self.index();
        let expected = n.zero_count(j);
        if j == -(self.m2() as i32) - 1 || (j >= 0 && n.tail1(j as usize) == 0) {
            return Ok(Vec::new());
        }
        let region = self.pair.delta(j)?;
        let prec = self.precision_bits();
        let f = |x: &Float| {
            self.eval_form_real(j, x)
                .expect("Δ_j is disjoint from the kernel support")
        };
        zeros::find_zeros(f, region.a, region.b, expected, prec).map_err(|e| {
            Error::ZeroCountMismatch {
                j,
                found: e.found,
                expected,
            }
        })
    }

    /// Q_{n,j}(z) for j in -m2-1..=m1+1 (Q ≡ 1 at both ends).
    pub fn q_eval(&self, j: i32, z: &Complex) -> Result<Complex> {
        if j == self.m1() as i32 + 1 || j == -(self.m2() as i32) - 1 {
            return Ok(Complex::one(z.prec()));
        }
        Ok(root_product(self.extract_q(j)?, z))
    }

    pub fn q_eval_real(&self, j: i32, x: &Float) -> Result<Float> {
        if j == self.m1() as i32 + 1 || j == -(self.m2() as i32) - 1 {
            return Ok(mp::one(x.prec()));
        }
        Ok(root_product_real(self.extract_q(j)?, x))
    }

    /// Extracts every zero set, returning the first failure.
    pub fn extract_all(&self) -> Result<()> {
        for j in self.index().form_range() {
            self.extract_q(j)?;
        }
        Ok(())
    }

    /// H_{n,j}(z) = Q_{n,j+1} A_{n,j} / Q_{n,j}, j in -m2-1..=m1.
    pub fn eval_h(&self, j: i32, z: &Complex) -> Result<Complex> {
        let num = self.q_eval(j + 1, z)? * self.eval_form(j, z)?;
        Ok(num / self.q_eval(j, z)?)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Residual {
    pub relation: String,
    pub j: i32,
    pub detail: String,
    pub value: f64,
}

fn rel(num: &Float, scale: &Float) -> f64 {
    if scale.is_zero() {
        return if num.is_zero() { 0.0 } else { f64::INFINITY };
    }
    Float::with_val(num.prec(), num / scale).abs().to_f64()
}

/// Relative residual of ∫ x^ν f dμ for ν = 0..count, normalized by ∫ |x^ν f| d|μ|.
fn moment_residuals(xs: &[Float], ws: &[Float], f: &[Float], count: usize, prec: u32) -> Vec<f64> {
    let mut sums = vec![mp::zero(prec); count];
    let mut scales = vec![mp::zero(prec); count];
    for a in 0..xs.len() {
        let mut t = Float::with_val(prec, &ws[a] * &f[a]);
        for nu in 0..count {
            sums[nu] += &t;
            scales[nu] += Float::with_val(prec, t.abs_ref());
            t *= &xs[a];
        }
    }
    sums.iter().zip(&scales).map(|(s, c)| rel(s, c)).collect()
}

impl FormEvaluator {
    /// Residuals of the orthogonality relations for positive forms, negative forms and the
    /// defining conditions against s²_{j,k}.
    pub fn orthogonality_residuals(&self) -> Result<Vec<Residual>> {
        let prec = self.precision_bits();
        let n = self.index().clone();
        let mut out = Vec::new();
        // ∫ x^ν A_{n,j} dσ¹_j / Q_{n,j-1} = 0, ν <= N_{1,j} - 2
        for j in 1..=self.m1() {
            let count = n.tail1(j).saturating_sub(1);
            if count == 0 {
                continue;
            }
            let g = self.pair.s1.generator(j);
            let vals = self.values_on_support(j as i32)?;
            let f: Vec<Float> = g
                .points()
                .iter()
                .zip(vals)
                .map(|(x, v)| {
                    Ok(Float::with_val(
                        prec,
                        v / self.q_eval_real(j as i32 - 1, x)?,
                    ))
                })
                .collect::<Result<_>>()?;
            for (nu, r) in moment_residuals(g.points(), g.masses(), &f, count, prec)
                .into_iter()
                .enumerate()
            {
                out.push(Residual {
                    relation: "positive".into(),
                    j: j as i32,
                    detail: format!("nu={nu}"),
                    value: r,
                });
            }
        }
        for j in 0..=self.m2() {
            let g = self.pair.s2.generator(j);
            let vals = self.values_on_support(-(j as i32))?;
            // ∫ x^ν A_{n,-j} ds²_{j,k} = 0, ν < n_{2,k}
            for k in j..=self.m2() {
                let masses = self.pair.s2.masses(j, k)?;
                let r = moment_residuals(g.points(), masses, vals, n.n2()[k], prec);
                for (nu, r) in r.into_iter().enumerate() {
                    out.push(Residual {
                        relation: "defining".into(),
                        j: -(j as i32),
                        detail: format!("k={k},nu={nu}"),
                        value: r,
                    });
                }
            }
            // ∫ x^ν A_{n,-j} dσ²_j / Q_{n,-j-1} = 0, ν <= N_{2,j} - 1
            let f: Vec<Float> = g
                .points()
                .iter()
                .zip(vals)
                .map(|(x, v)| {
                    Ok(Float::with_val(
                        prec,
                        v / self.q_eval_real(-(j as i32) - 1, x)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let r = moment_residuals(g.points(), g.masses(), &f, n.tail2(j), prec);
            for (nu, r) in r.into_iter().enumerate() {
                out.push(Residual {
                    relation: "negative".into(),
                    j: -(j as i32),
                    detail: format!("nu={nu}"),
                    value: r,
                });
            }
        }
        Ok(out)
    }

    /// Agreement of q A_{n,j}/Q_{n,j} with its integral representation through A_{n,j+1}, with
    /// q = Q_{n,j+1}, for every form j = -m2-1..m1-1 at the given points. Positive j with
    /// N_{1,j+1} = 0 are left out.
    pub fn integral_representation_residuals(&self, points: &[Complex]) -> Result<Vec<Residual>> {
        let prec = self.precision_bits();
        let mut out = Vec::new();
        for j in -(self.m2() as i32) - 1..self.m1() as i32 {
            // with n_{1,k} = 0 for all k > j the right side vanishes and H_{n,j} is a nonzero constant
            if j >= 0 && self.index().tail1(j as usize + 1) == 0 {
                continue;
            }
            let g = self.pair.measure(j + 1)?;
            let vals = self.values_on_support(j + 1)?;
            let eff: Vec<Float> = g
                .points()
                .iter()
                .zip(vals.iter().zip(g.masses()))
                .map(|(x, (v, w))| {
                    let q = self.q_eval_real(j + 1, x)?;
                    let d = self.q_eval_real(j, x)?;
                    Ok(Float::with_val(prec, v * w) * q / d)
                })
                .collect::<Result<_>>()?;
            let relation = if j >= 0 { "positive" } else { "negative" };
            for (i, z) in points.iter().enumerate() {
                let lhs = self.q_eval(j + 1, z)? * self.eval_form(j, z)? / self.q_eval(j, z)?;
                let rhs = weighted_cauchy(g.points(), &eff, z).ok_or(Error::NodeCollision)?;
                let r = rel(&(lhs.clone() - rhs).abs(), &lhs.abs());
                out.push(Residual {
                    relation: relation.into(),
                    j,
                    detail: format!("point={i}"),
                    value: r,
                });
            }
        }
        Ok(out)
    }
}

/// K, κ, ε and the varying-measure densities for one index.
#[derive(Clone, Debug)]
pub struct VaryingMeasureData {
    m1: usize,
    m2: usize,
    big_k: Vec<Float>,
    kappa: Vec<Float>,
    epsilon: Vec<i32>,
    h_support: Vec<Vec<Float>>,
}

impl VaryingMeasureData {
    fn slot(&self, j: i32) -> usize {
        (j + self.m2 as i32) as usize
    }

    /// K_{n,j} for j in -m2..=m1+1.
    pub fn big_k(&self, j: i32) -> &Float {
        &self.big_k[self.slot(j)]
    }

    pub fn kappa(&self, j: i32) -> &Float {
        &self.kappa[self.slot(j)]
    }

    pub fn epsilon(&self, j: i32) -> i32 {
        self.epsilon[self.slot(j)]
    }

    /// h_{n,j} at the support points of σ_j.
    pub fn h_on_support(&self, j: i32) -> &[Float] {
        &self.h_support[self.slot(j)]
    }

    /// h_{n,j-1}(z) = K²_{n,j} H_{n,j-1}(z), j in -m2..=m1+1.
    pub fn h(&self, f: &FormEvaluator, j_minus_1: i32, z: &Complex) -> Result<Complex> {
        let k = self.big_k(j_minus_1 + 1);
        let k2 = Float::with_val(k.prec(), k.square_ref());
        Ok(f.eval_h(j_minus_1, z)?.scale(&k2))
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i32> {
        -(self.m2 as i32)..=self.m1 as i32
    }
}

pub fn compute_varying_data(f: &FormEvaluator) -> Result<VaryingMeasureData> {
    f.extract_all()?;
    let prec = f.precision_bits();
    let (m1, m2) = (f.m1(), f.m2());
    let lo = -(m2 as i32);
    let mut big_k = vec![mp::one(prec); m1 + m2 + 2];
    // K_{n,j}^{-2} = ∫ |Q_{n,j} A_{n,j}| / |Q_{n,j-1}| d|σ_j|
    for j in lo..=m1 as i32 {
        let g = f.pair.measure(j)?;
        let vals = f.values_on_support(j)?;
        let mut s = mp::zero(prec);
        for ((x, w), v) in g.points().iter().zip(g.masses()).zip(vals) {
            let t = f.q_eval_real(j, x)? * v / f.q_eval_real(j - 1, x)? * w;
            s += t.abs();
        }
        big_k[(j - lo) as usize] = s.sqrt().recip();
    }
    let kappa: Vec<Float> = (0..m1 + m2 + 1)
        .map(|i| Float::with_val(prec, &big_k[i] / &big_k[i + 1]))
        .collect();
    let mut h_support = Vec::new();
    let mut epsilon = Vec::new();
    for j in lo..=m1 as i32 {
        let g = f.pair.measure(j)?;
        let vals = f.values_on_support(j)?;
        let k2 = Float::with_val(prec, big_k[(j + 1 - lo) as usize].square_ref());
        let mut hs = Vec::with_capacity(g.len());
        let mut total = mp::zero(prec);
        for ((x, w), v) in g.points().iter().zip(g.masses()).zip(vals) {
            let h = f.q_eval_real(j + 1, x)? * v / f.q_eval_real(j, x)? * &k2;
            let dens = Float::with_val(prec, &h * w)
                / (f.q_eval_real(j - 1, x)? * f.q_eval_real(j + 1, x)?);
            total += dens;
            hs.push(h);
        }
        epsilon.push(if total.is_sign_negative() { -1 } else { 1 });
        h_support.push(hs);
    }
    Ok(VaryingMeasureData {
        m1,
        m2,
        big_k,
        kappa,
        epsilon,
        h_support,
    })
}

impl VaryingMeasureData {
    /// ∫ q²_{n,j} d|ρ_{n,j}|, which should equal one.
    pub fn orthonormality(&self, f: &FormEvaluator, j: i32) -> Result<Float> {
        let prec = f.precision_bits();
        let g = f.pair.measure(j)?;
        let kap2 = Float::with_val(prec, self.kappa(j).square_ref());
        let mut s = mp::zero(prec);
        for ((x, w), h) in g.points().iter().zip(g.masses()).zip(self.h_on_support(j)) {
            let q = f.q_eval_real(j, x)?;
            let rho = Float::with_val(prec, h * w)
                / (f.q_eval_real(j - 1, x)? * f.q_eval_real(j + 1, x)?);
            s += Float::with_val(prec, q.square_ref()) * rho.abs();
        }
        Ok(s * kap2)
    }

    /// Sign of the density of ρ_{n,j} at the midpoint of the interval carrying σ_j.
    pub fn epsilon_at_midpoint(&self, f: &FormEvaluator, j: i32) -> Result<i32> {
        let prec = f.precision_bits();
        let g = f.pair.measure(j)?;
        let x = mp::real(prec, g.interval().midpoint());
        let z = Complex::from_real(x.clone());
        let h = self.h(f, j, &z)?.re;
        let d = h * g.sign() / (f.q_eval_real(j - 1, &x)? * f.q_eval_real(j + 1, &x)?);
        Ok(if d.is_sign_negative() { -1 } else { 1 })
    }

    /// Relative gap in h_{n,j-1}(z) = ε_{n,j} ∫ q²_{n,j}/(z-x) d|ρ_{n,j}|.
    pub fn cauchy_residual(&self, f: &FormEvaluator, j: i32, z: &Complex) -> Result<f64> {
        let prec = f.precision_bits();
        let g = f.pair.measure(j)?;
        let kap2 = Float::with_val(prec, self.kappa(j).square_ref());
        let mut eff = Vec::with_capacity(g.len());
        for ((x, w), h) in g.points().iter().zip(g.masses()).zip(self.h_on_support(j)) {
            let q = f.q_eval_real(j, x)?;
            let rho = Float::with_val(prec, h * w)
                / (f.q_eval_real(j - 1, x)? * f.q_eval_real(j + 1, x)?);
            let mut t = Float::with_val(prec, q.square_ref()) * rho.abs() * &kap2;
            if self.epsilon(j) < 0 {
                t = -t;
            }
            eff.push(t);
        }
        let rhs = weighted_cauchy(g.points(), &eff, z).ok_or(Error::NodeCollision)?;
        let lhs = self.h(f, j - 1, z)?;
        Ok(rel(&(lhs.clone() - rhs).abs(), &lhs.abs()))
    }
}
