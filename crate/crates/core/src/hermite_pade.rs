//! Matrix Markov function of a pair of Nikishin systems, mixed-type Hermite–Padé approximants
//! built from the forms, and the biorthogonality of the two families obtained by swapping roles.

use std::sync::Arc;

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{staircase, MultiIndexPair};
use crate::mop::{FormEvaluator, Residual, SystemPair};
use crate::mp::{self, horner_complex, weighted_cauchy, Complex};

/// 𝕎 = 𝕌ᵗ𝕍 sampled at the nodes of the shared base measure.
#[derive(Clone, Debug)]
pub struct MatrixMarkovFunction {
    pair: Arc<SystemPair>,
    // u[i][a] = ŝ²_{1,i} at base node a (i = 0 gives 1), likewise v
    u: Vec<Vec<Float>>,
    v: Vec<Vec<Float>>,
}

impl MatrixMarkovFunction {
    pub fn new(pair: Arc<SystemPair>) -> Result<Self> {
        let u = (0..=pair.m2())
            .map(|k| pair.s2().density(0, k).map(|d| d.to_vec()))
            .collect::<Result<_>>()?;
        let v = (0..=pair.m1())
            .map(|k| pair.s1().density(0, k).map(|d| d.to_vec()))
            .collect::<Result<_>>()?;
        Ok(MatrixMarkovFunction { pair, u, v })
    }

    pub fn pair(&self) -> &SystemPair {
        &self.pair
    }

    pub fn rows(&self) -> usize {
        self.u.len()
    }

    pub fn cols(&self) -> usize {
        self.v.len()
    }

    pub fn u(&self, i: usize) -> &[Float] {
        &self.u[i]
    }

    pub fn v(&self, k: usize) -> &[Float] {
        &self.v[k]
    }

    /// 𝕎_{ik} at base node a.
    pub fn w(&self, a: usize, i: usize, k: usize) -> Float {
        Float::with_val(self.pair.precision_bits(), &self.u[i][a] * &self.v[k][a])
    }

    /// Largest 2×2 minor of 𝕎 over all nodes, relative to the squared entry scale at that node.
    pub fn rank_one_defect(&self) -> f64 {
        let (r, c) = (self.rows(), self.cols());
        let prec = self.pair.precision_bits();
        let mut worst = 0.0f64;
        for a in 0..self.pair.base().len() {
            let w: Vec<Vec<Float>> = (0..r)
                .map(|i| (0..c).map(|k| self.w(a, i, k)).collect())
                .collect();
            let scale = w
                .iter()
                .flatten()
                .map(|x| x.to_f64().abs())
                .fold(0.0, f64::max)
                .powi(2);
            for i in 0..r {
                for i2 in i + 1..r {
                    for k in 0..c {
                        for k2 in k + 1..c {
                            let det = Float::with_val(prec, &w[i][k] * &w[i2][k2])
                                - Float::with_val(prec, &w[i][k2] * &w[i2][k]);
                            if scale > 0.0 {
                                worst = worst.max(det.to_f64().abs() / scale);
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    /// Ŝ(z) = ∫ 𝕎(x) dσ_0(x)/(z−x), entry by entry.
    pub fn s_hat(&self, z: &Complex) -> Result<Vec<Vec<Complex>>> {
        let base = self.pair.base();
        (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|k| {
                        let ws: Vec<Float> = (0..base.len())
                            .map(|a| {
                                Float::with_val(
                                    self.pair.precision_bits(),
                                    self.w(a, i, k) * &base.masses()[a],
                                )
                            })
                            .collect();
                        weighted_cauchy(base.points(), &ws, z).ok_or(Error::NodeCollision)
                    })
                    .collect()
            })
            .collect()
    }
}

/// 𝔻_n from the divided-difference integral: row j holds ascending coefficients of d_{n,j}.
pub fn compute_d(f: &FormEvaluator, mm: &MatrixMarkovFunction) -> Vec<Vec<Float>> {
    let prec = f.precision_bits();
    let base = mm.pair().base();
    let coeffs = &f.solution().coeffs;
    let max_deg = coeffs.iter().map(|c| c.len()).max().unwrap_or(0);
    // moments[i][k][p] = ∫ U_i V_k x^p dσ_0
    let moments: Vec<Vec<Vec<Float>>> = (0..mm.rows())
        .map(|i| {
            (0..mm.cols())
                .map(|k| {
                    let mut out = vec![mp::zero(prec); max_deg.max(1)];
                    for a in 0..base.len() {
                        let mut t = mm.w(a, i, k) * &base.masses()[a];
                        for slot in out.iter_mut() {
                            *slot += &t;
                            t *= &base.points()[a];
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();
    // (z^p - x^p)/(z - x) = Σ_{q<p} z^q x^{p-1-q}
    (0..mm.rows())
        .map(|i| {
            let mut d = vec![mp::zero(prec); max_deg.saturating_sub(1)];
            for (k, ck) in coeffs.iter().enumerate() {
                for (p, c) in ck.iter().enumerate().skip(1) {
                    for (q, slot) in d.iter_mut().enumerate().take(p) {
                        *slot += Float::with_val(prec, c * &moments[i][k][p - 1 - q]);
                    }
                }
            }
            while d.len() > 1 && d.last().is_some_and(|c| c.is_zero()) {
                d.pop();
            }
            d
        })
        .collect()
}

pub struct HermitePadeTriple {
    forms: FormEvaluator,
    markov: MatrixMarkovFunction,
    d: Vec<Vec<Float>>,
}

/// Least-squares slope of log|y| against log t.
fn slope(ts: &[f64], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

impl HermitePadeTriple {
    pub fn new(forms: FormEvaluator) -> Result<Self> {
        let markov = MatrixMarkovFunction::new(forms.pair_arc())?;
        let d = compute_d(&forms, &markov);
        Ok(HermitePadeTriple { forms, markov, d })
    }

    pub fn solve(n: &MultiIndexPair, pair: Arc<SystemPair>) -> Result<Self> {
        Self::new(FormEvaluator::solve(n, pair)?)
    }

    pub fn forms(&self) -> &FormEvaluator {
        &self.forms
    }

    pub fn markov(&self) -> &MatrixMarkovFunction {
        &self.markov
    }

    pub fn d(&self) -> &[Vec<Float>] {
        &self.d
    }

    /// Degree of d_{n,j}, None for the zero polynomial.
    pub fn d_degree(&self, j: usize) -> Option<usize> {
        self.d[j].iter().rposition(|c| !c.is_zero())
    }

    pub fn eval_d(&self, j: usize, z: &Complex) -> Complex {
        horner_complex(&self.d[j], z)
    }

    fn remainder_masses(&self, j: usize) -> Result<Vec<Float>> {
        let prec = self.forms.precision_bits();
        let vals = self.forms.values_on_support(0)?;
        let masses = self.markov.pair().s2().masses(0, j)?;
        Ok(vals
            .iter()
            .zip(masses)
            .map(|(v, w)| Float::with_val(prec, v * w))
            .collect())
    }

    /// R_{n,j}(z) = ∫ A_{n,0}(x) ds²_{0,j}(x)/(z−x).
    pub fn remainder(&self, j: usize, z: &Complex) -> Result<Complex> {
        if j > self.forms.m2() {
            return Err(Error::IndexOutOfRange(format!("remainder index {j}")));
        }
        weighted_cauchy(
            self.markov.pair().base().points(),
            &self.remainder_masses(j)?,
            z,
        )
        .ok_or(Error::NodeCollision)
    }

    /// ∫ 𝕎 (𝔸(z) − 𝔸(x))/(z−x) dσ_0 evaluated directly at z, row j.
    pub fn d_direct(&self, j: usize, z: &Complex) -> Result<Complex> {
        let prec = self.forms.precision_bits();
        let base = self.markov.pair().base();
        let coeffs = &self.forms.solution().coeffs;
        let az: Vec<Complex> = coeffs.iter().map(|c| horner_complex(c, z)).collect();
        let mut acc = Complex::zero(prec);
        for a in 0..base.len() {
            let x = &base.points()[a];
            let dz = z.sub_real(x);
            if dz.re.is_zero() && dz.im.is_zero() {
                return Err(Error::NodeCollision);
            }
            let inv = dz.recip();
            for (k, ck) in coeffs.iter().enumerate() {
                let ax = mp::horner_real(ck, x);
                let dd = az[k].sub_real(&ax) * inv.clone();
                let w = mm_weight(&self.markov, a, j, k, &base.masses()[a]);
                acc = acc + dd.scale(&w);
            }
        }
        Ok(acc)
    }

    /// max_j |(Ŝ𝔸ᵗ)_j − d_j − R_j| / max(|Ŝ𝔸ᵗ|_j, |R_j|) at z.
    pub fn defining_identity_gap(&self, z: &Complex) -> Result<f64> {
        let s = self.markov.s_hat(z)?;
        let coeffs = &self.forms.solution().coeffs;
        let az: Vec<Complex> = coeffs.iter().map(|c| horner_complex(c, z)).collect();
        let mut worst = 0.0f64;
        for (j, row) in s.iter().enumerate() {
            let mut sa = Complex::zero(z.prec());
            for (k, e) in row.iter().enumerate() {
                sa = sa + e.clone() * az[k].clone();
            }
            let r = self.remainder(j, z)?;
            let scale = sa.abs().to_f64().max(r.abs().to_f64());
            let gap = (sa - self.eval_d(j, z) - r).abs().to_f64();
            if scale > 0.0 {
                worst = worst.max(gap / scale);
            }
        }
        Ok(worst)
    }

    /// Relative gap between the stored 𝔻 polynomial and the direct integral at z.
    pub fn d_polynomial_gap(&self, z: &Complex) -> Result<f64> {
        let mut worst = 0.0f64;
        for j in 0..self.d.len() {
            let direct = self.d_direct(j, z)?;
            let poly = self.eval_d(j, z);
            let scale = direct.abs().to_f64().max(poly.abs().to_f64());
            if scale > 0.0 {
                worst = worst.max((direct - poly).abs().to_f64() / scale);
            }
        }
        Ok(worst)
    }

    /// ∫ x^ν A_{n,0} ds²_{0,j} for ν < n_{2,j}, relative to ∫ |x^ν A_{n,0}| d|s²_{0,j}|.
    pub fn order_residuals(&self) -> Result<Vec<Residual>> {
        let prec = self.forms.precision_bits();
        let base = self.markov.pair().base();
        let mut out = Vec::new();
        for j in 0..=self.forms.m2() {
            let eff = self.remainder_masses(j)?;
            let count = self.forms.index().n2()[j];
            let mut sums = vec![mp::zero(prec); count];
            let mut scales = vec![mp::zero(prec); count];
            for (x, w) in base.points().iter().zip(&eff) {
                let mut t = w.clone();
                for nu in 0..count {
                    sums[nu] += &t;
                    scales[nu] += Float::with_val(prec, t.abs_ref());
                    t *= x;
                }
            }
            for (nu, (s, c)) in sums.iter().zip(&scales).enumerate() {
                let value = if c.is_zero() {
                    0.0
                } else {
                    Float::with_val(prec, s / c).abs().to_f64()
                };
                out.push(Residual {
                    relation: "order".into(),
                    j: j as i32,
                    detail: format!("nu={nu}"),
                    value,
                });
            }
        }
        Ok(out)
    }

    /// Fitted decay exponents of |R_{n,j}(t)| for t = 10², 10³, 10⁴, one per j.
    pub fn far_field_slopes(&self) -> Result<Vec<f64>> {
        let prec = self.forms.precision_bits();
        let ts = [1e2, 1e3, 1e4];
        (0..=self.forms.m2())
            .map(|j| {
                let ys = ts
                    .iter()
                    .map(|&t| {
                        Ok(self
                            .remainder(j, &Complex::from_f64(prec, t, 0.0))?
                            .abs()
                            .to_f64())
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(slope(&ts, &ys))
            })
            .collect()
    }

    /// max |R_{n,0}(z) − A_{n,−1}(z)| / |A_{n,−1}(z)| over the points.
    pub fn r0_gap(&self, points: &[Complex]) -> Result<f64> {
        let mut worst = 0.0f64;
        for z in points {
            let r = self.remainder(0, z)?;
            let a = self.forms.eval_form(-1, z)?;
            let scale = a.abs().to_f64();
            let gap = (r - a).abs().to_f64();
            worst = worst.max(if scale > 0.0 { gap / scale } else { gap });
        }
        Ok(worst)
    }
}

fn mm_weight(mm: &MatrixMarkovFunction, a: usize, i: usize, k: usize, mass: &Float) -> Float {
    mm.w(a, i, k) * mass
}

/// Checks that seq[n] has total n and seq[n+1] = seq[n] + e_i for some i, with each entry
/// non-increasing.
pub fn validate_complete_ordered(seq: &[Vec<usize>]) -> Result<()> {
    for (n, v) in seq.iter().enumerate() {
        if v.iter().sum::<usize>() != n {
            return Err(Error::InvalidIndex(format!(
                "sequence entry {n} has total {}",
                v.iter().sum::<usize>()
            )));
        }
        if v.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidIndex(format!(
                "sequence entry {n} is not non-increasing"
            )));
        }
        if n > 0 {
            let prev = &seq[n - 1];
            if prev.len() != v.len() || prev.iter().zip(v).any(|(a, b)| a > b) {
                return Err(Error::InvalidIndex(format!(
                    "sequence entries {} and {n} are not ordered",
                    n - 1
                )));
            }
        }
    }
    Ok(())
}

/// Round-robin sequence of length-`len` vectors for totals 0..=n_max.
pub fn canonical_sequence(len: usize, n_max: usize) -> Vec<Vec<usize>> {
    (0..=n_max).map(|n| staircase(len, n)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BiorthogonalityReport {
    /// g[n'−1][n−1] = ∫ 𝔹_{n'} 𝕎 𝔸ᵗ_n dσ_0.
    pub g: Vec<Vec<f64>>,
    /// |g| relative to ∫ |𝔹_{n'}·𝕎·𝔸ᵗ_n| dσ_0, entry by entry.
    pub relative: Vec<Vec<f64>>,
    pub max_offdiag_over_min_diag: f64,
    pub max_offdiag_relative: f64,
    pub min_diag_abs: f64,
}

impl BiorthogonalityReport {
    pub fn write_csv(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["n_prime", "n", "value", "relative"])?;
        for (a, row) in self.g.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                w.write_record([
                    (a + 1).to_string(),
                    (b + 1).to_string(),
                    format!("{v:e}"),
                    format!("{:e}", self.relative[a][b]),
                ])?;
            }
        }
        w.flush()
    }
}

/// Pairing matrix of 𝔸_n (index (I1[n]; I2[n−1]) for the pair) and 𝔹_{n'} (index
/// (I2[n']; I1[n'−1]) for the swapped pair), 1 ≤ n, n' ≤ N_max.
pub fn biorthogonality_matrix(
    n_max: usize,
    i1: &[Vec<usize>],
    i2: &[Vec<usize>],
    pair: Arc<SystemPair>,
) -> Result<BiorthogonalityReport> {
    if n_max == 0 || i1.len() <= n_max || i2.len() <= n_max {
        return Err(Error::InvalidIndex(format!(
            "sequences must cover totals 0..={n_max}"
        )));
    }
    validate_complete_ordered(i1)?;
    validate_complete_ordered(i2)?;
    if i1[0].len() != pair.m1() + 1 || i2[0].len() != pair.m2() + 1 {
        return Err(Error::InvalidIndex(
            "sequence lengths do not match the systems".into(),
        ));
    }
    let swapped = Arc::new(pair.swapped());
    let prec = pair.precision_bits();
    // both families reduce to their 0-th forms on the base support
    let family = |n: usize,
                  first: &[Vec<usize>],
                  second: &[Vec<usize>],
                  p: &Arc<SystemPair>|
     -> Result<Vec<Float>> {
        let idx = MultiIndexPair::new(first[n].clone(), second[n - 1].clone())?;
        let f = FormEvaluator::solve(&idx, p.clone())?;
        Ok(f.values_on_support(0)?.to_vec())
    };
    let a_vals: Vec<Vec<Float>> = (1..=n_max)
        .into_par_iter()
        .map(|n| family(n, i1, i2, &pair))
        .collect::<Result<_>>()?;
    let b_vals: Vec<Vec<Float>> = (1..=n_max)
        .into_par_iter()
        .map(|n| family(n, i2, i1, &swapped))
        .collect::<Result<_>>()?;
    let masses = pair.base().masses();
    let mut g = vec![vec![0.0; n_max]; n_max];
    let mut relative = vec![vec![0.0; n_max]; n_max];
    for (bp, b) in b_vals.iter().enumerate() {
        for (an, a) in a_vals.iter().enumerate() {
            let mut s = mp::zero(prec);
            let mut c = mp::zero(prec);
            for ((x, y), w) in b.iter().zip(a).zip(masses) {
                let t = Float::with_val(prec, x * y) * w;
                c += Float::with_val(prec, t.abs_ref());
                s += t;
            }
            g[bp][an] = s.to_f64();
            relative[bp][an] = if c.is_zero() {
                0.0
            } else {
                Float::with_val(prec, &s / &c).abs().to_f64()
            };
        }
    }
    let min_diag_abs = (0..n_max)
        .map(|n| g[n][n].abs())
        .fold(f64::INFINITY, f64::min);
    let mut max_off = 0.0f64;
    let mut max_rel = 0.0f64;
    for a in 0..n_max {
        for b in 0..n_max {
            if a != b {
                max_off = max_off.max(g[a][b].abs());
                max_rel = max_rel.max(relative[a][b]);
            }
        }
    }
    Ok(BiorthogonalityReport {
        g,
        relative,
        max_offdiag_over_min_diag: if min_diag_abs > 0.0 {
            max_off / min_diag_abs
        } else {
            f64::INFINITY
        },
        max_offdiag_relative: max_rel,
        min_diag_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::tests::pair;

    fn idx(n1: &[usize], n2: &[usize]) -> MultiIndexPair {
        MultiIndexPair::new(n1.to_vec(), n2.to_vec()).unwrap()
    }

    #[test]
    fn scalar_d_examples() {
        let p = pair(0, 0, 40);
        let t = HermitePadeTriple::solve(&idx(&[1], &[0]), p.clone()).unwrap();
        assert!(t.d_degree(0).is_none());
        let t = HermitePadeTriple::solve(&idx(&[2], &[1]), p.clone()).unwrap();
        let mass = p.base().total_mass().to_f64();
        assert_eq!(t.d_degree(0), Some(0));
        assert!((t.d()[0][0].to_f64() - mass).abs() < 1e-15);
    }

    #[test]
    fn markov_function_and_identities() {
        let p = pair(2, 1, 40);
        let prec = p.precision_bits();
        let mm = MatrixMarkovFunction::new(p.clone()).unwrap();
        assert_eq!((mm.rows(), mm.cols()), (2, 3));
        assert!(mm.rank_one_defect() < 1e-60);
        let t = HermitePadeTriple::solve(&idx(&[3, 2, 2], &[4, 2]), p).unwrap();
        let pts = [
            Complex::from_f64(prec, 3.0, 1.0),
            Complex::from_f64(prec, 0.3, -0.7),
            Complex::from_f64(prec, -5.0, 0.2),
        ];
        for z in &pts {
            assert!(t.defining_identity_gap(z).unwrap() < 1e-60);
            assert!(t.d_polynomial_gap(z).unwrap() < 1e-60);
        }
        assert!(t.r0_gap(&pts).unwrap() < 1e-60);
        for r in t.order_residuals().unwrap() {
            assert!(r.value < 1e-40, "{r:?}");
        }
        let n2 = t.forms().index().n2().to_vec();
        for (j, s) in t.far_field_slopes().unwrap().into_iter().enumerate() {
            assert!(s <= -((n2[j] + 1) as f64) + 0.01, "j={j} slope {s}");
        }
        assert!(t.remainder(2, &pts[0]).is_err());
    }

    #[test]
    fn sequences() {
        let s = canonical_sequence(3, 5);
        validate_complete_ordered(&s).unwrap();
        assert_eq!(s[5], vec![2, 2, 1]);
        assert!(validate_complete_ordered(&[vec![0, 0], vec![0, 1]]).is_err());
        assert!(validate_complete_ordered(&[vec![0, 0], vec![2, 0]]).is_err());
        assert!(validate_complete_ordered(&[vec![0, 0], vec![1, 0], vec![0, 2]]).is_err());
    }

    #[test]
    fn classical_gram_matrix() {
        let p = pair(0, 0, 40);
        let s = canonical_sequence(1, 5);
        let r = biorthogonality_matrix(5, &s, &s, p.clone()).unwrap();
        assert!(r.max_offdiag_over_min_diag < 1e-60);
        // diagonal = ∫ Q_{n-1}², with Q_0 = 1
        assert!((r.g[0][0] - p.base().total_mass().to_f64()).abs() < 1e-15);
        assert!(r.g.iter().enumerate().all(|(n, row)| row[n] > 0.0));
        let one = biorthogonality_matrix(1, &s, &s, p).unwrap();
        assert_eq!(one.g.len(), 1);
        assert!(one.g[0][0] != 0.0);
    }

    #[test]
    fn mixed_biorthogonality() {
        let p = pair(1, 1, 48);
        let r = biorthogonality_matrix(
            6,
            &canonical_sequence(2, 6),
            &canonical_sequence(2, 6),
            p.clone(),
        )
        .unwrap();
        assert!(r.max_offdiag_over_min_diag < 1e-15, "{r:?}");
        assert!(r.min_diag_abs > 0.0);
        let bad = vec![vec![0, 0], vec![0, 1]];
        assert!(biorthogonality_matrix(1, &bad, &canonical_sequence(2, 1), p).is_err());
    }
}
