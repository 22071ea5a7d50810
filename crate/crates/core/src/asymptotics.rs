//! Index rays and convergence harnesses for nth-root, ratio and period asymptotics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rug::Float;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{epsilon_ratio, SignTable};
use crate::equilibrium::{EquilibriumSolution, C64};
use crate::error::{Error, Result};
use crate::index::{non_increasing_vectors, staircase, MultiIndexPair, Shift};
use crate::measures::Interval;
use crate::mop::{compute_varying_data, FormEvaluator, SystemPair};
use crate::mp::{self, horner_complex, Complex};

pub fn to_c64(z: &Complex) -> C64 {
    let (re, im) = z.to_f64();
    C64::new(re, im)
}

pub fn to_mp(prec: u32, z: C64) -> Complex {
    Complex::from_f64(prec, z.re, z.im)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// m = lcm(m1 + 1, m2 + 1), the number of single steps in one period.
pub fn period(m1: usize, m2: usize) -> usize {
    (m1 + 1) / gcd(m1 + 1, m2 + 1) * (m2 + 1)
}

/// The index (staircase(m1+1, s); staircase(m2+1, s-1)).
pub fn staircase_index(m1: usize, m2: usize, s: usize) -> Result<MultiIndexPair> {
    if s == 0 {
        return Err(Error::InvalidIndex("|n1| must be positive".into()));
    }
    MultiIndexPair::new(staircase(m1 + 1, s), staircase(m2 + 1, s - 1))
}

/// Equal-ratio ray n, n + p, n + 2p, ... with p = (d1, ..., d1; d2, ..., d2), d_i = m/(m_i+1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexRay {
    pub p1: Vec<usize>,
    pub p2: Vec<usize>,
    pub samples: Vec<MultiIndexPair>,
}

impl IndexRay {
    pub fn equal_ratio(m1: usize, m2: usize, start: usize, count: usize) -> Result<Self> {
        let m = period(m1, m2);
        let p1 = vec![m / (m1 + 1); m1 + 1];
        let p2 = vec![m / (m2 + 1); m2 + 1];
        let base = staircase_index(m1, m2, start)?;
        let mut samples = vec![base];
        for _ in 1..count {
            let next = samples.last().unwrap().plus(&p1, &p2)?;
            samples.push(next);
        }
        Ok(IndexRay { p1, p2, samples })
    }

    /// Ray of bases n for which n^l stays in the decreasing class, at sizes start + k m.
    pub fn for_shift(m1: usize, m2: usize, l: Shift, start: usize, count: usize) -> Result<Self> {
        let m = period(m1, m2);
        let samples = (0..count)
            .map(|k| shift_base(m1, m2, l, start + k * m))
            .collect::<Result<_>>()?;
        Ok(IndexRay {
            p1: vec![m / (m1 + 1); m1 + 1],
            p2: vec![m / (m2 + 1); m2 + 1],
            samples,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.samples.iter().map(|n| n.size1()).collect()
    }

    /// Largest values along the ray of (m1+1) n_{1,0} - |n1| and (m2+1) n_{2,0} - |n2|.
    pub fn sup_conditions(&self) -> (usize, usize) {
        self.samples.iter().fold((0, 0), |(a, b), n| {
            let c1 = (n.m1() + 1) * n.n1()[0] - n.size1();
            let c2 = (n.m2() + 1) * n.n2()[0] - n.size2();
            (a.max(c1), b.max(c2))
        })
    }
}

fn balanced_for_shift(len: usize, total: usize, l: usize) -> Option<Vec<usize>> {
    non_increasing_vectors(len, total)
        .into_iter()
        .filter(|v| v[0] - v[len - 1] <= 2 && (l == 0 || v[l - 1] > v[l]))
        .min_by_key(|v| v[0] - v[len - 1])
}

/// Most balanced index of size `size1` whose shift by `l` stays in the decreasing class.
pub fn shift_base(m1: usize, m2: usize, l: Shift, size1: usize) -> Result<MultiIndexPair> {
    if size1 == 0 || l.l1 > m1 || l.l2 > m2 {
        return Err(Error::InvalidIndex(format!(
            "no base for shift {l:?} at size {size1}"
        )));
    }
    let n1 = balanced_for_shift(m1 + 1, size1, l.l1);
    let n2 = balanced_for_shift(m2 + 1, size1 - 1, l.l2);
    match (n1, n2) {
        (Some(a), Some(b)) => MultiIndexPair::new(a, b),
        _ => Err(Error::InvalidIndex(format!(
            "no base for shift {l:?} at size {size1}"
        ))),
    }
}

/// Deterministic test points: real points beyond the supports, a conjugate pair on the
/// vertical through the middle, and one generic complex point.
pub fn standard_points(lo: f64, hi: f64) -> Vec<C64> {
    let mid = 0.5 * (lo + hi);
    vec![
        C64::new(hi + 1.0, 0.0),
        C64::new(lo - 1.0, 0.0),
        C64::new(mid, 2.0),
        C64::new(mid, -2.0),
        C64::new(mid + 0.7, 1.3),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub id: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub size1: usize,
    pub point_id: usize,
    pub re: f64,
    pub im: f64,
    pub target_re: Option<f64>,
    pub target_im: Option<f64>,
    pub abs_error: Option<f64>,
}

/// Values along a ray at fixed test points, with optional targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub label: String,
    pub points: Vec<TestPoint>,
    pub rows: Vec<RecordRow>,
}

impl ConvergenceRecord {
    fn new(label: &str, points: &[C64]) -> Self {
        let points = points
            .iter()
            .enumerate()
            .map(|(id, z)| TestPoint {
                id,
                re: z.re,
                im: z.im,
            })
            .collect();
        ConvergenceRecord {
            label: label.into(),
            points,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, size1: usize, point_id: usize, value: C64, target: Option<C64>) {
        self.rows.push(RecordRow {
            size1,
            point_id,
            re: value.re,
            im: value.im,
            target_re: target.map(|t| t.re),
            target_im: target.map(|t| t.im),
            abs_error: target.map(|t| (value - t).norm()),
        });
    }

    pub fn values(&self, point_id: usize) -> Vec<(usize, C64)> {
        self.rows
            .iter()
            .filter(|r| r.point_id == point_id)
            .map(|r| (r.size1, C64::new(r.re, r.im)))
            .collect()
    }

    pub fn errors(&self, point_id: usize) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.point_id == point_id)
            .filter_map(|r| r.abs_error.map(|e| (r.size1, e)))
            .collect()
    }

    /// Error at the last sample is below the error at the first, at every point.
    pub fn error_decreases(&self) -> bool {
        self.points.iter().all(|p| {
            let e = self.errors(p.id);
            e.len() >= 2 && e.last().unwrap().1 < e[0].1
        })
    }

    pub fn final_max_error(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| self.errors(p.id).last().map(|e| e.1))
            .fold(0.0, f64::max)
    }

    /// sup over points of |v_{s+1} - v_s|, one entry per consecutive pair of samples.
    pub fn cauchy_metric(&self) -> Vec<f64> {
        let series: Vec<Vec<C64>> = self
            .points
            .iter()
            .map(|p| self.values(p.id).into_iter().map(|v| v.1).collect())
            .collect();
        let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
        (1..len)
            .map(|s| {
                series
                    .iter()
                    .map(|v| (v[s] - v[s - 1]).norm())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// One two-column file per point: |n1| against the error, or |value| when there is no target.
    pub fn write_plots(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for p in &self.points {
            let mut f = std::fs::File::create(dir.join(format!("{}_p{}.dat", self.label, p.id)))?;
            writeln!(f, "# {} at z = {} {:+}i", self.label, p.re, p.im)?;
            for r in self.rows.iter().filter(|r| r.point_id == p.id) {
                let y = r.abs_error.unwrap_or_else(|| C64::new(r.re, r.im).norm());
                writeln!(f, "{} {:.17e}", r.size1, y)?;
            }
        }
        Ok(())
    }
}

fn solve_all(pair: &Arc<SystemPair>, indices: &[MultiIndexPair]) -> Result<Vec<FormEvaluator>> {
    indices
        .par_iter()
        .map(|n| FormEvaluator::solve(n, pair.clone()))
        .collect()
}

fn nth_root(v: &Complex, size1: usize) -> Result<f64> {
    let a = v.abs();
    if a.is_zero() {
        return Err(Error::ExcludedPoint("form vanishes at a test point".into()));
    }
    Ok((a.ln() / size1 as u32).exp().to_f64())
}

/// |A_{n,j}(z)|^{1/|n1|} along the samples against G_j(z).
pub fn nth_root_harness(
    pair: &Arc<SystemPair>,
    samples: &[MultiIndexPair],
    sol: &EquilibriumSolution,
    j: i32,
    points: &[C64],
) -> Result<ConvergenceRecord> {
    let targets: Vec<f64> = points.iter().map(|&z| sol.g(j, z)).collect::<Result<_>>()?;
    let evals = solve_all(pair, samples)?;
    let prec = pair.precision_bits();
    let mut rec = ConvergenceRecord::new(&format!("nth_root_j{j}"), points);
    for f in &evals {
        for (id, &z) in points.iter().enumerate() {
            let v = nth_root(&f.eval_form(j, &to_mp(prec, z))?, f.index().size1())?;
            rec.push(
                f.index().size1(),
                id,
                C64::new(v, 0.0),
                Some(C64::new(targets[id], 0.0)),
            );
        }
    }
    Ok(rec)
}

/// |a_{n,j}(z)|^{1/|n1|} against exp(-ζ_j(z)).
///
/// Returns the record and, per point, whether it lies clearly inside a dominance region
/// (limit asserted) or not (only the upper bound applies).
pub fn coefficient_polynomial_harness(
    pair: &Arc<SystemPair>,
    samples: &[MultiIndexPair],
    sol: &EquilibriumSolution,
    j: usize,
    points: &[C64],
    margin: f64,
) -> Result<(ConvergenceRecord, Vec<bool>)> {
    let m1 = sol.m1() as i32;
    let mut targets = Vec::new();
    let mut dominated = Vec::new();
    for &z in points {
        targets.push((-sol.zeta(j, z)?).exp());
        dominated.push(sol.dominant(j as i32..=m1, z, margin)?.is_some());
    }
    let evals = solve_all(pair, samples)?;
    let prec = pair.precision_bits();
    let mut rec = ConvergenceRecord::new(&format!("coefficient_j{j}"), points);
    for f in &evals {
        for (id, &z) in points.iter().enumerate() {
            let a = horner_complex(&f.solution().coeffs[j], &to_mp(prec, z));
            let v = nth_root(&a, f.index().size1())?;
            rec.push(
                f.index().size1(),
                id,
                C64::new(v, 0.0),
                Some(C64::new(targets[id], 0.0)),
            );
        }
    }
    Ok((rec, dominated))
}

/// Forms for n and n^l.
#[derive(Debug)]
pub struct ShiftedPair {
    pub l: Shift,
    pub n: FormEvaluator,
    pub nl: FormEvaluator,
}

impl ShiftedPair {
    pub fn solve(n: &MultiIndexPair, l: Shift, pair: Arc<SystemPair>) -> Result<Self> {
        let nl = n.shifted(l)?;
        Ok(ShiftedPair {
            l,
            n: FormEvaluator::solve(n, pair.clone())?,
            nl: FormEvaluator::solve(&nl, pair)?,
        })
    }

    pub fn size1(&self) -> usize {
        self.n.index().size1()
    }

    /// Q_{n^l,j}(z) / Q_{n,j}(z).
    pub fn q_ratio(&self, j: i32, z: C64) -> Result<C64> {
        let zz = to_mp(self.n.precision_bits(), z);
        let den = self.n.q_eval(j, &zz)?;
        if den.abs().is_zero() {
            return Err(Error::ExcludedPoint(format!(
                "{z} is a zero of Q_{{n,{j}}}"
            )));
        }
        Ok(to_c64(&(self.nl.q_eval(j, &zz)? / den)))
    }

    /// A_{n^l,j}(z) / A_{n,j}(z).
    pub fn form_ratio(&self, j: i32, z: C64) -> Result<C64> {
        let zz = to_mp(self.n.precision_bits(), z);
        let den = self.n.eval_form(j, &zz)?;
        if den.abs().is_zero() {
            return Err(Error::ExcludedPoint(format!(
                "{z} is a zero of A_{{n,{j}}}"
            )));
        }
        Ok(to_c64(&(self.nl.eval_form(j, &zz)? / den)))
    }

    /// True when deg Q_{n^l,j} = deg Q_{n,j} + 1, i.e. -l2 <= j <= l1.
    pub fn has_pole_at_infinity(&self, j: i32) -> bool {
        -(self.l.l2 as i32) <= j && j <= self.l.l1 as i32
    }

    /// Ratios κ_{n^l,j} / κ_{n,j} for j = -m2..=m1.
    pub fn kappa_ratios(&self) -> Result<Vec<f64>> {
        let a = compute_varying_data(&self.n)?;
        let b = compute_varying_data(&self.nl)?;
        Ok(a.range()
            .map(|j| Float::with_val(a.kappa(j).prec(), b.kappa(j) / a.kappa(j)).to_f64())
            .collect())
    }
}

/// Observed ε_{n^l,j}/ε_{n,j} next to the sign-table prediction, for j = -m2..=m1.
pub fn epsilon_law(s: &ShiftedPair) -> Result<Vec<(i32, i32, i32)>> {
    let pair = s.n.pair();
    let table = SignTable::new(pair.m1(), pair.m2(), pair.layout(), s.l)?;
    let a = compute_varying_data(&s.n)?;
    let b = compute_varying_data(&s.nl)?;
    Ok(a.range()
        .map(|j| (j, a.epsilon(j) * b.epsilon(j), epsilon_ratio(&table, j)))
        .collect())
}

/// Max relative gap in K_{n,j} = κ_{n,j} ⋯ κ_{n,m1} over j.
pub fn k_product_gap(f: &FormEvaluator) -> Result<f64> {
    let d = compute_varying_data(f)?;
    let prec = f.precision_bits();
    let mut worst = 0.0f64;
    for j in d.range() {
        let mut prod = mp::one(prec);
        for k in j..=f.m1() as i32 {
            prod *= d.kappa(k);
        }
        let gap = Float::with_val(prec, &prod - d.big_k(j)).abs() / d.big_k(j);
        worst = worst.max(gap.to_f64());
    }
    Ok(worst)
}

/// Q_{n^l,j} / Q_{n,j} along the bases, against an optional closed-form limit.
pub struct RatioRun {
    pub record: ConvergenceRecord,
    pub cauchy: Vec<f64>,
    pub samples: Vec<ShiftedPair>,
}

pub fn ratio_harness(
    pair: &Arc<SystemPair>,
    bases: &[MultiIndexPair],
    l: Shift,
    j: i32,
    points: &[C64],
    target: Option<&dyn Fn(C64) -> C64>,
) -> Result<RatioRun> {
    let samples: Vec<ShiftedPair> = bases
        .par_iter()
        .map(|n| ShiftedPair::solve(n, l, pair.clone()))
        .collect::<Result<_>>()?;
    let mut record = ConvergenceRecord::new(&format!("ratio_j{j}_l{}_{}", l.l1, l.l2), points);
    for s in &samples {
        for (id, &z) in points.iter().enumerate() {
            record.push(s.size1(), id, s.q_ratio(j, z)?, target.map(|t| t(z)));
        }
    }
    let cauchy = record.cauchy_metric();
    Ok(RatioRun {
        record,
        cauchy,
        samples,
    })
}

/// Limit of Q_{n+1}/Q_n for a measure whose support is [a, b]: (b - a)/4 times the exterior
/// Joukowski map of [a, b] onto the unit disc complement.
pub fn joukowski_ratio(z: C64, a: f64, b: f64) -> C64 {
    let t = (z * 2.0 - C64::new(a + b, 0.0)) / (b - a);
    let one = C64::new(1.0, 0.0);
    (t + (t - one).sqrt() * (t + one).sqrt()) * ((b - a) / 4.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Radius of the sampling circle in the Joukowski variable.
    pub rho: f64,
    pub fft_len: usize,
    /// Laurent terms kept, w^1 down to w^{-terms}.
    pub terms: usize,
    pub grid: usize,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        BoundaryOptions {
            rho: 1.5,
            fft_len: 128,
            terms: 10,
            grid: 41,
        }
    }
}

/// Boundary values on (a, b) from the upper side of a function analytic off [a, b].
///
/// Samples on the ellipse image of |w| = rho under z = c + r (w + 1/w)/2, takes the Laurent
/// coefficients in w by FFT and sums the truncated series on |w| = 1. Returns (x, value) at
/// `grid` interior points x = c + r cos θ, θ in [0.1π, 0.9π].
pub fn boundary_values<F>(f: F, iv: Interval, opts: &BoundaryOptions) -> Result<Vec<(f64, C64)>>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    let c = iv.midpoint();
    let r = iv.length() / 2.0;
    let n = opts.fft_len;
    let tau = std::f64::consts::TAU;
    let w_at = |k: usize| C64::from_polar(opts.rho, tau * k as f64 / n as f64);
    let mut buf: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let w = w_at(k);
            f(C64::new(c, 0.0) + (w + w.inv()) * (r / 2.0))
        })
        .collect::<Result<_>>()?;
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // buf[k] / n = c_k rho^k for k >= 0, buf[n - k] / n = c_{-k} rho^{-k}
    let coeff = |k: i64| -> C64 {
        let idx = k.rem_euclid(n as i64) as usize;
        buf[idx] / n as f64 / opts.rho.powi(k as i32)
    };
    let ks: Vec<i64> = (-(opts.terms as i64)..=1).collect();
    let cs: Vec<C64> = ks.iter().map(|&k| coeff(k)).collect();
    let out = (0..opts.grid)
        .map(|g| {
            let th = std::f64::consts::PI * (0.1 + 0.8 * g as f64 / (opts.grid - 1).max(1) as f64);
            let w = C64::from_polar(1.0, th);
            let v = ks
                .iter()
                .zip(&cs)
                .map(|(&k, &ck)| ck * w.powi(k as i32))
                .sum();
            (c + r * th.cos(), v)
        })
        .collect();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProduct {
    pub j: i32,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub min_abs_f: f64,
    pub mean: f64,
    pub cv: f64,
}

/// |F̂_j(x)|² / |F̂_{j-1}(x) F̂_{j+1}(x)| on interior points of Δ_j, where F̂ are the ratios
/// Q_{n^l,k} / Q_{n,k} of one sample (F̂ ≡ 1 outside -m2..=m1).
pub fn boundary_product(
    s: &ShiftedPair,
    j: i32,
    opts: &BoundaryOptions,
) -> Result<BoundaryProduct> {
    let iv = s.n.pair().delta(j)?;
    let bv = boundary_values(|z| s.q_ratio(j, z), iv, opts)?;
    let (m1, m2) = (s.n.m1() as i32, s.n.m2() as i32);
    let side = |k: i32, x: f64| -> Result<f64> {
        if k < -m2 || k > m1 {
            Ok(1.0)
        } else {
            Ok(s.q_ratio(k, C64::new(x, 0.0))?.norm())
        }
    };
    let mut xs = Vec::new();
    let mut values = Vec::new();
    let mut min_abs_f = f64::INFINITY;
    for (x, f) in bv {
        min_abs_f = min_abs_f.min(f.norm());
        xs.push(x);
        values.push(f.norm_sqr() / (side(j - 1, x)? * side(j + 1, x)?));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    Ok(BoundaryProduct {
        j,
        xs,
        values,
        min_abs_f,
        mean,
        cv: var.sqrt() / mean,
    })
}

pub struct PeriodRun {
    pub record: ConvergenceRecord,
    pub cauchy: Vec<f64>,
    /// Worst relative gap between the full-period ratio and the product of single steps.
    pub telescoping: f64,
}

/// Full-period ratios A_{n+p,j} / A_{n,j} for n = staircase_index(s) at the given sizes,
/// checked against the product over the m single steps n(r) = staircase_index(s + r).
pub fn periodic_product_harness(
    pair: &Arc<SystemPair>,
    sizes: &[usize],
    j: i32,
    points: &[C64],
) -> Result<PeriodRun> {
    let (m1, m2) = (pair.m1(), pair.m2());
    let m = period(m1, m2);
    let mut needed = BTreeMap::new();
    for &s in sizes {
        for r in 0..=m {
            needed
                .entry(s + r)
                .or_insert(staircase_index(m1, m2, s + r)?);
        }
    }
    let keys: Vec<usize> = needed.keys().cloned().collect();
    let idx: Vec<MultiIndexPair> = needed.into_values().collect();
    let evals: BTreeMap<usize, FormEvaluator> =
        keys.into_iter().zip(solve_all(pair, &idx)?).collect();
    let prec = pair.precision_bits();
    let mut record = ConvergenceRecord::new(&format!("period_j{j}"), points);
    let mut telescoping = 0.0f64;
    for &s in sizes {
        for (id, &z) in points.iter().enumerate() {
            let zz = to_mp(prec, z);
            let vals: Vec<Complex> = (0..=m)
                .map(|r| evals[&(s + r)].eval_form(j, &zz))
                .collect::<Result<_>>()?;
            let full = vals[m].clone() / vals[0].clone();
            let mut prod = Complex::one(prec);
            for r in 0..m {
                prod = prod * (vals[r + 1].clone() / vals[r].clone());
            }
            let gap = Float::with_val(prec, (full.clone() - prod).abs() / full.abs()).to_f64();
            telescoping = telescoping.max(gap);
            record.push(s, id, to_c64(&full), None);
        }
    }
    let cauchy = record.cauchy_metric();
    Ok(PeriodRun {
        record,
        cauchy,
        telescoping,
    })
}
