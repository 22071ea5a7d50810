//! Structural checks on concrete solutions: zero counts, interlacing, sign tables, attraction.

use std::sync::Arc;

use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{MultiIndexPair, Shift};
use crate::mop::{FormEvaluator, SystemPair};
use crate::zeros::zero_tolerance;

fn strictly_increasing(v: &[Float]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// True iff the merged order of the two sorted sets alternates between them.
pub fn check_interlacing(zs1: &[Float], zs2: &[Float]) -> Result<bool> {
    if !strictly_increasing(zs1) || !strictly_increasing(zs2) {
        return Err(Error::InvalidInput(
            "zero sets must be strictly increasing".into(),
        ));
    }
    Ok(matches!(alternation(zs1, zs2, None), Alternation::Yes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Interlaced,
    NotInterlaced,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterlacingReport {
    pub j: i32,
    pub zeros_n: Vec<f64>,
    pub zeros_nl: Vec<f64>,
    pub verdict: Verdict,
    pub interlaced: bool,
    pub first_violation: Option<usize>,
}

enum Alternation {
    Yes,
    No(usize),
    Tie(usize),
}

fn alternation(zs1: &[Float], zs2: &[Float], tie_tol: Option<&Float>) -> Alternation {
    if zs1.len().abs_diff(zs2.len()) > 1 {
        return Alternation::No(0);
    }
    let mut merged: Vec<(&Float, u8)> = zs1
        .iter()
        .map(|x| (x, 0))
        .chain(zs2.iter().map(|x| (x, 1)))
        .collect();
    merged.sort_by(|a, b| a.0.partial_cmp(b.0).unwrap());
    for i in 1..merged.len() {
        if let Some(tol) = tie_tol {
            let gap = Float::with_val(tol.prec(), merged[i].0 - merged[i - 1].0).abs();
            let scale = Float::with_val(tol.prec(), merged[i].0.abs_ref())
                .max(&Float::with_val(tol.prec(), 1));
            if gap <= Float::with_val(tol.prec(), tol * &scale) {
                return Alternation::Tie(i - 1);
            }
        }
        if merged[i].1 == merged[i - 1].1 {
            return Alternation::No(i - 1);
        }
    }
    if let (Some(first), Some(last)) = (merged.first(), merged.last()) {
        // with unequal sizes the larger set must own both ends
        if zs1.len() != zs2.len() {
            let big = if zs1.len() > zs2.len() { 0 } else { 1 };
            if first.1 != big || last.1 != big {
                return Alternation::No(0);
            }
        }
    }
    Alternation::Yes
}

/// Interlacing of the zeros of A_{n,j} and A_{n^l,j}. Near-coincident zeros (within ten times
/// the refinement tolerance) give an indeterminate verdict.
pub fn interlacing_report(j: i32, zs_n: &[Float], zs_nl: &[Float], prec: u32) -> InterlacingReport {
    let tol = zero_tolerance(prec) * 10u32;
    let (verdict, first_violation) = match alternation(zs_n, zs_nl, Some(&tol)) {
        Alternation::Yes => (Verdict::Interlaced, None),
        Alternation::No(i) => (Verdict::NotInterlaced, Some(i)),
        Alternation::Tie(i) => (Verdict::Indeterminate, Some(i)),
    };
    InterlacingReport {
        j,
        zeros_n: zs_n.iter().map(|x| x.to_f64()).collect(),
        zeros_nl: zs_nl.iter().map(|x| x.to_f64()).collect(),
        verdict,
        interlaced: verdict == Verdict::Interlaced,
        first_violation,
    }
}

/// Reports for every j in -m2..=m1 comparing n with n^l. Pairs with n_{1,m1} < 2 are outside the
/// theorem's hypothesis and return `None`.
pub fn interlacing_for_shift(
    f_n: &FormEvaluator,
    f_nl: &FormEvaluator,
) -> Result<Option<Vec<InterlacingReport>>> {
    let n = f_n.index();
    if n.n1()[n.m1()] < 2 {
        return Ok(None);
    }
    let prec = f_n.precision_bits();
    let mut out = Vec::new();
    for j in -(n.m2() as i32)..=n.m1() as i32 {
        out.push(interlacing_report(
            j,
            f_n.extract_q(j)?,
            f_nl.extract_q(j)?,
            prec,
        ));
    }
    Ok(Some(out))
}

/// Δ_{j,l} for j = -m2..=m1 from the relative positions δ_j of consecutive intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignTable {
    pub m1: usize,
    pub m2: usize,
    /// δ_j for j = -m2..m1-1.
    pub layout: Vec<i32>,
    pub l: Shift,
    /// Δ_{j,l} for j = -m2..=m1.
    pub values: Vec<i32>,
}

impl SignTable {
    pub fn new(m1: usize, m2: usize, layout: Vec<i32>, l: Shift) -> Result<Self> {
        if layout.len() != m1 + m2 || layout.iter().any(|d| d.abs() != 1) {
            return Err(Error::InvalidInput(format!(
                "layout needs {} entries of ±1",
                m1 + m2
            )));
        }
        if l.l1 > m1 || l.l2 > m2 {
            return Err(Error::InvalidInput(format!("shift {l:?} out of range")));
        }
        let lo = -(m2 as i32);
        let delta = |j: i32| layout[(j - lo) as usize];
        let (l1, l2) = (l.l1 as i32, l.l2 as i32);
        let values = (lo..=m1 as i32)
            .map(|j| {
                if l1 + l2 == 0 {
                    match j {
                        1 => delta(0),
                        -1 => -delta(-1),
                        _ => 1,
                    }
                } else if j >= l1 + 2 || j <= -l2 - 2 {
                    1
                } else if j == l1 || j == l1 + 1 {
                    delta(j - 1)
                } else if j == -l2 - 1 || j == -l2 {
                    -delta(j)
                } else {
                    // -l2+1..=l1-1, reachable only when l1 + l2 >= 2
                    -delta(j - 1) * delta(j)
                }
            })
            .collect();
        Ok(SignTable {
            m1,
            m2,
            layout,
            l,
            values,
        })
    }

    pub fn value(&self, j: i32) -> i32 {
        self.values[(j + self.m2 as i32) as usize]
    }
}

/// ε_{n^l,j}/ε_{n,j} predicted as the product of Δ_{k,l} over k = j..=m1.
pub fn epsilon_ratio(table: &SignTable, j: i32) -> i32 {
    (j..=table.m1 as i32).map(|k| table.value(k)).product()
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroCount {
    pub j: i32,
    pub found: usize,
    pub expected: usize,
    pub interior: bool,
    pub max_per_gap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroCountReport {
    pub index: String,
    pub counts: Vec<ZeroCount>,
    pub ok: bool,
}

/// Gaps of Δ_j ∖ supp σ_j as open intervals (finite support outside the interval).
fn support_gaps(f: &FormEvaluator, j: i32) -> Result<Vec<(f64, f64)>> {
    let g = f.pair().measure(j)?;
    let iv = g.interval();
    let mut pts: Vec<(f64, f64)> = vec![(iv.a, iv.b)];
    pts.extend(g.atoms().map(|(x, _)| (x.to_f64(), x.to_f64())));
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pts.windows(2).map(|w| (w[0].1, w[1].0)).collect())
}

/// Compares extracted zero counts with N_{n,j} for every form.
pub fn check_zero_counts(f: &FormEvaluator) -> Result<ZeroCountReport> {
    let n = f.index();
    let mut counts = Vec::new();
    for j in n.form_range() {
        let zs = f.extract_q(j)?;
        let expected = n.zero_count(j);
        let (interior, max_per_gap) = if j < -(n.m2() as i32) {
            (zs.is_empty(), 0)
        } else {
            let hull = f.pair().delta(j)?;
            let interior = strictly_increasing(zs)
                && zs
                    .iter()
                    .all(|z| hull.a < z.to_f64() && z.to_f64() < hull.b);
            let gaps = support_gaps(f, j)?;
            let max_per_gap = gaps
                .iter()
                .map(|&(a, b)| {
                    zs.iter()
                        .filter(|z| a <= z.to_f64() && z.to_f64() <= b)
                        .count()
                })
                .max()
                .unwrap_or(0);
            (interior, max_per_gap)
        };
        counts.push(ZeroCount {
            j,
            found: zs.len(),
            expected,
            interior,
            max_per_gap,
        });
    }
    let ok = counts
        .iter()
        .all(|c| c.found == c.expected && c.interior && c.max_per_gap <= 1);
    Ok(ZeroCountReport {
        index: n.to_string(),
        counts,
        ok,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractionPoint {
    pub size1: usize,
    pub distance: f64,
}

/// Distance from the single atom of σ_j to the nearest zero of Q_{n,j} along the samples.
pub fn mass_point_attraction(
    pair: Arc<SystemPair>,
    j: i32,
    samples: &[MultiIndexPair],
) -> Result<Vec<AttractionPoint>> {
    let total_atoms: usize = (-(pair.m2() as i32)..=pair.m1() as i32)
        .map(|k| pair.measure(k).map(|g| g.atoms().count()))
        .sum::<Result<usize>>()?;
    let g = pair.measure(j)?;
    let atoms: Vec<Float> = g.atoms().map(|(x, _)| x.clone()).collect();
    if atoms.len() != 1 || total_atoms != 1 {
        return Err(Error::InvalidInput(
            "mass-point attraction needs exactly one atom, carried by σ_j".into(),
        ));
    }
    let atom = &atoms[0];
    samples
        .par_iter()
        .map(|n| {
            let f = FormEvaluator::solve(n, pair.clone())?;
            let zs = f.extract_q(j)?;
            let d = zs
                .iter()
                .map(|z| Float::with_val(z.prec(), z - atom).abs().to_f64())
                .fold(f64::INFINITY, f64::min);
            Ok(AttractionPoint {
                size1: n.size1(),
                distance: d,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::real;

    fn v(xs: &[f64]) -> Vec<Float> {
        xs.iter().map(|&x| real(128, x)).collect()
    }

    #[test]
    fn interlacing_examples() {
        assert!(check_interlacing(&v(&[-0.5, 0.5]), &v(&[-0.7, 0.0, 0.7])).unwrap());
        assert!(!check_interlacing(&v(&[0.0, 1.0]), &v(&[2.0, 3.0])).unwrap());
        assert!(check_interlacing(&v(&[1.0, 0.0]), &v(&[2.0])).is_err());
        assert!(check_interlacing(&v(&[0.0, 2.0]), &v(&[1.0, 3.0])).unwrap());
        assert!(!check_interlacing(&v(&[0.0]), &v(&[1.0, 2.0])).unwrap());
        let r = interlacing_report(0, &v(&[0.0, 1.0]), &v(&[0.5, 1.0]), 128);
        assert_eq!(r.verdict, Verdict::Indeterminate);
    }

    /// Δ_{j,l} from the degree bookkeeping of Q_{n,j±1} versus Q_{n^l,j±1}.
    fn derived(m1: usize, m2: usize, layout: &[i32], l: Shift, j: i32) -> i32 {
        let lo = -(m2 as i32);
        let d = |k: i32| layout[(k - lo) as usize];
        let inside = |k: i32| -(l.l2 as i32) <= k && k <= l.l1 as i32;
        let mut s = 1;
        if j - 1 >= lo && inside(j - 1) {
            s *= d(j - 1);
        }
        if j + 1 <= m1 as i32 && inside(j + 1) {
            s *= -d(j);
        }
        s
    }

    #[test]
    fn tables_match_degree_bookkeeping() {
        for m1 in 0..4usize {
            for m2 in 0..4usize {
                for bits in 0..(1u32 << (m1 + m2)) {
                    let layout: Vec<i32> = (0..m1 + m2)
                        .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
                        .collect();
                    for l1 in 0..=m1 {
                        for l2 in 0..=m2 {
                            let l = Shift::new(l1, l2);
                            let t = SignTable::new(m1, m2, layout.clone(), l).unwrap();
                            for j in -(m2 as i32)..=m1 as i32 {
                                assert_eq!(
                                    t.value(j),
                                    derived(m1, m2, &layout, l, j),
                                    "{m1} {m2} {layout:?} {l:?} {j}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn epsilon_ratio_examples() {
        // j = m1 with l1 = m1 gives δ_{m1-1}
        let t = SignTable::new(2, 1, vec![1, -1, 1], Shift::new(2, 0)).unwrap();
        assert_eq!(epsilon_ratio(&t, 2), t.layout[(2 - 1 + 1) as usize]);
        let t = SignTable::new(3, 0, vec![1, -1, 1], Shift::new(0, 0)).unwrap();
        assert_eq!(epsilon_ratio(&t, 2), 1);
    }
}
