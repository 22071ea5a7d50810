//! Multi-index pairs (n1; n2), shifts n^l and lattices of decreasing-class indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A shift l = (l1; l2) adding one unit to component l1 of n1 and l2 of n2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shift {
    pub l1: usize,
    pub l2: usize,
}

impl Shift {
    pub fn new(l1: usize, l2: usize) -> Self {
        Shift { l1, l2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawIndex", into = "RawIndex")]
pub struct MultiIndexPair {
    n1: Vec<usize>,
    n2: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    n1: Vec<usize>,
    n2: Vec<usize>,
}

impl TryFrom<RawIndex> for MultiIndexPair {
    type Error = Error;
    fn try_from(r: RawIndex) -> Result<Self> {
        MultiIndexPair::new(r.n1, r.n2)
    }
}

impl From<MultiIndexPair> for RawIndex {
    fn from(n: MultiIndexPair) -> Self {
        RawIndex { n1: n.n1, n2: n.n2 }
    }
}

fn non_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

impl MultiIndexPair {
    /// Requires |n2| + 1 = |n1| and non-increasing components in both vectors.
    pub fn new(n1: Vec<usize>, n2: Vec<usize>) -> Result<Self> {
        if n1.is_empty() || n2.is_empty() {
            return Err(Error::InvalidIndex(
                "both vectors need at least one component".into(),
            ));
        }
        let (s1, s2): (usize, usize) = (n1.iter().sum(), n2.iter().sum());
        if s2 + 1 != s1 {
            return Err(Error::InvalidIndex(format!(
                "|n2| + 1 = {} but |n1| = {s1}",
                s2 + 1
            )));
        }
        if !non_increasing(&n1) || !non_increasing(&n2) {
            return Err(Error::InvalidIndex(format!(
                "{n1:?}; {n2:?} is not in the decreasing class"
            )));
        }
        Ok(MultiIndexPair { n1, n2 })
    }

    pub fn n1(&self) -> &[usize] {
        &self.n1
    }

    pub fn n2(&self) -> &[usize] {
        &self.n2
    }

    pub fn m1(&self) -> usize {
        self.n1.len() - 1
    }

    pub fn m2(&self) -> usize {
        self.n2.len() - 1
    }

    pub fn size1(&self) -> usize {
        self.n1.iter().sum()
    }

    pub fn size2(&self) -> usize {
        self.n2.iter().sum()
    }

    /// N_{1,j} = n_{1,j} + ... + n_{1,m1} (zero past the end).
    pub fn tail1(&self, j: usize) -> usize {
        self.n1.iter().skip(j).sum()
    }

    /// N_{2,j} = n_{2,j} + ... + n_{2,m2}.
    pub fn tail2(&self, j: usize) -> usize {
        self.n2.iter().skip(j).sum()
    }

    /// Number of zeros N_{n,j} of the form A_{n,j} in Δ_j, for j in -m2-1..=m1.
    pub fn zero_count(&self, j: i32) -> usize {
        if j >= 0 {
            self.tail1(j as usize).saturating_sub(1)
        } else if j == -(self.m2() as i32) - 1 {
            0
        } else {
            self.tail2((-j) as usize)
        }
    }

    pub fn form_range(&self) -> std::ops::RangeInclusive<i32> {
        -(self.m2() as i32) - 1..=self.m1() as i32
    }

    /// n^l = (n1 + e_{l1}; n2 + e_{l2}), provided it stays in the decreasing class.
    pub fn shifted(&self, l: Shift) -> Result<MultiIndexPair> {
        if l.l1 > self.m1() || l.l2 > self.m2() {
            return Err(Error::InvalidIndex(format!("shift {l:?} out of range")));
        }
        let mut n1 = self.n1.clone();
        let mut n2 = self.n2.clone();
        n1[l.l1] += 1;
        n2[l.l2] += 1;
        MultiIndexPair::new(n1, n2)
    }

    /// Componentwise sum with an increment pattern.
    pub fn plus(&self, p1: &[usize], p2: &[usize]) -> Result<MultiIndexPair> {
        if p1.len() != self.n1.len() || p2.len() != self.n2.len() {
            return Err(Error::InvalidIndex("increment length mismatch".into()));
        }
        let n1 = self.n1.iter().zip(p1).map(|(a, b)| a + b).collect();
        let n2 = self.n2.iter().zip(p2).map(|(a, b)| a + b).collect();
        MultiIndexPair::new(n1, n2)
    }
}

impl std::fmt::Display for MultiIndexPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let j = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "(({});({}))", j(&self.n1), j(&self.n2))
    }
}

/// Round-robin distribution of `total` units over `len` slots starting at slot 0.
pub fn staircase(len: usize, total: usize) -> Vec<usize> {
    let q = total / len;
    let r = total % len;
    (0..len).map(|i| q + usize::from(i < r)).collect()
}

/// All non-increasing vectors of length `len` summing to `total`.
pub fn non_increasing_vectors(len: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(len: usize, total: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if len == 0 {
            if total == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for v in (0..=cap.min(total)).rev() {
            if v * len < total {
                break;
            }
            cur.push(v);
            rec(len - 1, total - v, v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(len, total, total, &mut Vec::new(), &mut out);
    out
}

/// Every decreasing-class index with 1 <= |n1| <= max_size1.
pub fn decreasing_lattice(m1: usize, m2: usize, max_size1: usize) -> Vec<MultiIndexPair> {
    let mut out = Vec::new();
    for s in 1..=max_size1 {
        for n1 in non_increasing_vectors(m1 + 1, s) {
            for n2 in non_increasing_vectors(m2 + 1, s - 1) {
                out.push(MultiIndexPair { n1: n1.clone(), n2 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constraints() {
        assert!(MultiIndexPair::new(vec![3], vec![2]).is_ok());
        assert!(MultiIndexPair::new(vec![3], vec![3]).is_err());
        assert!(MultiIndexPair::new(vec![1, 2], vec![2]).is_err());
        let n = MultiIndexPair::new(vec![2, 2], vec![3]).unwrap();
        assert_eq!(n.zero_count(1), 1);
        assert_eq!(n.zero_count(0), 3);
        assert_eq!(n.zero_count(-1), 0);
        assert!(n.shifted(Shift::new(1, 0)).is_err());
        assert_eq!(n.shifted(Shift::new(0, 0)).unwrap().n1(), &[3, 2]);
    }

    #[test]
    fn lattice_size() {
        // partitions into at most 3 parts times at most 2 parts, summed over |n1| = 1..10
        assert_eq!(decreasing_lattice(2, 1, 10).len(), 255);
        assert_eq!(decreasing_lattice(0, 0, 10).len(), 10);
    }

    #[test]
    fn staircase_round_robin() {
        assert_eq!(staircase(3, 7), vec![3, 2, 2]);
        assert_eq!(staircase(2, 0), vec![0, 0]);
    }

    proptest! {
        #[test]
        fn counts_agree_at_zero(m1 in 0usize..3, m2 in 0usize..3, s in 1usize..12) {
            for n in decreasing_lattice(m1, m2, s).into_iter().filter(|n| n.size1() == s) {
                // N_{1,0} - 1 = |n2| = N_{2,0}
                prop_assert_eq!(n.zero_count(0), n.tail2(0));
                prop_assert_eq!(n.zero_count(-(m2 as i32) - 1), 0);
            }
        }

        #[test]
        fn staircase_is_non_increasing(len in 1usize..6, total in 0usize..40) {
            let v = staircase(len, total);
            prop_assert!(non_increasing(&v));
            prop_assert_eq!(v.iter().sum::<usize>(), total);
            prop_assert!(v[0] - v[len - 1] <= 1);
        }
    }
}
