//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use nikishin_core::{NikishinSystem, SystemPair, WeightFamily, WeightSpec};

/// Chebyshev base on [-1, 1] with σ¹_1 on [2, 3] and σ²_1 on [-3, -2] as requested by m1, m2 <= 1.
pub fn pair(m1: usize, m2: usize, nodes: usize, prec: u32) -> Arc<SystemPair> {
    let base = WeightSpec::new(WeightFamily::Chebyshev2, -1.0, 1.0).unwrap();
    let mut s1 = vec![base.clone()];
    let mut s2 = vec![base];
    if m1 > 0 {
        s1.push(WeightSpec::new(WeightFamily::Chebyshev1, 2.0, 3.0).unwrap());
    }
    if m2 > 0 {
        s2.push(WeightSpec::new(WeightFamily::Legendre, -3.0, -2.0).unwrap());
    }
    let s1 = NikishinSystem::from_specs(&s1, nodes, prec).unwrap();
    let s2 = NikishinSystem::from_specs(&s2, nodes, prec).unwrap();
    Arc::new(SystemPair::new(s1, s2).unwrap())
}
