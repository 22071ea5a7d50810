use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nikishin_bench::pair;
use nikishin_core::{
    build_gauss_rule, build_interaction_matrix, solve_equilibrium, solve_mop, EquilibriumOptions,
    FormEvaluator, Interval, MultiIndexPair, WeightFamily, WeightSpec,
};

fn gauss(c: &mut Criterion) {
    let spec = WeightSpec::new(
        WeightFamily::Jacobi {
            alpha: 0.5,
            beta: -0.5,
        },
        -1.0,
        1.0,
    )
    .unwrap();
    let mut g = c.benchmark_group("gauss_rule");
    for prec in [256u32, 1024] {
        g.bench_with_input(BenchmarkId::from_parameter(prec), &prec, |b, &p| {
            b.iter(|| build_gauss_rule(black_box(&spec), 64, p).unwrap())
        });
    }
    g.finish();
}

fn mop(c: &mut Criterion) {
    let p = pair(1, 1, 64, 256);
    let mut g = c.benchmark_group("solve_mop");
    for (n1, n2) in [(vec![3, 2], vec![2, 2]), (vec![6, 5], vec![5, 5])] {
        let n = MultiIndexPair::new(n1, n2).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(&n), &n, |b, n| {
            b.iter(|| solve_mop(n, &p).unwrap())
        });
    }
    g.finish();
    let n = MultiIndexPair::new(vec![6, 5], vec![5, 5]).unwrap();
    c.bench_function("forms_and_zeros", |b| {
        b.iter(|| {
            let f = FormEvaluator::solve(&n, p.clone()).unwrap();
            f.extract_all().unwrap();
        })
    });
}

fn equilibrium(c: &mut Criterion) {
    let m = build_interaction_matrix(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
    let sets = [(-3.0, -2.0), (-1.0, 1.0), (2.0, 3.0)].map(|(a, b)| Interval::new(a, b).unwrap());
    let mut g = c.benchmark_group("equilibrium");
    g.sample_size(10);
    for panels in [64usize, 128] {
        let opts = EquilibriumOptions {
            panels_per_set: panels,
            seed: Some(1),
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(panels), &opts, |b, o| {
            b.iter(|| solve_equilibrium(&m, &sets, o).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, gauss, mop, equilibrium);
criterion_main!(benches);
