use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use loopinv::anneal::{sample_neighbor, CandidateInvariant, CostModel, SearchSpaceParams};
use loopinv::ir::{lower_document, parse_chc};
use loopinv::num_bigint::BigInt;
use loopinv::num_rational::BigRational;
use loopinv::sampling::{epsilon_net_size, initial_dataset, randomized_epsilon_net, NetParams};
use loopinv::{negate_dnf, ChcSystem, DnfFormula, LinearPredicate, DEFAULT_DNF_CAP};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NONDET_GUARD: &str = "(chc (vars x y) (bound 64)
  (pre (and (= x 1) (= y 2))) (guard true)
  (trans (block true ((x (+ x y)) (y (+ y 1)))))
  (post (or (>= x y) (= x 1))))";

fn system() -> ChcSystem {
    lower_document(&parse_chc(NONDET_GUARD).unwrap(), DEFAULT_DNF_CAP, 0).unwrap()
}

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

fn nine_tenths() -> BigRational {
    BigRational::new(BigInt::from(9), BigInt::from(10))
}

fn candidate(d: usize, c: usize) -> CandidateInvariant {
    let cubes = (0..d)
        .map(|i| {
            (0..c)
                .map(|j| LinearPredicate::new(vec![1 - (i as i64 % 3), 1 + j as i64], 3 * j as i64))
                .collect()
        })
        .collect();
    CandidateInvariant::new(2, cubes)
}

fn cost(c: &mut Criterion) {
    let sys = system();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = initial_dataset(&sys, &half(), &nine_tenths(), DEFAULT_DNF_CAP, &mut rng).unwrap();
    let model = CostModel::new(&data, 50.0, 2.0);
    let mut group = c.benchmark_group("cost");
    for (d, cc) in [(1, 2), (2, 3), (3, 3)] {
        let inv = candidate(d, cc);
        group.bench_function(format!("{d}x{cc}"), |b| {
            b.iter(|| model.evaluate(black_box(&inv)))
        });
    }
    group.finish();
}

fn neighbor(c: &mut Criterion) {
    let sys = system();
    let params = SearchSpaceParams::new(&sys.space, 2, 3, 3).unwrap();
    let inv = candidate(2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("sample_neighbor 2x3", |b| {
        b.iter(|| sample_neighbor(black_box(&inv), &params, &mut rng))
    });
}

fn negation(c: &mut Criterion) {
    let f: DnfFormula = candidate(3, 3).to_dnf();
    c.bench_function("negate_dnf 3x3", |b| {
        b.iter(|| negate_dnf(black_box(&f), DEFAULT_DNF_CAP))
    });
}

fn sampling(c: &mut Criterion) {
    let sys = system();
    let params = NetParams::for_dim(half(), nine_tenths(), 2);
    c.bench_function("net size lookup", |b| {
        b.iter_batched(
            || {
                NetParams::for_dim(
                    BigRational::new(BigInt::from(1), BigInt::from(17)),
                    nine_tenths(),
                    3,
                )
            },
            |p| epsilon_net_size(&p),
            BatchSize::SmallInput,
        )
    });
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("epsilon net of B", |b| {
        b.iter(|| {
            let net: BTreeSet<_> =
                randomized_epsilon_net(&sys.guard, &params, &sys.space, &mut rng).unwrap();
            net.len()
        })
    });
}

criterion_group!(benches, cost, neighbor, negation, sampling);
criterion_main!(benches);
