//! End-to-end benchmarks: identity testing, generator extraction, and the
//! freeness check, over the bundled small actions.

use criterion::{criterion_group, criterion_main, Criterion};

use skewfield::expr::parse_expr;
use skewfield::linrep::{is_zero, RunConfig};
use skewfield::{
    algorithm_general, algorithm_linear, freeness_check, fundamental_relations, ActionSpec,
    FieldSpec, FiniteGroup,
};

fn sign_action(q: &FieldSpec) -> ActionSpec {
    ActionSpec::new(
        FiniteGroup::cyclic(2),
        2,
        q.clone(),
        vec![
            vec![parse_expr("x1", q).unwrap(), parse_expr("x2", q).unwrap()],
            vec![parse_expr("-x1", q).unwrap(), parse_expr("x2", q).unwrap()],
        ],
    )
    .unwrap()
}

fn scaling_action(f7: &FieldSpec) -> ActionSpec {
    ActionSpec::new(
        FiniteGroup::cyclic(3),
        2,
        f7.clone(),
        (0..3usize)
            .map(|k| {
                vec![
                    parse_expr(&format!("{}*x1", [1, 2, 4][k]), f7).unwrap(),
                    parse_expr("x2", f7).unwrap(),
                ]
            })
            .collect(),
    )
    .unwrap()
}

fn bench_rit(c: &mut Criterion) {
    let q = FieldSpec::rationals();
    let cfg = RunConfig::default();
    let zero = parse_expr(
        "inv(x1-x2*inv(x4)*x3) - (inv(x1)+inv(x1)*x2*inv(x4-x3*inv(x1)*x2)*x3*inv(x1))",
        &q,
    )
    .unwrap();
    let nonzero = parse_expr("x1*x2 - x2*x1", &q).unwrap();
    c.bench_function("rit_zero_identity", |b| {
        b.iter(|| is_zero(&zero, &cfg).unwrap())
    });
    c.bench_function("rit_nonzero_commutator", |b| {
        b.iter(|| is_zero(&nonzero, &cfg).unwrap())
    });
}

fn bench_invariants(c: &mut Criterion) {
    let q = FieldSpec::rationals();
    let f7 = FieldSpec::prime(7).unwrap();
    let cfg = RunConfig::default();
    let sign = sign_action(&q);
    let scaling = scaling_action(&f7);
    let mut group = c.benchmark_group("invariants");
    group.sample_size(10);
    group.bench_function("general_sign", |b| {
        b.iter(|| algorithm_general(&sign, &cfg).unwrap())
    });
    group.bench_function("linear_scaling_f7", |b| {
        b.iter(|| algorithm_linear(&scaling, &cfg).unwrap())
    });
    group.finish();
}

fn bench_freeness(c: &mut Criterion) {
    let q = FieldSpec::rationals();
    let cfg = RunConfig::default();
    let pres = algorithm_general(&sign_action(&q), &cfg).unwrap();
    let mut group = c.benchmark_group("freeness");
    group.sample_size(10);
    group.bench_function("sign_presentation", |b| {
        b.iter(|| {
            let rel = fundamental_relations(&pres, &cfg).unwrap();
            freeness_check(&rel, &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_rit, bench_invariants, bench_freeness);
criterion_main!(benches);
