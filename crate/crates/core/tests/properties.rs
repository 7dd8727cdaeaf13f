//! Property-based structural invariants: representation evaluation agrees
//! with direct evaluation, the Reynolds operator is an idempotent projection
//! onto invariants, and every computed presentation satisfies its defining
//! identities.

use once_cell::sync::Lazy;
use proptest::prelude::*;
use rand::SeedableRng;

use skewfield::expr::{evaluate, parse_expr, MatrixTuple};
use skewfield::linrep::{LinRep, RitCtx, RunConfig};
use skewfield::{
    algorithm_general, algorithm_linear, ActionSpec, Expr, FieldSpec, FiniteGroup, Presentation,
};

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..2).prop_map(Expr::var),
        (-3i64..=3).prop_map(|n| Expr::int(&FieldSpec::rationals(), n)),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            // Shift by 1 before inverting so the argument is rarely zero;
            // singular evaluations are discarded by the properties below.
            inner.prop_filter_map("invertible", |a| a
                .add(&Expr::one(&FieldSpec::rationals()))
                .inv()
                .ok()),
        ]
    })
}

fn sign_action() -> ActionSpec {
    let q = FieldSpec::rationals();
    ActionSpec::new(
        FiniteGroup::cyclic(2),
        2,
        q.clone(),
        vec![
            vec![parse_expr("x1", &q).unwrap(), parse_expr("x2", &q).unwrap()],
            vec![parse_expr("-x1", &q).unwrap(), parse_expr("x2", &q).unwrap()],
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 120, .. ProptestConfig::default() })]

    /// The linear representation blow-up agrees with direct recursive
    /// evaluation wherever both are defined.
    #[test]
    fn pencil_agrees_with_direct_evaluation(e in arb_expr(), seed in 0u64..1 << 40, n in 1usize..=3) {
        let q = FieldSpec::rationals();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let tuple = MatrixTuple::random(&q, 2, n, &mut rng, 8);
        let direct = evaluate(&e, &tuple);
        let rep = LinRep::build(&e, 2, &q).unwrap();
        let via_rep = rep.eval(&tuple);
        if let (Ok(a), Ok(b)) = (direct, via_rep) {
            prop_assert_eq!(a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 120, .. ProptestConfig::default() })]

    /// reynolds(reynolds(e)) = reynolds(e) as rational functions.
    #[test]
    fn reynolds_is_idempotent(e in arb_expr()) {
        let a = sign_action();
        let cfg = RunConfig::default();
        let mut ctx = RitCtx::new(&a.spec, &cfg);
        if let Ok(r) = a.reynolds(&e) {
            let rr = a.reynolds(&r).unwrap();
            prop_assert!(ctx.eq(&r, &rr).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 60, .. ProptestConfig::default() })]

    /// reynolds(e) is fixed by every group element.
    #[test]
    fn reynolds_output_is_invariant(e in arb_expr()) {
        let a = sign_action();
        let cfg = RunConfig::default();
        let mut ctx = RitCtx::new(&a.spec, &cfg);
        if let Ok(r) = a.reynolds(&e) {
            for g in 1..a.group.order() {
                prop_assert!(ctx.eq(&a.apply(&r, g).unwrap(), &r).unwrap());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Per-presentation structural checks over the bundled actions
// ---------------------------------------------------------------------------

struct Case {
    action: ActionSpec,
    pres: Presentation,
}

static CASES: Lazy<Vec<Case>> = Lazy::new(|| {
    let cfg = RunConfig::default();
    let q = FieldSpec::rationals();
    let f2 = FieldSpec::prime(2).unwrap();
    let f7 = FieldSpec::prime(7).unwrap();
    let mk2 = |spec: &FieldSpec, im: [&str; 2]| {
        ActionSpec::new(
            FiniteGroup::cyclic(2),
            2,
            spec.clone(),
            vec![
                vec![parse_expr("x1", spec).unwrap(), parse_expr("x2", spec).unwrap()],
                vec![parse_expr(im[0], spec).unwrap(), parse_expr(im[1], spec).unwrap()],
            ],
        )
        .unwrap()
    };
    let scaling = ActionSpec::new(
        FiniteGroup::cyclic(3),
        2,
        f7.clone(),
        (0..3)
            .map(|k| {
                vec![
                    Expr::int(&f7, [1, 2, 4][k]).mul(&Expr::var(0)),
                    Expr::var(1),
                ]
            })
            .collect(),
    )
    .unwrap();
    let mut cases = vec![];
    for action in [
        mk2(&q, ["-x1", "x2"]),
        mk2(&q, ["-x1", "-x2"]),
        mk2(&f2, ["x2", "x1"]),
    ] {
        let pres = algorithm_general(&action, &cfg).unwrap();
        cases.push(Case { action, pres });
    }
    let pres = algorithm_linear(&scaling, &cfg).unwrap();
    cases.push(Case {
        action: scaling,
        pres,
    });
    cases
});

#[test]
fn g_matrix_of_every_basis_is_full() {
    let cfg = RunConfig::default();
    for case in CASES.iter() {
        let mut ctx = RitCtx::new(&case.pres.spec, &cfg);
        let w = case.action.g_matrix(&case.pres.basis).unwrap();
        assert!(
            w.inverse(&mut ctx).is_ok(),
            "singular G-matrix for m={} over {}",
            case.pres.m,
            case.pres.spec
        );
    }
}

#[test]
fn every_x_entry_is_invariant() {
    let cfg = RunConfig::default();
    for case in CASES.iter() {
        let mut ctx = RitCtx::new(&case.pres.spec, &cfg);
        for x in &case.pres.x_mats {
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    for g in 1..case.action.group.order() {
                        let moved = case.action.apply(x.at(i, j), g).unwrap();
                        assert!(ctx.eq(&moved, x.at(i, j)).unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn defining_identity_holds_per_presentation() {
    let cfg = RunConfig::default();
    for case in CASES.iter() {
        let mut ctx = RitCtx::new(&case.pres.spec, &cfg);
        let d = case.pres.dim();
        for (l, x) in case.pres.x_mats.iter().enumerate() {
            for j in 0..d {
                let lhs = Expr::var(l as u32).mul(&case.pres.basis[j]);
                let mut rhs = Expr::zero(&case.pres.spec);
                for i in 0..d {
                    rhs = rhs.add(&case.pres.basis[i].mul(x.at(i, j)));
                }
                assert!(ctx.eq(&lhs, &rhs).unwrap());
            }
        }
    }
}

#[test]
fn generator_reduction_is_stable_across_seeds() {
    for case in CASES.iter() {
        let a = algorithm_general(&case.action, &RunConfig::with_seed(0)).unwrap();
        let b = algorithm_general(&case.action, &RunConfig::with_seed(1)).unwrap();
        assert_eq!(a.z.len(), b.z.len());
    }
}
