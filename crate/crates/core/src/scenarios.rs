//! Built-in example scenarios, each running a pipeline of constructions and
//! emitting a report of individually verifiable checks: the three bivariate
//! involutions (sign, double sign, and the characteristic-2 swap), a cyclic
//! scaling action over F_7, and the de Jonquieres involution whose invariant
//! skew field carries genuine relations.

use serde_json::json;

use crate::error::{Error, Result};
use crate::expr::{parse_expr, substitute, Expr, Op};
use crate::field::{FieldSpec, Scalar};
use crate::group::{ActionSpec, FiniteGroup};
use crate::invariants::{algorithm_general, algorithm_linear, EntryTag, Presentation};
use crate::kmat::KMat;
use crate::linrep::{NonzeroWitness, RitCtx, RitVerdict, RunConfig};
use crate::matm::MatM;
use crate::poly::SPoly;
use crate::relations::{
    freeness_check, fundamental_relations, relations_hold_on_generators, FreenessVerdict,
    RelationSet,
};

/// One verified claim inside a scenario.
#[derive(Clone, Debug)]
pub struct Check {
    pub description: String,
    pub expected: String,
    pub passed: bool,
    pub witness: Option<NonzeroWitness>,
}

/// Outcome of a scenario run.
#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub presentation: Option<Presentation>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "passed": self.passed(),
            "checks": self.checks.iter().map(|c| {
                json!({
                    "description": c.description,
                    "expected": c.expected,
                    "passed": c.passed,
                    "witness": c.witness.as_ref().map(|w| json!({
                        "tuple": w.tuple.to_json(),
                        "prime": w.prime,
                    })),
                })
            }).collect::<Vec<_>>(),
            "presentation": self.presentation.as_ref().map(|p| p.to_json()),
        })
    }
}

/// Scenario parameters beyond the run configuration.
#[derive(Clone, Debug, Default)]
pub struct ScenarioParams {
    /// Ground field override; each scenario has a default.
    pub field: Option<FieldSpec>,
    /// Cubic polynomial for the de Jonquieres scenario, e.g. "x1^3 - x1"
    /// (also accepted with x in place of x1).
    pub f: Option<String>,
}

pub const SCENARIO_NAMES: [&str; 5] = [
    "z2_sign",
    "z2_double_sign",
    "z2_char2_swap",
    "z3_scaling_f7",
    "jonquieres",
];

pub fn run_scenario(
    name: &str,
    params: &ScenarioParams,
    cfg: &RunConfig,
) -> Result<ScenarioReport> {
    match name {
        "z2_sign" => z2_sign(params, cfg),
        "z2_double_sign" => z2_double_sign(params, cfg),
        "z2_char2_swap" => z2_char2_swap(params, cfg),
        "z3_scaling_f7" => z3_scaling_f7(params, cfg),
        "jonquieres" => jonquieres(params, cfg),
        _ => Err(Error::ParamError(format!(
            "unknown scenario {name:?}; available: {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}

struct Reporter {
    checks: Vec<Check>,
}

impl Reporter {
    fn new() -> Reporter {
        Reporter { checks: vec![] }
    }

    fn record(&mut self, description: &str, expected: &str, passed: bool) {
        self.checks.push(Check {
            description: description.into(),
            expected: expected.into(),
            passed,
            witness: None,
        });
    }

    fn check_zero(&mut self, ctx: &mut RitCtx, description: &str, e: &Expr) -> Result<()> {
        let passed = ctx.is_probably_zero(e)?;
        self.record(description, "zero", passed);
        Ok(())
    }

    fn check_eq(&mut self, ctx: &mut RitCtx, description: &str, a: &Expr, b: &Expr) -> Result<()> {
        let passed = ctx.eq(a, b)?;
        self.record(description, "equal", passed);
        Ok(())
    }

    fn check_nonzero(&mut self, ctx: &mut RitCtx, description: &str, e: &Expr) -> Result<()> {
        let (passed, witness) = match ctx.is_zero(e)? {
            RitVerdict::Nonzero(w) => (true, Some(w)),
            RitVerdict::ProbablyZero => (false, None),
        };
        self.checks.push(Check {
            description: description.into(),
            expected: "nonzero".into(),
            passed,
            witness,
        });
        Ok(())
    }
}

fn z2_action(spec: &FieldSpec, images: [&str; 2]) -> Result<ActionSpec> {
    let group = FiniteGroup::cyclic(2);
    let id = vec![parse_expr("x1", spec)?, parse_expr("x2", spec)?];
    let im = vec![parse_expr(images[0], spec)?, parse_expr(images[1], spec)?];
    ActionSpec::new(group, 2, spec.clone(), vec![id, im])
}

fn expect_set(
    rep: &mut Reporter,
    ctx: &mut RitCtx,
    pres: &Presentation,
    expected: &[&str],
) -> Result<()> {
    rep.record(
        "number of reduced generators",
        &expected.len().to_string(),
        pres.z.len() == expected.len(),
    );
    for text in expected {
        let e = parse_expr(text, &pres.spec)?;
        let mut found = false;
        for z in &pres.z {
            if ctx.eq(z, &e)? {
                found = true;
                break;
            }
        }
        rep.record(&format!("some generator equals {text}"), "equal", found);
    }
    Ok(())
}

fn invariance_checks(
    rep: &mut Reporter,
    ctx: &mut RitCtx,
    action: &ActionSpec,
    pres: &Presentation,
) -> Result<()> {
    let mut ok = true;
    for z in &pres.z {
        for g in 1..action.group.order() {
            if !ctx.eq(&action.apply(z, g)?, z)? {
                ok = false;
            }
        }
    }
    rep.record("all reduced generators are invariant", "invariant", ok);
    Ok(())
}

fn freeness_checks(
    rep: &mut Reporter,
    pres: &Presentation,
    cfg: &RunConfig,
    expect_free: bool,
) -> Result<RelationSet> {
    let rel = fundamental_relations(pres, cfg)?;
    let verdict = freeness_check(&rel, cfg)?;
    let label = if expect_free {
        "generators are free (all relations vanish)"
    } else {
        "generators satisfy nontrivial relations"
    };
    match &verdict {
        FreenessVerdict::AllVanish => rep.record(label, "free", expect_free),
        FreenessVerdict::RelationsPresent { indices, witnesses } => {
            let passed = !expect_free && !indices.is_empty();
            self_record_with_witness(rep, label, "relations", passed, witnesses.first().cloned());
        }
    }
    rep.record(
        "relations vanish on the actual generators",
        "zero",
        relations_hold_on_generators(&rel, pres, cfg)?,
    );
    Ok(rel)
}

fn self_record_with_witness(
    rep: &mut Reporter,
    description: &str,
    expected: &str,
    passed: bool,
    witness: Option<NonzeroWitness>,
) {
    rep.checks.push(Check {
        description: description.into(),
        expected: expected.into(),
        passed,
        witness,
    });
}

// ---------------------------------------------------------------------------
// Sign involution: x -> -x, y -> y
// ---------------------------------------------------------------------------

fn z2_sign(params: &ScenarioParams, cfg: &RunConfig) -> Result<ScenarioReport> {
    let spec = params.field.clone().unwrap_or_else(FieldSpec::rationals);
    if spec.characteristic() == 2 {
        return Err(Error::ParamError(
            "the sign involution needs characteristic other than 2".into(),
        ));
    }
    let action = z2_action(&spec, ["-x1", "x2"])?;
    let pres = algorithm_general(&action, cfg)?;
    let mut rep = Reporter::new();
    let mut ctx = RitCtx::new(&spec, cfg);
    rep.record("module basis is {1, x}", "2", pres.dim() == 2);
    expect_set(&mut rep, &mut ctx, &pres, &["x1*x1", "x2", "inv(x1)*x2*x1"])?;
    invariance_checks(&mut rep, &mut ctx, &action, &pres)?;
    freeness_checks(&mut rep, &pres, cfg, true)?;
    Ok(ScenarioReport {
        name: "z2_sign".into(),
        checks: rep.checks,
        presentation: Some(pres),
    })
}

// ---------------------------------------------------------------------------
// Double sign involution: x -> -x, y -> -y
// ---------------------------------------------------------------------------

fn z2_double_sign(params: &ScenarioParams, cfg: &RunConfig) -> Result<ScenarioReport> {
    let spec = params.field.clone().unwrap_or_else(FieldSpec::rationals);
    if spec.characteristic() == 2 {
        return Err(Error::ParamError(
            "the double sign involution needs characteristic other than 2".into(),
        ));
    }
    let action = z2_action(&spec, ["-x1", "-x2"])?;
    let pres = algorithm_linear(&action, cfg)?;
    let mut rep = Reporter::new();
    let mut ctx = RitCtx::new(&spec, cfg);
    rep.record("module basis is {1, x}", "2", pres.dim() == 2);
    expect_set(&mut rep, &mut ctx, &pres, &["x1*x1", "x2*x1", "inv(x1)*x2"])?;
    invariance_checks(&mut rep, &mut ctx, &action, &pres)?;
    freeness_checks(&mut rep, &pres, cfg, true)?;
    Ok(ScenarioReport {
        name: "z2_double_sign".into(),
        checks: rep.checks,
        presentation: Some(pres),
    })
}

// ---------------------------------------------------------------------------
// Characteristic-2 swap: x -> y, y -> x
// ---------------------------------------------------------------------------

fn z2_char2_swap(params: &ScenarioParams, cfg: &RunConfig) -> Result<ScenarioReport> {
    let spec = match &params.field {
        Some(s) => s.clone(),
        None => FieldSpec::prime(2)?,
    };
    if spec.characteristic() != 2 {
        return Err(Error::ParamError(
            "the swap scenario needs characteristic 2".into(),
        ));
    }
    let action = z2_action(&spec, ["x2", "x1"])?;
    let pres = algorithm_general(&action, cfg)?;
    let mut rep = Reporter::new();
    let mut ctx = RitCtx::new(&spec, cfg);
    rep.record("module basis is {1, x}", "2", pres.dim() == 2);
    invariance_checks(&mut rep, &mut ctx, &action, &pres)?;

    // X and Y entries in their displayed closed forms.
    let x = &pres.x_mats[0];
    let y = &pres.x_mats[1];
    let forms = [
        (x.at(0, 1), "x1*inv(x1 + x2)*x2*(x1 + x2)", "X(1,2)"),
        (x.at(1, 1), "inv(x1 + x2)*(x1*x1 + x2*x2)", "X(2,2)"),
        (y.at(0, 0), "x1 + x2", "Y(1,1)"),
        (
            y.at(0, 1),
            "x1*x2 + x2*x1 + x1*inv(x1 + x2)*x2*(x1 + x2)",
            "Y(1,2)",
        ),
        (y.at(1, 1), "inv(x1 + x2)*(x1*x2 + x2*x1)", "Y(2,2)"),
    ];
    for (entry, text, label) in forms {
        rep.check_eq(
            &mut ctx,
            &format!("{label} equals its closed form"),
            entry,
            &parse_expr(text, &spec)?,
        )?;
    }

    // The hand-reduced generator triple.
    let z1 = parse_expr("x1 + x2", &spec)?;
    let z2 = parse_expr("x1*x2 + x2*x1", &spec)?;
    let z3 = parse_expr("inv(x1) + inv(x2)", &spec)?;
    rep.check_eq(
        &mut ctx,
        "z3 is the inverse of x(x + y)^-1 y",
        &z3,
        &parse_expr("inv(x1*inv(x1 + x2)*x2)", &spec)?,
    )?;
    for (i, z) in [&z1, &z2, &z3].into_iter().enumerate() {
        let moved = action.apply(z, 1)?;
        rep.check_eq(&mut ctx, &format!("z{} is invariant", i + 1), &moved, z)?;
    }

    // Rational-entry matrices over fresh variables witnessing freeness.
    let fx1 = MatM::from_rows(
        &spec,
        vec![
            vec![Expr::zero(&spec), parse_expr("inv(x3)*x1", &spec)?],
            vec![Expr::one(&spec), parse_expr("x1 + inv(x1)*x2", &spec)?],
        ],
    )?;
    let fx2 = MatM::from_rows(
        &spec,
        vec![
            vec![parse_expr("x1", &spec)?, parse_expr("x2 + inv(x3)*x1", &spec)?],
            vec![Expr::one(&spec), parse_expr("inv(x1)*x2", &spec)?],
        ],
    )?;
    let sum = fx1.add(&fx2)?;
    let anti = fx1.mul(&fx2)?.add(&fx2.mul(&fx1)?)?;
    let invs = fx1.inverse(&mut ctx)?.add(&fx2.inverse(&mut ctx)?)?;
    let mut relations = vec![];
    for (j, mat) in [(0usize, &sum), (1, &anti), (2, &invs)] {
        relations.push(mat.at(0, 0).sub(&Expr::var(j as u32)));
        relations.push(mat.at(1, 0).clone());
    }
    let rel = RelationSet {
        spec: spec.clone(),
        t: 3,
        d: 2,
        fx: vec![fx1, fx2],
        relations,
    };
    let free = matches!(freeness_check(&rel, cfg)?, FreenessVerdict::AllVanish);
    rep.record(
        "the three displayed first-column identities hold",
        "free",
        free,
    );
    let zs = [z1, z2, z3];
    let mut hold = true;
    for r in &rel.relations {
        if !ctx.is_probably_zero(&substitute(r, &zs)?)? {
            hold = false;
        }
    }
    rep.record("identities vanish on the actual generators", "zero", hold);
    Ok(ScenarioReport {
        name: "z2_char2_swap".into(),
        checks: rep.checks,
        presentation: Some(pres),
    })
}

// ---------------------------------------------------------------------------
// Cyclic scaling of order 3 over F_7: x -> 2x, y -> y
// ---------------------------------------------------------------------------

fn z3_scaling_f7(params: &ScenarioParams, cfg: &RunConfig) -> Result<ScenarioReport> {
    let spec = match &params.field {
        Some(s) => s.clone(),
        None => FieldSpec::prime(7)?,
    };
    let omega = find_order_three(&spec).ok_or_else(|| {
        Error::ParamError("the field has no element of multiplicative order 3".into())
    })?;
    let group = FiniteGroup::cyclic(3);
    let images = (0..3)
        .map(|k| {
            let mut c = spec.one();
            for _ in 0..k {
                c = c.mul(&omega);
            }
            Ok(vec![
                Expr::constant(c).mul(&Expr::var(0)),
                Expr::var(1),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let action = ActionSpec::new(group, 2, spec.clone(), images)?;
    let pres = algorithm_linear(&action, cfg)?;
    let mut rep = Reporter::new();
    let mut ctx = RitCtx::new(&spec, cfg);
    rep.record("module basis is {1, x, x^2}", "3", pres.dim() == 3);
    expect_set(
        &mut rep,
        &mut ctx,
        &pres,
        &[
            "x1*x1*x1",
            "x2",
            "inv(x1)*x2*x1",
            "inv(x1)*inv(x1)*x2*x1*x1",
        ],
    )?;
    invariance_checks(&mut rep, &mut ctx, &action, &pres)?;
    freeness_checks(&mut rep, &pres, cfg, true)?;
    Ok(ScenarioReport {
        name: "z3_scaling_f7".into(),
        checks: rep.checks,
        presentation: Some(pres),
    })
}

fn find_order_three(spec: &FieldSpec) -> Option<Scalar> {
    if spec.is_rationals() {
        return None;
    }
    for k in 2..200i64 {
        let c = spec.from_i64(k);
        if c.is_zero() || c.is_one() {
            continue;
        }
        let c3 = c.mul(&c).mul(&c);
        if c3.is_one() {
            return Some(c);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// de Jonquieres involution: x -> y^-1 x y, y -> y^-1 f(x)
// ---------------------------------------------------------------------------

/// Expressions and matrices of the de Jonquieres construction.
pub struct JonquieresData {
    pub spec: FieldSpec,
    /// Coefficients (a0, a1, a2) of f = x^3 + a2 x^2 + a1 x + a0.
    pub alphas: [Scalar; 3],
    pub f_expr: Expr,
    pub action: ActionSpec,
    pub z: [Expr; 6],
    pub b1: Expr,
    pub b2: Expr,
    pub r: Expr,
    pub s: Expr,
    pub x_mat: MatM,
    pub y_mat: MatM,
    pub c_mat: MatM,
}

/// Convert a univariate polynomial expression to coefficient form.
fn expr_to_poly(e: &Expr, spec: &FieldSpec) -> Result<SPoly> {
    Ok(match e.op() {
        Op::Const(c) => SPoly::constant(c.convert_to(spec)?),
        Op::Var(0) => SPoly::x(spec.clone()),
        Op::Var(i) => {
            return Err(Error::ParamError(format!(
                "the polynomial f must use only x1, found x{}",
                i + 1
            )))
        }
        Op::Sum(ts) => {
            let mut acc = SPoly::zero(spec.clone());
            for t in ts {
                acc = acc.add(&expr_to_poly(t, spec)?);
            }
            acc
        }
        Op::Prod(ts) => {
            let mut acc = SPoly::constant(spec.one());
            for t in ts {
                acc = acc.mul(&expr_to_poly(t, spec)?);
            }
            acc
        }
        Op::Neg(t) => expr_to_poly(t, spec)?.neg(),
        Op::Inv(_) => {
            return Err(Error::ParamError(
                "the polynomial f cannot contain inverses".into(),
            ))
        }
    })
}

/// Build all de Jonquieres data for a monic cubic f with simple roots.
pub fn jonquieres_data(f_text: &str, spec: &FieldSpec) -> Result<JonquieresData> {
    if spec.characteristic() == 2 {
        return Err(Error::ParamError(
            "the de Jonquieres scenario needs characteristic other than 2".into(),
        ));
    }
    let f_text = f_text.replace('x', "x1").replace("x11", "x1");
    let f_poly = expr_to_poly(&parse_expr(&f_text, spec)?, spec)?;
    if f_poly.degree() != Some(3) {
        return Err(Error::ParamError("f must be a cubic polynomial".into()));
    }
    if !f_poly.leading().map_or(false, |c| c.is_one()) {
        return Err(Error::ParamError("f must be monic".into()));
    }
    let fd = f_poly.derivative();
    let g = f_poly.gcd(&fd);
    if g.degree() != Some(0) {
        return Err(Error::ParamError(
            "f must have simple roots: gcd(f, f') is not constant".into(),
        ));
    }
    let alphas = [f_poly.coeff(0), f_poly.coeff(1), f_poly.coeff(2)];
    let x = Expr::var(0);
    let y = Expr::var(1);
    let f_expr = horner(&x, &alphas, spec);
    // The involution.
    let y_inv = y.inv()?;
    let xphi = y_inv.mul(&x).mul(&y);
    let yphi = y_inv.mul(&f_expr);
    let group = FiniteGroup::cyclic(2);
    let action = ActionSpec::new(
        group,
        2,
        spec.clone(),
        vec![vec![x.clone(), y.clone()], vec![xphi.clone(), yphi.clone()]],
    )?;
    // The six generators from the general involution formulas.
    let diff_inv = xphi.sub(&x).inv()?;
    let x2 = x.mul(&x);
    let a2 = xphi.mul(&xphi);
    let z1 = xphi.mul(&diff_inv).mul(&x2).sub(&x.mul(&diff_inv).mul(&a2));
    let z2 = diff_inv.mul(&a2.sub(&x2));
    let z3 = xphi
        .mul(&diff_inv)
        .mul(&y)
        .sub(&x.mul(&diff_inv).mul(&yphi));
    let z4 = diff_inv.mul(&yphi.sub(&y));
    let z5 = xphi
        .mul(&diff_inv)
        .mul(&y)
        .mul(&x)
        .sub(&x.mul(&diff_inv).mul(&yphi).mul(&xphi));
    let z6 = diff_inv.mul(&yphi.mul(&xphi).sub(&y.mul(&x)));
    // The curve generators.
    let comm_inv = x.mul(&y).sub(&y.mul(&x)).inv()?;
    let b1 = comm_inv.mul(&f_expr.sub(&y.mul(&y)));
    let b2 = comm_inv.mul(&x2.mul(&y).sub(&y.mul(&x2)));
    let r = b1
        .mul(&b1)
        .sub(&b2)
        .sub(&Expr::constant(alphas[2].clone()));
    let s = y.sub(&x.mul(&b1)).add(&b1.mul(&r));
    let x_mat = MatM::from_rows(
        spec,
        vec![
            vec![Expr::zero(spec), z1.clone()],
            vec![Expr::one(spec), z2.clone()],
        ],
    )?;
    let y_mat = MatM::from_rows(
        spec,
        vec![
            vec![z3.clone(), z5.clone()],
            vec![z4.clone(), z6.clone()],
        ],
    )?;
    let c_mat = MatM::from_rows(
        spec,
        vec![
            vec![z3.clone(), z1.mul(&z4)],
            vec![z4.clone(), z3.add(&z2.mul(&z4))],
        ],
    )?;
    Ok(JonquieresData {
        spec: spec.clone(),
        alphas,
        f_expr,
        action,
        z: [z1, z2, z3, z4, z5, z6],
        b1,
        b2,
        r,
        s,
        x_mat,
        y_mat,
        c_mat,
    })
}

/// a0 + a1 e + a2 e^2 + e^3 for an expression e.
fn horner(e: &Expr, alphas: &[Scalar; 3], spec: &FieldSpec) -> Expr {
    let mut acc = Expr::one(spec);
    for a in [&alphas[2], &alphas[1], &alphas[0]] {
        acc = acc.mul(e).add(&Expr::constant(a.clone()));
    }
    acc
}

/// f applied to a 2x2 matrix of expressions.
fn poly_of_mat(m: &MatM, alphas: &[Scalar; 3], spec: &FieldSpec) -> Result<MatM> {
    let id = MatM::identity(spec, m.rows());
    let mut acc = id.clone();
    for a in [&alphas[2], &alphas[1], &alphas[0]] {
        acc = acc
            .mul(m)?
            .add(&id.scale_left(&Expr::constant((*a).clone())))?;
    }
    Ok(acc)
}

fn jonquieres(params: &ScenarioParams, cfg: &RunConfig) -> Result<ScenarioReport> {
    let spec = params.field.clone().unwrap_or_else(FieldSpec::rationals);
    let f_text = params.f.clone().unwrap_or_else(|| "x^3 - x".into());
    let data = jonquieres_data(&f_text, &spec)?;
    let mut rep = Reporter::new();
    let mut ctx = RitCtx::new(&spec, cfg);
    let [a0, a1, a2] = &data.alphas;
    let x = Expr::var(0);
    let y = Expr::var(1);

    // The substitution really is an involution.
    let xphi2 = data.action.apply(&data.action.apply(&x, 1)?, 1)?;
    let yphi2 = data.action.apply(&data.action.apply(&y, 1)?, 1)?;
    rep.check_eq(&mut ctx, "x^phi^phi = x", &xphi2, &x)?;
    rep.check_eq(&mut ctx, "y^phi^phi = y", &yphi2, &y)?;

    // All six generators are nonzero and invariant.
    for (i, z) in data.z.iter().enumerate() {
        rep.check_nonzero(&mut ctx, &format!("z{} is nonzero", i + 1), z)?;
        rep.check_eq(
            &mut ctx,
            &format!("z{} is invariant", i + 1),
            &data.action.apply(z, 1)?,
            z,
        )?;
    }

    // X = W^-1 D1 W and Y = W^-1 D2 W reproduce the displayed matrices.
    let w = data.action.g_matrix(&[Expr::one(&spec), x.clone()])?;
    let w_inv = w.inverse(&mut ctx)?;
    let d1 = MatM::from_rows(
        &spec,
        vec![
            vec![x.clone(), Expr::zero(&spec)],
            vec![Expr::zero(&spec), data.action.apply(&x, 1)?],
        ],
    )?;
    let d2 = MatM::from_rows(
        &spec,
        vec![
            vec![y.clone(), Expr::zero(&spec)],
            vec![Expr::zero(&spec), data.action.apply(&y, 1)?],
        ],
    )?;
    let x_from_w = w_inv.mul(&d1)?.mul(&w)?;
    let y_from_w = w_inv.mul(&d2)?.mul(&w)?;
    let mut same = true;
    for i in 0..2 {
        for j in 0..2 {
            if !ctx.eq(x_from_w.at(i, j), data.x_mat.at(i, j))?
                || !ctx.eq(y_from_w.at(i, j), data.y_mat.at(i, j))?
            {
                same = false;
            }
        }
    }
    rep.record("W^-1 D_i W matches the X and Y matrices", "equal", same);

    // XC = CX and C^2 = f(X), entrywise.
    let xc = data.x_mat.mul(&data.c_mat)?;
    let cx = data.c_mat.mul(&data.x_mat)?;
    let mut comm = true;
    for i in 0..2 {
        for j in 0..2 {
            if !ctx.eq(xc.at(i, j), cx.at(i, j))? {
                comm = false;
            }
        }
    }
    rep.record("XC = CX", "equal", comm);
    let c2 = data.c_mat.mul(&data.c_mat)?;
    let fx = poly_of_mat(&data.x_mat, &data.alphas, &spec)?;
    let mut csq = true;
    for i in 0..2 {
        for j in 0..2 {
            if !ctx.eq(c2.at(i, j), fx.at(i, j))? {
                csq = false;
            }
        }
    }
    rep.record("C^2 = f(X)", "equal", csq);

    // The explicit relation chain.
    let [z1, z2, z3, z4, z5, z6] = &data.z;
    let comm21 = z1
        .mul(z3)
        .add(&z1.mul(z2).mul(z4))
        .sub(&z3.mul(z1))
        .sub(&z1.mul(z4).mul(z2));
    rep.check_zero(&mut ctx, "relation comm21", &comm21)?;
    let comm22 = z1
        .mul(z4)
        .add(&z2.mul(z3))
        .add(&z2.mul(z2).mul(z4))
        .sub(&z4.mul(z1))
        .sub(&z3.mul(z2))
        .sub(&z2.mul(z4).mul(z2));
    rep.check_zero(&mut ctx, "relation comm22", &comm22)?;
    let f11 = z1
        .mul(z2)
        .add(&Expr::constant(a2.clone()).mul(z1))
        .add(&Expr::constant(a0.clone()));
    let csq11 = z3.mul(z3).add(&z1.mul(z4).mul(z4)).sub(&f11);
    rep.check_zero(&mut ctx, "relation csq11", &csq11)?;
    let f21 = z1
        .add(&z2.mul(z2))
        .add(&Expr::constant(a2.clone()).mul(z2))
        .add(&Expr::constant(a1.clone()));
    let csq21 = z4
        .mul(z3)
        .add(&z3.mul(z4))
        .add(&z2.mul(z4).mul(z4))
        .sub(&f21);
    rep.check_zero(&mut ctx, "relation csq21", &csq21)?;
    let z3i = z3.inv()?;
    let corner = z6
        .sub(&z4.mul(&z3i).mul(z5))
        .inv()?
        .mul(&z3.add(&z2.mul(z4)).sub(&z4.mul(&z3i).mul(z1).mul(z4)))
        .add(&Expr::one(&spec));
    rep.check_zero(&mut ctx, "corner relation expressing z6", &corner)?;

    // The curve generators.
    rep.check_eq(
        &mut ctx,
        "r is invariant",
        &data.action.apply(&data.r, 1)?,
        &data.r,
    )?;
    rep.check_eq(
        &mut ctx,
        "s is invariant",
        &data.action.apply(&data.s, 1)?,
        &data.s,
    )?;
    let rs = data.r.mul(&data.s).sub(&data.s.mul(&data.r));
    rep.check_zero(&mut ctx, "rs = sr", &rs)?;
    let fr = horner(&data.r, &data.alphas, &spec);
    rep.check_zero(
        &mut ctx,
        "s^2 = f(r)",
        &data.s.mul(&data.s).sub(&fr),
    )?;
    rep.check_nonzero(
        &mut ctx,
        "r is nonconstant (does not commute with x)",
        &data.r.mul(&x).sub(&x.mul(&data.r)),
    )?;
    rep.check_nonzero(
        &mut ctx,
        "s is nonconstant (does not commute with x)",
        &data.s.mul(&x).sub(&x.mul(&data.s)),
    )?;

    // Freeness pipeline on the six-generator presentation: relations exist.
    let pres = jonquieres_presentation(&data)?;
    freeness_checks(&mut rep, &pres, cfg, false)?;
    Ok(ScenarioReport {
        name: "jonquieres".into(),
        checks: rep.checks,
        presentation: Some(pres),
    })
}

/// The hand-assembled presentation with basis {1, x} and the six generators.
fn jonquieres_presentation(data: &JonquieresData) -> Result<Presentation> {
    let spec = &data.spec;
    let gens: Vec<Expr> = data.z.to_vec();
    let d = 2;
    let tags = vec![
        vec![
            EntryTag::Zero,
            EntryTag::Coefficient(0),
            EntryTag::One,
            EntryTag::Coefficient(1),
        ],
        vec![
            EntryTag::Coefficient(2),
            EntryTag::Coefficient(4),
            EntryTag::Coefficient(3),
            EntryTag::Coefficient(5),
        ],
    ];
    let mut combos = KMat::zero(spec, 6, 7);
    for g in 0..6 {
        combos.set(g, 1 + g, spec.one());
    }
    let mut affine = vec![];
    for l in 0..2 {
        let mut per_var: Vec<KMat> = (0..7).map(|_| KMat::zero(spec, d, d)).collect();
        for i in 0..d {
            for j in 0..d {
                match tags[l][i * d + j] {
                    EntryTag::Zero => {}
                    EntryTag::One => per_var[0].set(i, j, spec.one()),
                    EntryTag::Coefficient(g) => per_var[1 + g].set(i, j, spec.one()),
                }
            }
        }
        affine.push(per_var);
    }
    Ok(Presentation {
        spec: spec.clone(),
        m: 2,
        basis: vec![Expr::one(spec), Expr::var(0)],
        x_mats: vec![data.x_mat.clone(), data.y_mat.clone()],
        tags,
        gens: gens.clone(),
        z: gens,
        combos,
        affine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jonquieres_rejects_bad_parameters() {
        let q = FieldSpec::rationals();
        assert!(matches!(
            jonquieres_data("x^3", &q),
            Err(Error::ParamError(_))
        ));
        assert!(matches!(
            jonquieres_data("x^2 - 1", &q),
            Err(Error::ParamError(_))
        ));
        assert!(matches!(
            jonquieres_data("2*x^3 - x", &q),
            Err(Error::ParamError(_))
        ));
        let f2 = FieldSpec::prime(2).unwrap();
        assert!(matches!(
            jonquieres_data("x^3 - x", &f2),
            Err(Error::ParamError(_))
        ));
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let cfg = RunConfig::default();
        assert!(matches!(
            run_scenario("nope", &ScenarioParams::default(), &cfg),
            Err(Error::ParamError(_))
        ));
    }

    #[test]
    fn sign_scenario_passes() {
        let cfg = RunConfig::default();
        let rep = run_scenario("z2_sign", &ScenarioParams::default(), &cfg).unwrap();
        assert!(rep.passed(), "failed checks: {:?}", failing(&rep));
    }

    #[test]
    fn double_sign_scenario_passes() {
        let cfg = RunConfig::default();
        let rep = run_scenario("z2_double_sign", &ScenarioParams::default(), &cfg).unwrap();
        assert!(rep.passed(), "failed checks: {:?}", failing(&rep));
    }

    #[test]
    fn char2_swap_scenario_passes() {
        let cfg = RunConfig::default();
        let rep = run_scenario("z2_char2_swap", &ScenarioParams::default(), &cfg).unwrap();
        assert!(rep.passed(), "failed checks: {:?}", failing(&rep));
    }

    #[test]
    fn scaling_scenario_passes() {
        let cfg = RunConfig::default();
        let rep = run_scenario("z3_scaling_f7", &ScenarioParams::default(), &cfg).unwrap();
        assert!(rep.passed(), "failed checks: {:?}", failing(&rep));
    }

    #[test]
    fn jonquieres_scenario_passes() {
        let cfg = RunConfig::default();
        let rep = run_scenario("jonquieres", &ScenarioParams::default(), &cfg).unwrap();
        assert!(rep.passed(), "failed checks: {:?}", failing(&rep));
    }

    fn failing(rep: &ScenarioReport) -> Vec<&str> {
        rep.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.description.as_str())
            .collect()
    }
}
