//! Fundamental relations of a generator set and the freeness test.
//!
//! Given a presentation with affine data X_i = A_i0 + sum_j z_j A_ij, fresh
//! variables Z_1, ..., Z_t are substituted for the generators to form the
//! affine matrices FX_i. The relations are the entries of the first column
//! of z_j(FX_1, ..., FX_m) minus Z_j e_1. The generators are free exactly
//! when all relations vanish identically; otherwise the nonvanishing ones
//! are the fundamental relations the generators satisfy.

use serde_json::json;

use crate::error::Result;
use crate::expr::{substitute, Expr};
use crate::field::FieldSpec;
use crate::group::ActionSpec;
use crate::invariants::Presentation;
use crate::linrep::{NonzeroWitness, RitCtx, RitVerdict, RunConfig};
use crate::matm::{substitute_matrix, MatM};

/// The relation set of a presentation, over fresh variables x1, ..., xt
/// standing for the generators z_1, ..., z_t.
#[derive(Clone, Debug)]
pub struct RelationSet {
    pub spec: FieldSpec,
    /// Number of generators (and of fresh variables).
    pub t: usize,
    /// Basis dimension of the presentation.
    pub d: usize,
    /// Affine matrices over the fresh variables.
    pub fx: Vec<MatM>,
    /// relations[j * d + l] is entry l of z_j(FX) e_1 - Z_j e_1.
    pub relations: Vec<Expr>,
}

/// Verdict of the freeness test.
#[derive(Clone, Debug)]
pub enum FreenessVerdict {
    /// Every relation is (probably) zero: the generators are free.
    AllVanish,
    /// Indices into `relations` that are certified nonzero, with witnesses.
    RelationsPresent {
        indices: Vec<usize>,
        witnesses: Vec<NonzeroWitness>,
    },
}

impl FreenessVerdict {
    pub fn is_free(&self) -> bool {
        matches!(self, FreenessVerdict::AllVanish)
    }
}

/// The matrices FX_i = A_i0 + Z_1 A_i1 + ... + Z_t A_it over fresh
/// variables.
pub fn build_fx(pres: &Presentation) -> Vec<MatM> {
    let spec = &pres.spec;
    let d = pres.dim();
    let t = pres.z.len();
    pres.affine
        .iter()
        .map(|per_var| {
            MatM::from_fn(spec, d, d, |i, j| {
                let mut e = Expr::constant(per_var[0].at(i, j).clone());
                for k in 0..t {
                    e = e.add(
                        &Expr::constant(per_var[1 + k].at(i, j).clone()).mul(&Expr::var(k as u32)),
                    );
                }
                e
            })
        })
        .collect()
}

/// Compute the relation set of a presentation: substitute the FX matrices
/// into each generator and compare first columns.
pub fn fundamental_relations(pres: &Presentation, cfg: &RunConfig) -> Result<RelationSet> {
    let spec = &pres.spec;
    let d = pres.dim();
    let t = pres.z.len();
    let fx = build_fx(pres);
    let mut ctx = RitCtx::new(spec, cfg);
    let mut relations = Vec::with_capacity(t * d);
    for (j, z) in pres.z.iter().enumerate() {
        let zed = substitute_matrix(z, &fx, &mut ctx)?;
        for l in 0..d {
            let mut r = zed.at(l, 0).clone();
            if l == 0 {
                r = r.sub(&Expr::var(j as u32));
            }
            relations.push(r);
        }
    }
    Ok(RelationSet {
        spec: spec.clone(),
        t,
        d,
        fx,
        relations,
    })
}

/// Test every relation for zero; nonzero relations are returned with
/// certified witnesses.
pub fn freeness_check(rel: &RelationSet, cfg: &RunConfig) -> Result<FreenessVerdict> {
    let mut ctx = RitCtx::new(&rel.spec, cfg);
    let mut indices = vec![];
    let mut witnesses = vec![];
    for (i, r) in rel.relations.iter().enumerate() {
        match ctx.is_zero(r)? {
            RitVerdict::ProbablyZero => {}
            RitVerdict::Nonzero(w) => {
                indices.push(i);
                witnesses.push(w);
            }
        }
    }
    Ok(if indices.is_empty() {
        FreenessVerdict::AllVanish
    } else {
        FreenessVerdict::RelationsPresent { indices, witnesses }
    })
}

/// Check that substituting the actual generators for the fresh variables
/// annihilates every relation: the relations genuinely hold in the ambient
/// skew field.
pub fn relations_hold_on_generators(
    rel: &RelationSet,
    pres: &Presentation,
    cfg: &RunConfig,
) -> Result<bool> {
    let mut ctx = RitCtx::new(&pres.spec, cfg);
    for r in &rel.relations {
        let back = substitute(r, &pres.z)?;
        if !ctx.is_probably_zero(&back)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Basis-independent block form of the relations:
/// D_i(FX) W(FX) (I (x) e_1) - W(FX) (FX_i (x) e_1), where D_i is the
/// diagonal of the orbit of x_i and W is the G-matrix of the basis. All
/// entries vanish exactly when the corner relations do.
pub fn block_relations(
    action: &ActionSpec,
    pres: &Presentation,
    rel: &RelationSet,
    cfg: &RunConfig,
) -> Result<Vec<MatM>> {
    let spec = &pres.spec;
    let d = pres.dim();
    if d != action.group.order() {
        return Err(crate::error::Error::ShapeMismatch(
            "block relations need a basis indexed by the full group".into(),
        ));
    }
    let mut ctx = RitCtx::new(spec, cfg);
    let w_small = action.g_matrix(&pres.basis)?;
    let w_big = blockify(&w_small, &rel.fx, &mut ctx)?;
    let mut out = Vec::with_capacity(pres.m);
    for i in 0..pres.m {
        let mut d_small = MatM::zero(spec, d, d);
        for g in 0..d {
            d_small.set(g, g, action.apply(&Expr::var(i as u32), g)?);
        }
        let d_big = blockify(&d_small, &rel.fx, &mut ctx)?;
        // I (x) e_1 and FX_i (x) e_1 as d^2 x d column selectors.
        let mut sel = MatM::zero(spec, d * d, d);
        for j in 0..d {
            sel.set(j * d, j, Expr::one(spec));
        }
        let mut fx_sel = MatM::zero(spec, d * d, d);
        for r in 0..d {
            for c in 0..d {
                fx_sel.set(r * d, c, rel.fx[i].at(r, c).clone());
            }
        }
        let lhs = d_big.mul(&w_big)?.mul(&sel)?;
        let rhs = w_big.mul(&fx_sel)?;
        out.push(lhs.sub(&rhs)?);
    }
    Ok(out)
}

/// Substitute the FX matrices into every entry of a matrix of expressions,
/// producing the block matrix of the images.
fn blockify(mat: &MatM, fx: &[MatM], ctx: &mut RitCtx) -> Result<MatM> {
    let spec = mat.spec();
    let d = fx[0].rows();
    let mut out = MatM::zero(spec, mat.rows() * d, mat.cols() * d);
    for r in 0..mat.rows() {
        for c in 0..mat.cols() {
            let block = substitute_matrix(mat.at(r, c), fx, ctx)?;
            for br in 0..d {
                for bc in 0..d {
                    out.set(r * d + br, c * d + bc, block.at(br, bc).clone());
                }
            }
        }
    }
    Ok(out)
}

impl RelationSet {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "field": self.spec.to_string(),
            "t": self.t,
            "d": self.d,
            "fx": self.fx.iter().map(|x| {
                (0..x.rows()).map(|i| {
                    (0..x.cols()).map(|j| x.at(i, j).to_string()).collect::<Vec<_>>()
                }).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "relations": self.relations.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::group::FiniteGroup;
    use crate::invariants::algorithm_general;

    fn sign_action(q: &FieldSpec) -> ActionSpec {
        let group = FiniteGroup::cyclic(2);
        let images = vec![
            vec![
                parse_expr("x1", q).unwrap(),
                parse_expr("x2", q).unwrap(),
            ],
            vec![
                parse_expr("-x1", q).unwrap(),
                parse_expr("x2", q).unwrap(),
            ],
        ];
        ActionSpec::new(group, 2, q.clone(), images).unwrap()
    }

    #[test]
    fn sign_action_generators_are_free() {
        let q = FieldSpec::rationals();
        let cfg = RunConfig::default();
        let pres = algorithm_general(&sign_action(&q), &cfg).unwrap();
        let rel = fundamental_relations(&pres, &cfg).unwrap();
        assert_eq!(rel.relations.len(), rel.t * rel.d);
        assert!(freeness_check(&rel, &cfg).unwrap().is_free());
        assert!(relations_hold_on_generators(&rel, &pres, &cfg).unwrap());
    }

    #[test]
    fn sign_action_block_relations_vanish() {
        let q = FieldSpec::rationals();
        let cfg = RunConfig::default();
        let a = sign_action(&q);
        let pres = algorithm_general(&a, &cfg).unwrap();
        let rel = fundamental_relations(&pres, &cfg).unwrap();
        let blocks = block_relations(&a, &pres, &rel, &cfg).unwrap();
        let mut ctx = RitCtx::new(&q, &cfg);
        for b in &blocks {
            for r in 0..b.rows() {
                for c in 0..b.cols() {
                    assert!(ctx.is_probably_zero(b.at(r, c)).unwrap());
                }
            }
        }
    }

    #[test]
    fn commutator_relation_is_detected() {
        // A hand-built relation set with the relation Z1 Z2 - Z2 Z1, which
        // is nonzero in the free skew field.
        let q = FieldSpec::rationals();
        let cfg = RunConfig::default();
        let rel = RelationSet {
            spec: q.clone(),
            t: 2,
            d: 1,
            fx: vec![],
            relations: vec![
                parse_expr("x1*x2 - x2*x1", &q).unwrap(),
                Expr::zero(&q),
            ],
        };
        match freeness_check(&rel, &cfg).unwrap() {
            FreenessVerdict::RelationsPresent { indices, witnesses } => {
                assert_eq!(indices, vec![0]);
                assert_eq!(witnesses.len(), 1);
            }
            FreenessVerdict::AllVanish => panic!("expected a relation"),
        }
    }
}
