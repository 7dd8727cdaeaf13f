//! Generator extraction for invariant skew subfields: a breadth-first word
//! search for general automorphism actions, and a degree-layer variant for
//! linear actions that adds whole irreducible blocks at a time.
//!
//! Both produce a `Presentation`: a right-module basis B with b_1 = 1, the
//! matrices X_1, ..., X_m expressing multiplication by each variable in that
//! basis, the invariant coefficients appearing in them, a linearly reduced
//! generator list z, and the affine data X_i = A_i0 + sum_j z_j A_ij.

use std::collections::VecDeque;

use serde_json::json;

use crate::error::{Error, Result};
use crate::expr::{embed_constants, evaluate, Expr, MatrixTuple};
use crate::field::{sampling_field, Embedding, FieldSpec, Scalar, MIN_SAMPLE_FIELD};
use crate::group::ActionSpec;
use crate::kmat::KMat;
use crate::linrep::{RitCtx, RunConfig};
use crate::matm::MatM;
use crate::reptheory::{column_basis, decompose_irreducibles, GModule};

/// Origin of an entry of an X matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryTag {
    Zero,
    One,
    /// Index into the generator list.
    Coefficient(usize),
}

/// Output of the generator-extraction algorithms.
#[derive(Clone, Debug)]
pub struct Presentation {
    pub spec: FieldSpec,
    pub m: usize,
    /// Right-module basis of M over the invariant subfield; basis[0] = 1.
    pub basis: Vec<Expr>,
    /// X matrices: x_l * basis[j] = sum_i basis[i] * (x_mats[l])_{i,j}.
    pub x_mats: Vec<MatM>,
    /// tags[l][i * d + j] classifies entry (i, j) of x_mats[l].
    pub tags: Vec<Vec<EntryTag>>,
    /// All X entries distinct from 0 and 1, in scan order.
    pub gens: Vec<Expr>,
    /// Maximal linearly independent sublist of `gens` (greedy in order).
    pub z: Vec<Expr>,
    /// combos[g] expresses gens[g] over {1} u z: row (c_0, c_1, ..., c_t).
    pub combos: KMat,
    /// affine[i][j] are scalar d x d matrices with
    /// X_i = affine[i][0] + sum_j z_j * affine[i][1 + j].
    pub affine: Vec<Vec<KMat>>,
}

impl Presentation {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let scalar_grid = |m: &KMat| -> serde_json::Value {
            json!((0..m.rows())
                .map(|i| (0..m.cols()).map(|j| m.at(i, j).to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>())
        };
        json!({
            "field": self.spec.to_string(),
            "m": self.m,
            "d": self.dim(),
            "basis": self.basis.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
            "x": self.x_mats.iter().map(|x| {
                (0..x.rows()).map(|i| {
                    (0..x.cols()).map(|j| x.at(i, j).to_string()).collect::<Vec<_>>()
                }).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "tags": self.tags.iter().map(|row| {
                row.iter().map(|t| match t {
                    EntryTag::Zero => json!("zero"),
                    EntryTag::One => json!("one"),
                    EntryTag::Coefficient(g) => json!({"coefficient": g}),
                }).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
            "gens": self.gens.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
            "z": self.z.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
            "combos": scalar_grid(&self.combos),
            "affine": self.affine.iter().map(|per_var| {
                per_var.iter().map(scalar_grid).collect::<Vec<_>>()
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Presentation> {
        let bad = |what: &str| Error::ParamError(format!("presentation: missing or bad {what}"));
        let field_s = v
            .get("field")
            .and_then(|x| x.as_str())
            .ok_or_else(|| bad("\"field\""))?;
        let spec = FieldSpec::parse(field_s)?;
        let m = v.get("m").and_then(|x| x.as_u64()).ok_or_else(|| bad("\"m\""))? as usize;
        let strings = |key: &str| -> Result<Vec<String>> {
            v.get(key)
                .and_then(|x| x.as_array())
                .ok_or_else(|| bad(key))?
                .iter()
                .map(|s| s.as_str().map(String::from).ok_or_else(|| bad(key)))
                .collect()
        };
        let parse_all = |texts: &[String]| -> Result<Vec<Expr>> {
            texts.iter().map(|t| crate::expr::parse_expr(t, &spec)).collect()
        };
        let basis = parse_all(&strings("basis")?)?;
        let d = basis.len();
        let expr_grid = |g: &serde_json::Value, what: &str| -> Result<MatM> {
            let rows = g
                .as_array()
                .ok_or_else(|| bad(what))?
                .iter()
                .map(|row| {
                    row.as_array()
                        .ok_or_else(|| bad(what))?
                        .iter()
                        .map(|e| {
                            crate::expr::parse_expr(
                                e.as_str().ok_or_else(|| bad(what))?,
                                &spec,
                            )
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            MatM::from_rows(&spec, rows)
        };
        let x_arr = v.get("x").and_then(|x| x.as_array()).ok_or_else(|| bad("\"x\""))?;
        let x_mats = x_arr
            .iter()
            .map(|g| expr_grid(g, "\"x\""))
            .collect::<Result<Vec<_>>>()?;
        let tags_arr = v
            .get("tags")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("\"tags\""))?;
        let tags = tags_arr
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| bad("\"tags\""))?
                    .iter()
                    .map(|t| match t {
                        serde_json::Value::String(s) if s == "zero" => Ok(EntryTag::Zero),
                        serde_json::Value::String(s) if s == "one" => Ok(EntryTag::One),
                        serde_json::Value::Object(o) => o
                            .get("coefficient")
                            .and_then(|g| g.as_u64())
                            .map(|g| EntryTag::Coefficient(g as usize))
                            .ok_or_else(|| bad("\"tags\"")),
                        _ => Err(bad("\"tags\"")),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let gens = parse_all(&strings("gens")?)?;
        let z = parse_all(&strings("z")?)?;
        let scalar_grid = |g: &serde_json::Value, what: &str| -> Result<KMat> {
            let rows = g.as_array().ok_or_else(|| bad(what))?;
            let nrows = rows.len();
            let ncols = rows
                .first()
                .and_then(|r| r.as_array())
                .map_or(0, |r| r.len());
            let mut out = KMat::zero(&spec, nrows, ncols);
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().ok_or_else(|| bad(what))?;
                if row.len() != ncols {
                    return Err(bad(what));
                }
                for (j, s) in row.iter().enumerate() {
                    let text = s.as_str().ok_or_else(|| bad(what))?;
                    out.set(i, j, Scalar::parse(&spec, text)?);
                }
            }
            Ok(out)
        };
        let combos = scalar_grid(v.get("combos").ok_or_else(|| bad("\"combos\""))?, "\"combos\"")?;
        let affine_arr = v
            .get("affine")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("\"affine\""))?;
        let affine = affine_arr
            .iter()
            .map(|per_var| {
                per_var
                    .as_array()
                    .ok_or_else(|| bad("\"affine\""))?
                    .iter()
                    .map(|g| scalar_grid(g, "\"affine\""))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if x_mats.len() != m || tags.len() != m || affine.len() != m {
            return Err(bad("per-variable array lengths"));
        }
        for x in &x_mats {
            if x.rows() != d || x.cols() != d {
                return Err(bad("\"x\" dimensions"));
            }
        }
        for per_var in &affine {
            if per_var.len() != z.len() + 1 {
                return Err(bad("\"affine\" lengths"));
            }
        }
        Ok(Presentation {
            spec,
            m,
            basis,
            x_mats,
            tags,
            gens,
            z,
            combos,
            affine,
        })
    }
}

/// Solve w = sum_b b * c_b with invariant coefficients, via the G-matrix
/// system: one equation per group element.
pub fn membership(
    action: &ActionSpec,
    basis: &[Expr],
    w: &Expr,
    ctx: &mut RitCtx,
) -> Result<Option<Vec<Expr>>> {
    if basis.is_empty() {
        return Ok(if ctx.is_probably_zero(w)? {
            Some(vec![])
        } else {
            None
        });
    }
    let gm = action.g_matrix(basis)?;
    let rhs = action.g_column(w)?;
    gm.solve_right_linear(&rhs, ctx)
}

enum Col {
    /// x_l * b_j equals a basis element: unit column with the 1 in this row.
    Unit(usize),
    /// Invariant coefficients, indexed by basis position (short rows mean
    /// the tail is zero: the basis grew after this column was solved).
    Coeffs(Vec<Expr>),
}

/// Word search for a general action: BFS over words in generation order,
/// testing membership in the module spanned by the basis found so far.
pub fn algorithm_general(action: &ActionSpec, cfg: &RunConfig) -> Result<Presentation> {
    let spec = &action.spec;
    let m = action.m;
    let g_ord = action.group.order();
    let max_degree = cfg.max_degree.unwrap_or(g_ord + 2);
    let mut ctx = RitCtx::new(spec, cfg);

    struct Item {
        expr: Expr,
        len: usize,
        parent: Option<(usize, usize)>,
    }
    let mut queue = VecDeque::new();
    queue.push_back(Item {
        expr: Expr::one(spec),
        len: 0,
        parent: None,
    });
    let mut basis: Vec<Expr> = vec![];
    let mut columns: Vec<Vec<Option<Col>>> = vec![];
    while let Some(item) = queue.pop_front() {
        if item.len > max_degree {
            return Err(Error::DegreeCapExceeded { max_degree });
        }
        match membership(action, &basis, &item.expr, &mut ctx)? {
            Some(coeffs) => {
                if let Some((l, j)) = item.parent {
                    columns[l][j] = Some(Col::Coeffs(coeffs));
                }
            }
            None => {
                if basis.len() == g_ord {
                    return Err(Error::Inconclusive(
                        "basis exceeded the group order; retry with another seed".into(),
                    ));
                }
                basis.push(item.expr.clone());
                let i = basis.len() - 1;
                if let Some((l, j)) = item.parent {
                    columns[l][j] = Some(Col::Unit(i));
                }
                for col in &mut columns {
                    col.push(None);
                }
                if columns.is_empty() {
                    columns = (0..m).map(|_| vec![None]).collect();
                }
                for l in 0..m {
                    queue.push_back(Item {
                        expr: Expr::var(l as u32).mul(&item.expr),
                        len: item.len + 1,
                        parent: Some((l, i)),
                    });
                }
            }
        }
    }
    let columns = columns
        .into_iter()
        .map(|col| {
            col.into_iter()
                .map(|c| c.ok_or_else(|| Error::Inconclusive("unfilled X column".into())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    finalize(action, cfg, &mut ctx, basis, columns)
}

/// Degree-layer search for a linear action: each layer of candidates is
/// split into irreducible stable blocks, one representative per block is
/// tested, and whole blocks join the basis on failure.
pub fn algorithm_linear(action: &ActionSpec, cfg: &RunConfig) -> Result<Presentation> {
    let spec = &action.spec;
    let m = action.m;
    let g_ord = action.group.order();
    let lparts = action.linear_part().ok_or(Error::NonlinearAction)?;
    let p = spec.characteristic();
    if p != 0 && g_ord as u64 % p == 0 {
        return Err(Error::CharDivides);
    }
    let max_degree = cfg.max_degree.unwrap_or(g_ord + 2);
    let mut ctx = RitCtx::new(spec, cfg);
    let mut rng = cfg.rng(0x4c41_5945);

    // Basis elements as (degree, coefficient vector in the m^degree word
    // layer, expression); the frontier holds the blocks added last layer.
    let mut basis: Vec<(usize, KMat, Expr)> = vec![(0, KMat::identity(spec, 1), Expr::one(spec))];
    let mut frontier: Vec<KMat> = vec![KMat::identity(spec, 1)];
    let mut h = 0usize;
    while !frontier.is_empty() {
        h += 1;
        if h > max_degree {
            return Err(Error::DegreeCapExceeded { max_degree });
        }
        let dim = m.pow(h as u32);
        let sub = dim / m;
        let mut cand = KMat::zero(spec, dim, 0);
        for v in &frontier {
            for i in 0..m {
                let mut col = KMat::zero(spec, dim, 1);
                for r in 0..sub {
                    col.set(i * sub + r, 0, v.at(r, 0).clone());
                }
                cand = cand.hstack(&col)?;
            }
        }
        let span = column_basis(&cand)?;
        let module = restricted_module(spec, &lparts, &span, h)?;
        let blocks = decompose_irreducibles(&module, &mut rng)?;
        let mut next = vec![];
        for block in blocks {
            let vecs = span.mul(&block)?;
            let rep = layer_expr(spec, m, h, &vecs.column(0));
            let exprs: Vec<Expr> = basis.iter().map(|(_, _, e)| e.clone()).collect();
            if membership(action, &exprs, &rep, &mut ctx)?.is_none() {
                if basis.len() + vecs.cols() > g_ord {
                    return Err(Error::Inconclusive(
                        "basis exceeded the group order; retry with another seed".into(),
                    ));
                }
                for c in 0..vecs.cols() {
                    let v = vecs.column(c);
                    let e = layer_expr(spec, m, h, &v);
                    basis.push((h, v.clone(), e));
                    next.push(v);
                }
            }
        }
        frontier = next;
    }

    // All columns of the X matrices come from membership solves here.
    let d = basis.len();
    let exprs: Vec<Expr> = basis.iter().map(|(_, _, e)| e.clone()).collect();
    let mut columns: Vec<Vec<Col>> = Vec::with_capacity(m);
    for l in 0..m {
        let mut col_l = Vec::with_capacity(d);
        for b in &exprs {
            let w = Expr::var(l as u32).mul(b);
            let coeffs = membership(action, &exprs, &w, &mut ctx)?.ok_or_else(|| {
                Error::Inconclusive(
                    "basis element product left the module; retry with another seed".into(),
                )
            })?;
            col_l.push(Col::Coeffs(coeffs));
        }
        columns.push(col_l);
    }
    let pres = finalize(action, cfg, &mut ctx, exprs, columns)?;
    let faithful = lparts
        .iter()
        .skip(1)
        .all(|l| *l != KMat::identity(spec, m));
    if faithful {
        let expected = g_ord * (m - 1) + 1;
        if pres.z.len() != expected {
            return Err(Error::Inconclusive(format!(
                "expected {expected} free generators for a faithful linear action, found {}",
                pres.z.len()
            )));
        }
    }
    Ok(pres)
}

/// Action restricted to the span of `span` inside the degree-h word layer,
/// applying each L_g factorwise instead of forming the m^h tensor power.
fn restricted_module(
    spec: &FieldSpec,
    lparts: &[KMat],
    span: &KMat,
    h: usize,
) -> Result<GModule> {
    let mut action = Vec::with_capacity(lparts.len());
    for l in lparts {
        let mut moved = KMat::zero(spec, span.rows(), 0);
        for c in 0..span.cols() {
            moved = moved.hstack(&apply_tensor(l, &span.column(c), h)?)?;
        }
        let a = span
            .solve(&moved)
            .ok_or_else(|| Error::ShapeMismatch("candidate span is not stable".into()))?;
        action.push(a);
    }
    GModule::new(spec.clone(), action)
}

/// Apply L^(tensor h) to a coefficient vector of length m^h.
fn apply_tensor(l: &KMat, v: &KMat, h: usize) -> Result<KMat> {
    let m = l.rows();
    let spec = v.spec().clone();
    let mut cur = v.clone();
    for t in 0..h {
        let stride = m.pow((h - 1 - t) as u32);
        let outer = v.rows() / (m * stride);
        let mut next = KMat::zero(&spec, v.rows(), 1);
        for o in 0..outer {
            for a in 0..m {
                for i in 0..stride {
                    let mut acc = spec.zero();
                    for b in 0..m {
                        let idx = o * m * stride + b * stride + i;
                        acc = acc.add(&l.at(a, b).mul(cur.at(idx, 0)));
                    }
                    next.set(o * m * stride + a * stride + i, 0, acc);
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// Expression for a coefficient vector over degree-h words: index digits are
/// read big-endian, the leading digit being the leftmost letter.
fn layer_expr(spec: &FieldSpec, m: usize, h: usize, v: &KMat) -> Expr {
    let mut acc = Expr::zero(spec);
    for idx in 0..v.rows() {
        let c = v.at(idx, 0);
        if c.is_zero() {
            continue;
        }
        let mut word = Expr::one(spec);
        let mut rest = idx;
        for t in 0..h {
            let digit = rest / m.pow((h - 1 - t) as u32);
            rest %= m.pow((h - 1 - t) as u32);
            word = word.mul(&Expr::var(digit as u32));
        }
        acc = acc.add(&Expr::constant(c.clone()).mul(&word));
    }
    acc
}

/// Assemble X matrices and tags from raw columns, collect the generators,
/// reduce them linearly, and compute the affine decomposition.
fn finalize(
    action: &ActionSpec,
    cfg: &RunConfig,
    ctx: &mut RitCtx,
    basis: Vec<Expr>,
    columns: Vec<Vec<Col>>,
) -> Result<Presentation> {
    let spec = &action.spec;
    let m = action.m;
    let d = basis.len();
    let mut x_mats: Vec<MatM> = (0..m).map(|_| MatM::zero(spec, d, d)).collect();
    let mut tags: Vec<Vec<EntryTag>> = vec![vec![EntryTag::Zero; d * d]; m];
    let mut gens: Vec<Expr> = vec![];
    let mut gen_index: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    for (l, col_l) in columns.iter().enumerate() {
        for (j, col) in col_l.iter().enumerate() {
            match col {
                Col::Unit(i) => {
                    x_mats[l].set(*i, j, Expr::one(spec));
                    tags[l][i * d + j] = EntryTag::One;
                }
                Col::Coeffs(coeffs) => {
                    for (i, c) in coeffs.iter().enumerate() {
                        if c.is_zero_const() {
                            continue;
                        }
                        if c.is_one_const() {
                            x_mats[l].set(i, j, c.clone());
                            tags[l][i * d + j] = EntryTag::One;
                            continue;
                        }
                        // Elimination byproducts can hide a constant 0 or 1;
                        // classify by identity testing before listing them
                        // as generators.
                        if ctx.is_probably_zero(c)? {
                            continue;
                        }
                        if ctx.eq(c, &Expr::one(spec))? {
                            x_mats[l].set(i, j, Expr::one(spec));
                            tags[l][i * d + j] = EntryTag::One;
                            continue;
                        }
                        let idx = *gen_index.entry(c.id()).or_insert_with(|| {
                            gens.push(c.clone());
                            gens.len() - 1
                        });
                        x_mats[l].set(i, j, c.clone());
                        tags[l][i * d + j] = EntryTag::Coefficient(idx);
                    }
                }
            }
        }
    }
    let (selected, combos) = reduce_generators(&gens, spec, m, cfg, ctx)?;
    let z: Vec<Expr> = selected.iter().map(|&i| gens[i].clone()).collect();
    let affine = affine_decomposition(&x_mats, &tags, &combos)?;
    Ok(Presentation {
        spec: spec.clone(),
        m,
        basis,
        x_mats,
        tags,
        gens,
        z,
        combos,
        affine,
    })
}

const REDUCE_SAMPLES_PER_SIZE: usize = 2;
const REDUCE_MAX_SIZE: usize = 6;
const REDUCE_TUPLE_RETRIES: usize = 60;

/// Pick a maximal linearly independent sublist of `gens` (greedy in input
/// order, after the constant 1) by evaluating on random tuples of growing
/// size until the selection stabilizes, and express every generator over
/// {1} u selection with scalar coefficients.
pub fn reduce_generators(
    gens: &[Expr],
    spec: &FieldSpec,
    m: usize,
    cfg: &RunConfig,
    ctx: &mut RitCtx,
) -> Result<(Vec<usize>, KMat)> {
    let mut rng = cfg.rng(0x5245_4455);
    let (eval_spec, emb) = if spec.is_rationals() {
        (spec.clone(), Embedding::identity(spec))
    } else {
        sampling_field(spec, MIN_SAMPLE_FIELD)?
    };
    let gens_e: Vec<Expr> = gens
        .iter()
        .map(|g| embed_constants(g, &emb))
        .collect::<Result<_>>()?;
    // rows[0] belongs to the constant 1; rows[1 + i] to gens[i].
    let mut rows: Vec<Vec<Scalar>> = vec![vec![]; gens.len() + 1];
    let mut prev: Option<Vec<usize>> = None;
    for n in 2..=REDUCE_MAX_SIZE {
        for _ in 0..REDUCE_SAMPLES_PER_SIZE {
            let vals = loop {
                let mut tries = 0;
                let v = loop {
                    let tuple = MatrixTuple::random(&eval_spec, m.max(1), n, &mut rng, 64);
                    let res: Result<Vec<KMat>> =
                        gens_e.iter().map(|g| evaluate(g, &tuple)).collect();
                    match res {
                        Ok(v) => break Some(v),
                        Err(_) => {
                            tries += 1;
                            if tries >= REDUCE_TUPLE_RETRIES {
                                break None;
                            }
                        }
                    }
                };
                match v {
                    Some(v) => break v,
                    None => {
                        return Err(Error::Inconclusive(
                            "could not find an evaluable tuple for generator reduction".into(),
                        ))
                    }
                }
            };
            for (i, val) in std::iter::once(KMat::identity(&eval_spec, n))
                .chain(vals)
                .enumerate()
            {
                for r in 0..n {
                    for c in 0..n {
                        rows[i].push(val.at(r, c).clone());
                    }
                }
            }
        }
        let sel = greedy_select(&rows, &eval_spec)?;
        if prev.as_ref() == Some(&sel) {
            if let Some(combos) = solve_combos(gens, &gens_e, &rows, &sel, spec, &emb, ctx)? {
                return Ok((sel, combos));
            }
        }
        prev = Some(sel);
    }
    Err(Error::SeedRetry)
}

/// Greedy independent sublist of the generator rows, always keeping the
/// constant row first. Returns generator indices.
fn greedy_select(rows: &[Vec<Scalar>], eval_spec: &FieldSpec) -> Result<Vec<usize>> {
    let cols = rows[0].len();
    let mut picked = KMat::from_rows(eval_spec, vec![rows[0].clone()])?;
    let mut sel = vec![];
    for (i, row) in rows.iter().enumerate().skip(1) {
        let cand = picked.vstack(&KMat::from_rows(eval_spec, vec![row.clone()])?)?;
        if cand.rank() == cand.rows() {
            picked = cand;
            sel.push(i - 1);
        }
    }
    debug_assert_eq!(picked.cols(), cols);
    Ok(sel)
}

/// Solve each generator as a combination of {1} u selection, pull the
/// coefficients back to the base field, and verify by identity testing.
/// None when a coefficient leaves the base field (resample in that case).
fn solve_combos(
    gens: &[Expr],
    gens_e: &[Expr],
    rows: &[Vec<Scalar>],
    sel: &[usize],
    spec: &FieldSpec,
    emb: &Embedding,
    ctx: &mut RitCtx,
) -> Result<Option<KMat>> {
    let _ = gens_e;
    let eval_spec = rows[0][0].spec().clone();
    let cols = rows[0].len();
    // Coefficient matrix: columns are the constant row and selected rows.
    let mut a = KMat::zero(&eval_spec, cols, 1 + sel.len());
    for r in 0..cols {
        a.set(r, 0, rows[0][r].clone());
        for (k, &g) in sel.iter().enumerate() {
            a.set(r, 1 + k, rows[1 + g][r].clone());
        }
    }
    let mut combos = KMat::zero(spec, gens.len(), 1 + sel.len());
    for (g, gen) in gens.iter().enumerate() {
        if let Some(k) = sel.iter().position(|&s| s == g) {
            combos.set(g, 1 + k, spec.one());
            continue;
        }
        let mut rhs = KMat::zero(&eval_spec, cols, 1);
        for r in 0..cols {
            rhs.set(r, 0, rows[1 + g][r].clone());
        }
        let sol = match a.solve(&rhs) {
            Some(s) => s,
            None => return Ok(None),
        };
        let mut combo_expr = Expr::zero(spec);
        for k in 0..1 + sel.len() {
            let c = match emb.pull_back(sol.at(k, 0)) {
                Some(c) => c,
                None => return Ok(None),
            };
            let basis_e = if k == 0 {
                Expr::one(spec)
            } else {
                gens[sel[k - 1]].clone()
            };
            combo_expr = combo_expr.add(&Expr::constant(c.clone()).mul(&basis_e));
            combos.set(g, k, c);
        }
        if !ctx.eq(gen, &combo_expr)? {
            return Err(Error::SeedRetry);
        }
    }
    Ok(Some(combos))
}

/// Scalar matrices A_ij with X_i = A_i0 + sum_j z_j A_ij, assembled from
/// the entry tags and the generator combination rows.
fn affine_decomposition(
    x_mats: &[MatM],
    tags: &[Vec<EntryTag>],
    combos: &KMat,
) -> Result<Vec<Vec<KMat>>> {
    let spec = combos.spec().clone();
    let t = combos.cols().saturating_sub(1);
    let mut out = Vec::with_capacity(x_mats.len());
    for (l, x) in x_mats.iter().enumerate() {
        let d = x.rows();
        let mut per_var: Vec<KMat> = (0..=t).map(|_| KMat::zero(&spec, d, d)).collect();
        for i in 0..d {
            for j in 0..d {
                match tags[l][i * d + j] {
                    EntryTag::Zero => {}
                    EntryTag::One => per_var[0].set(i, j, spec.one()),
                    EntryTag::Coefficient(g) => {
                        if g >= combos.rows() {
                            return Err(Error::CoverageGap {
                                mat: l,
                                row: i,
                                col: j,
                            });
                        }
                        for k in 0..=t {
                            per_var[k].set(i, j, combos.at(g, k).clone());
                        }
                    }
                }
            }
        }
        out.push(per_var);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::group::FiniteGroup;

    fn make_action(spec: &FieldSpec, order: usize, images: &[&[&str]]) -> ActionSpec {
        let group = FiniteGroup::cyclic(order);
        let m = images[0].len();
        let images: Vec<Vec<Expr>> = images
            .iter()
            .map(|im| im.iter().map(|s| parse_expr(s, spec).unwrap()).collect())
            .collect();
        ActionSpec::new(group, m, spec.clone(), images).unwrap()
    }

    fn assert_set_eq(pres: &Presentation, expected: &[&str], ctx: &mut RitCtx) {
        assert_eq!(pres.z.len(), expected.len());
        let expected: Vec<Expr> = expected
            .iter()
            .map(|s| parse_expr(s, &pres.spec).unwrap())
            .collect();
        for e in &expected {
            assert!(
                pres.z.iter().any(|z| ctx.eq(z, e).unwrap()),
                "missing generator {e}"
            );
        }
    }

    #[test]
    fn general_sign_action() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "x2"]]);
        let cfg = RunConfig::default();
        let pres = algorithm_general(&a, &cfg).unwrap();
        assert_eq!(pres.dim(), 2);
        assert_eq!(pres.basis[0].to_string(), "1");
        assert_eq!(pres.basis[1].to_string(), "x1");
        let mut ctx = RitCtx::new(&q, &cfg);
        // X = [[0, x^2], [1, 0]], Y = [[y, 0], [0, x^-1 y x]].
        let x = &pres.x_mats[0];
        assert!(x.at(0, 0).is_zero_const());
        assert!(x.at(1, 0).is_one_const());
        assert!(x.at(1, 1).is_zero_const());
        assert!(ctx.eq(x.at(0, 1), &parse_expr("x1*x1", &q).unwrap()).unwrap());
        let y = &pres.x_mats[1];
        assert!(ctx.eq(y.at(0, 0), &parse_expr("x2", &q).unwrap()).unwrap());
        assert!(y.at(1, 0).is_zero_const());
        assert!(y.at(0, 1).is_zero_const());
        assert!(ctx
            .eq(y.at(1, 1), &parse_expr("inv(x1)*x2*x1", &q).unwrap())
            .unwrap());
        assert_set_eq(&pres, &["x1*x1", "x2", "inv(x1)*x2*x1"], &mut ctx);
        // Every reduced generator is invariant.
        for z in &pres.z {
            let moved = a.apply(z, 1).unwrap();
            assert!(ctx.eq(&moved, z).unwrap());
        }
    }

    #[test]
    fn general_defining_relations_hold() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "x2"]]);
        let cfg = RunConfig::default();
        let pres = algorithm_general(&a, &cfg).unwrap();
        let mut ctx = RitCtx::new(&q, &cfg);
        let d = pres.dim();
        for l in 0..pres.m {
            for j in 0..d {
                let lhs = Expr::var(l as u32).mul(&pres.basis[j]);
                let mut rhs = Expr::zero(&q);
                for i in 0..d {
                    rhs = rhs.add(&pres.basis[i].mul(pres.x_mats[l].at(i, j)));
                }
                assert!(ctx.eq(&lhs, &rhs).unwrap(), "relation failed at l={l} j={j}");
            }
        }
    }

    #[test]
    fn general_degree_cap() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "x2"]]);
        let mut cfg = RunConfig::default();
        cfg.max_degree = Some(0);
        assert!(matches!(
            algorithm_general(&a, &cfg),
            Err(Error::DegreeCapExceeded { max_degree: 0 })
        ));
    }

    #[test]
    fn linear_sign_action_matches_general() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "x2"]]);
        let cfg = RunConfig::default();
        let pres = algorithm_linear(&a, &cfg).unwrap();
        assert_eq!(pres.dim(), 2);
        let mut ctx = RitCtx::new(&q, &cfg);
        assert_set_eq(&pres, &["x1*x1", "x2", "inv(x1)*x2*x1"], &mut ctx);
    }

    #[test]
    fn linear_double_sign() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "-x2"]]);
        let cfg = RunConfig::default();
        let pres = algorithm_linear(&a, &cfg).unwrap();
        assert_eq!(pres.dim(), 2);
        let mut ctx = RitCtx::new(&q, &cfg);
        assert_set_eq(&pres, &["x1*x1", "x2*x1", "inv(x1)*x2"], &mut ctx);
    }

    #[test]
    fn linear_scaling_over_f7() {
        let f7 = FieldSpec::prime(7).unwrap();
        let a = make_action(
            &f7,
            3,
            &[&["x1", "x2"], &["2*x1", "x2"], &["4*x1", "x2"]],
        );
        let cfg = RunConfig::default();
        let pres = algorithm_linear(&a, &cfg).unwrap();
        assert_eq!(pres.dim(), 3);
        let mut ctx = RitCtx::new(&f7, &cfg);
        assert_set_eq(
            &pres,
            &["x1*x1*x1", "x2", "inv(x1)*x2*x1", "inv(x1)*inv(x1)*x2*x1*x1"],
            &mut ctx,
        );
    }

    #[test]
    fn general_scaling_over_f7() {
        let f7 = FieldSpec::prime(7).unwrap();
        let a = make_action(
            &f7,
            3,
            &[&["x1", "x2"], &["2*x1", "x2"], &["4*x1", "x2"]],
        );
        let cfg = RunConfig::default();
        let pres = algorithm_general(&a, &cfg).unwrap();
        assert_eq!(pres.dim(), 3);
        assert_eq!(pres.z.len(), 4);
        let mut ctx = RitCtx::new(&f7, &cfg);
        for z in &pres.z {
            let moved = a.apply(z, 1).unwrap();
            assert!(ctx.eq(&moved, z).unwrap());
        }
    }

    #[test]
    fn affine_data_reconstructs_entries() {
        let q = FieldSpec::rationals();
        let a = make_action(&q, 2, &[&["x1", "x2"], &["-x1", "x2"]]);
        let cfg = RunConfig::default();
        let pres = algorithm_general(&a, &cfg).unwrap();
        let mut ctx = RitCtx::new(&q, &cfg);
        let d = pres.dim();
        let t = pres.z.len();
        for l in 0..pres.m {
            for i in 0..d {
                for j in 0..d {
                    let mut rhs = Expr::constant(pres.affine[l][0].at(i, j).clone());
                    for k in 0..t {
                        rhs = rhs.add(
                            &Expr::constant(pres.affine[l][1 + k].at(i, j).clone())
                                .mul(&pres.z[k]),
                        );
                    }
                    assert!(ctx.eq(pres.x_mats[l].at(i, j), &rhs).unwrap());
                }
            }
        }
    }

    #[test]
    fn reduce_drops_dependent_generators() {
        let q = FieldSpec::rationals();
        let cfg = RunConfig::default();
        let mut ctx = RitCtx::new(&q, &cfg);
        let gens = vec![
            parse_expr("x1", &q).unwrap(),
            parse_expr("x2", &q).unwrap(),
            parse_expr("x1 + 2*x2 + 3", &q).unwrap(),
        ];
        let (sel, combos) = reduce_generators(&gens, &q, 2, &cfg, &mut ctx).unwrap();
        assert_eq!(sel, vec![0, 1]);
        assert_eq!(combos.rows(), 3);
        let row: Vec<String> = (0..3).map(|k| combos.at(2, k).to_string()).collect();
        assert_eq!(row, vec!["3", "1", "2"]);
    }
}
