//! Finite groups acting on the free skew field by automorphisms given as
//! rational expressions in the generators.
//!
//! Element 0 is the identity and actions compose on the right:
//! x^(gh) = (x^g)^h. An action file records the multiplication table and,
//! for each group element, the images of x1..xm.


use crate::error::{Error, Result};
use crate::expr::{parse_expr, substitute, Expr, Op};
use crate::field::{FieldSpec, Scalar};
use crate::kmat::KMat;
use crate::linrep::RitCtx;

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<Vec<usize>>,
    inv: Vec<usize>,
}

impl FiniteGroup {
    /// Validate a multiplication table: element 0 must be the identity,
    /// rows and columns must be permutations, the product associative.
    pub fn from_table(table: Vec<Vec<usize>>) -> Result<FiniteGroup> {
        let n = table.len();
        if n == 0 || n > 64 {
            return Err(Error::BadGroup(format!("order {n} out of range")));
        }
        if table.iter().any(|r| r.len() != n) {
            return Err(Error::BadGroup("table is not square".into()));
        }
        if table.iter().flatten().any(|&x| x >= n) {
            return Err(Error::BadGroup("entry out of range".into()));
        }
        for g in 0..n {
            if table[0][g] != g || table[g][0] != g {
                return Err(Error::BadGroup("element 0 is not the identity".into()));
            }
        }
        for g in 0..n {
            let mut seen_row = vec![false; n];
            let mut seen_col = vec![false; n];
            for h in 0..n {
                seen_row[table[g][h]] = true;
                seen_col[table[h][g]] = true;
            }
            if seen_row.iter().any(|&s| !s) || seen_col.iter().any(|&s| !s) {
                return Err(Error::BadGroup(format!(
                    "row or column {g} is not a permutation"
                )));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::BadGroup(format!(
                            "associativity fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let mut inv = vec![0; n];
        for g in 0..n {
            match (0..n).find(|&h| table[g][h] == 0) {
                Some(h) => inv[g] = h,
                None => return Err(Error::BadGroup(format!("no inverse for {g}"))),
            }
        }
        Ok(FiniteGroup { order: n, table, inv })
    }

    pub fn cyclic(n: usize) -> FiniteGroup {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::from_table(table).unwrap()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn table(&self) -> &Vec<Vec<usize>> {
        &self.table
    }
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ActionSpec {
    pub group: FiniteGroup,
    pub m: usize,
    pub spec: FieldSpec,
    /// images[g][j] is the expression for x_{j+1}^g.
    pub images: Vec<Vec<Expr>>,
}

/// Outcome of validating an action.
#[derive(Clone, Debug)]
pub struct ActionReport {
    /// Elements acting as the identity on all generators; faithful when
    /// this is just {0}.
    pub kernel: Vec<usize>,
}

impl ActionReport {
    pub fn is_faithful(&self) -> bool {
        self.kernel == [0]
    }
}

impl ActionSpec {
    pub fn new(
        group: FiniteGroup,
        m: usize,
        spec: FieldSpec,
        images: Vec<Vec<Expr>>,
    ) -> Result<ActionSpec> {
        if images.len() != group.order() {
            return Err(Error::ActionInvalid(format!(
                "expected images for {} elements, found {}",
                group.order(),
                images.len()
            )));
        }
        if images.iter().any(|im| im.len() != m) {
            return Err(Error::ActionInvalid(format!(
                "each element must map all {m} generators"
            )));
        }
        Ok(ActionSpec {
            group,
            m,
            spec,
            images,
        })
    }

    /// Apply g to an expression.
    pub fn apply(&self, e: &Expr, g: usize) -> Result<Expr> {
        substitute(e, &self.images[g])
    }

    /// Check the group laws hold for the images (identity acts trivially,
    /// composition matches the table) using the randomized equality test,
    /// and report the kernel.
    pub fn verify(&self, ctx: &mut RitCtx) -> Result<ActionReport> {
        let n = self.group.order();
        let vars: Vec<Expr> = (0..self.m).map(|j| Expr::var(j as u32)).collect();
        for (j, v) in vars.iter().enumerate() {
            if !ctx.eq(&self.images[0][j], v)? {
                return Err(Error::ActionInvalid(
                    "element 0 does not act as the identity".into(),
                ));
            }
        }
        for g in 1..n {
            for h in 1..n {
                let gh = self.group.mul(g, h);
                for j in 0..self.m {
                    let composed = substitute(&self.images[g][j], &self.images[h])?;
                    if !ctx.eq(&composed, &self.images[gh][j])? {
                        return Err(Error::ActionInvalid(format!(
                            "composition fails: (x{}^g{g})^g{h} != x{}^g{gh}",
                            j + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        let mut kernel = vec![0];
        for g in 1..n {
            let mut trivial = true;
            for (j, v) in vars.iter().enumerate() {
                if !ctx.eq(&self.images[g][j], v)? {
                    trivial = false;
                    break;
                }
            }
            if trivial {
                kernel.push(g);
            }
        }
        Ok(ActionReport { kernel })
    }

    /// Reynolds operator: the average of the orbit of e. Requires the group
    /// order invertible in the ground field.
    pub fn reynolds(&self, e: &Expr) -> Result<Expr> {
        let n = self.group.order() as i64;
        let p = self.spec.characteristic();
        if p != 0 && (n as u64) % p == 0 {
            return Err(Error::CharDivides);
        }
        let mut acc = Expr::zero(&self.spec);
        for g in 0..self.group.order() {
            acc = acc.add(&self.apply(e, g)?);
        }
        let scale = Expr::constant(self.spec.from_i64(n).inv()?);
        Ok(scale.mul(&acc))
    }

    /// The G-matrix of a list of expressions: row g, column j holds b_j^g.
    pub fn g_matrix(&self, basis: &[Expr]) -> Result<crate::matm::MatM> {
        let n = self.group.order();
        let mut rows = Vec::with_capacity(n);
        for g in 0..n {
            let mut row = Vec::with_capacity(basis.len());
            for b in basis {
                row.push(self.apply(b, g)?);
            }
            rows.push(row);
        }
        crate::matm::MatM::from_rows(&self.spec, rows)
    }

    /// The G-column of a single expression: entry g holds w^g.
    pub fn g_column(&self, w: &Expr) -> Result<crate::matm::MatM> {
        let n = self.group.order();
        let mut rows = Vec::with_capacity(n);
        for g in 0..n {
            rows.push(vec![self.apply(w, g)?]);
        }
        crate::matm::MatM::from_rows(&self.spec, rows)
    }

    /// Matrices L_g of a linear action, with the convention
    /// x_i^g = sum_j (L_g)_{ji} x_j; None when some image is not a
    /// syntactic linear combination of the generators.
    pub fn linear_part(&self) -> Option<Vec<KMat>> {
        let mut out = Vec::with_capacity(self.group.order());
        for im in &self.images {
            let mut l = KMat::zero(&self.spec, self.m, self.m);
            for (i, e) in im.iter().enumerate() {
                let coeffs = linear_coeffs(e, self.m, &self.spec)?;
                for (j, c) in coeffs.into_iter().enumerate() {
                    l.set(j, i, c);
                }
            }
            out.push(l);
        }
        Some(out)
    }

    // -----------------------------------------------------------------------
    // JSON
    // -----------------------------------------------------------------------

    pub fn to_json(&self) -> serde_json::Value {
        let images: serde_json::Map<String, serde_json::Value> = (0..self.group.order())
            .map(|g| {
                (
                    g.to_string(),
                    serde_json::Value::Array(
                        self.images[g]
                            .iter()
                            .map(|e| serde_json::Value::String(e.to_string()))
                            .collect(),
                    ),
                )
            })
            .collect();
        serde_json::json!({
            "field": self.spec.to_string(),
            "m": self.m,
            "group": {
                "order": self.group.order(),
                "table": self.group.table(),
            },
            "images": images,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<ActionSpec> {
        let field_s = v
            .get("field")
            .and_then(|x| x.as_str())
            .ok_or_else(|| Error::ActionInvalid("missing \"field\"".into()))?;
        let spec = FieldSpec::parse(field_s)?;
        let m = v
            .get("m")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::ActionInvalid("missing \"m\"".into()))? as usize;
        let group_v = v
            .get("group")
            .ok_or_else(|| Error::ActionInvalid("missing \"group\"".into()))?;
        let order = group_v
            .get("order")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::ActionInvalid("missing group order".into()))?
            as usize;
        let table_v = group_v
            .get("table")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::ActionInvalid("missing group table".into()))?;
        let table: Vec<Vec<usize>> = table_v
            .iter()
            .map(|row| {
                row.as_array()
                    .map(|r| {
                        r.iter()
                            .map(|x| x.as_u64().map(|u| u as usize))
                            .collect::<Option<Vec<usize>>>()
                    })
                    .flatten()
                    .ok_or_else(|| Error::ActionInvalid("bad table row".into()))
            })
            .collect::<Result<_>>()?;
        let group = FiniteGroup::from_table(table)?;
        if group.order() != order {
            return Err(Error::ActionInvalid("order does not match table".into()));
        }
        let images_v = v
            .get("images")
            .and_then(|x| x.as_object())
            .ok_or_else(|| Error::ActionInvalid("missing \"images\"".into()))?;
        let mut images = vec![None; group.order()];
        for (key, arr) in images_v {
            let g: usize = key
                .parse()
                .map_err(|_| Error::ActionInvalid(format!("bad element id '{key}'")))?;
            if g >= group.order() {
                return Err(Error::ActionInvalid(format!("element id {g} out of range")));
            }
            let exprs = arr
                .as_array()
                .ok_or_else(|| Error::ActionInvalid("images must be arrays".into()))?
                .iter()
                .map(|s| {
                    s.as_str()
                        .ok_or_else(|| Error::ActionInvalid("image must be a string".into()))
                        .and_then(|s| parse_expr(s, &spec))
                })
                .collect::<Result<Vec<Expr>>>()?;
            images[g] = Some(exprs);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(g, im)| im.ok_or_else(|| Error::ActionInvalid(format!("no images for {g}"))))
            .collect::<Result<Vec<_>>>()?;
        ActionSpec::new(group, m, spec, images)
    }
}

/// Coefficients (c_1, ..., c_m) when e = sum_i c_i x_i syntactically.
fn linear_coeffs(e: &Expr, m: usize, spec: &FieldSpec) -> Option<Vec<Scalar>> {
    let mut coeffs = vec![spec.zero(); m];
    let mut add_term = |t: &Expr, sign_neg: bool| -> Option<()> {
        let (c, var) = match t.op() {
            Op::Var(i) => (spec.one(), *i as usize),
            Op::Neg(inner) => match inner.op() {
                Op::Var(i) => (spec.one().neg(), *i as usize),
                Op::Prod(fs) => {
                    let [a, b] = fs.as_slice() else { return None };
                    match (a.as_const(), b.op()) {
                        (Some(c), Op::Var(i)) => (c.neg(), *i as usize),
                        _ => return None,
                    }
                }
                _ => return None,
            },
            Op::Prod(fs) => {
                let [a, b] = fs.as_slice() else { return None };
                match (a.as_const(), b.op()) {
                    (Some(c), Op::Var(i)) => (c.clone(), *i as usize),
                    _ => return None,
                }
            }
            _ => return None,
        };
        if var >= m {
            return None;
        }
        let c = if sign_neg { c.neg() } else { c };
        coeffs[var] = coeffs[var].add(&c);
        Some(())
    };
    match e.op() {
        Op::Sum(terms) => {
            for t in terms {
                add_term(t, false)?;
            }
        }
        Op::Const(c) if c.is_zero() => {}
        _ => add_term(e, false)?,
    }
    Some(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linrep::RunConfig;

    fn q() -> FieldSpec {
        FieldSpec::rationals()
    }

    fn sign_action() -> ActionSpec {
        // Z/2 acting by x -> -x, y -> -y.
        let g = FiniteGroup::cyclic(2);
        let images = vec![
            vec![parse_expr("x1", &q()).unwrap(), parse_expr("x2", &q()).unwrap()],
            vec![
                parse_expr("-x1", &q()).unwrap(),
                parse_expr("-x2", &q()).unwrap(),
            ],
        ];
        ActionSpec::new(g, 2, q(), images).unwrap()
    }

    #[test]
    fn group_table_validation() {
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 0]]).is_ok());
        // Not associative / not a Latin square.
        assert!(FiniteGroup::from_table(vec![vec![0, 1], vec![1, 1]]).is_err());
        // Identity not at 0.
        assert!(FiniteGroup::from_table(vec![vec![1, 0], vec![0, 1]]).is_err());
        let s3 = FiniteGroup::from_table(vec![
            vec![0, 1, 2, 3, 4, 5],
            vec![1, 0, 4, 5, 2, 3],
            vec![2, 5, 0, 4, 3, 1],
            vec![3, 4, 5, 0, 1, 2],
            vec![4, 3, 1, 2, 5, 0],
            vec![5, 2, 3, 1, 0, 4],
        ]);
        assert!(s3.is_ok());
        let s3 = s3.unwrap();
        for g in 0..6 {
            assert_eq!(s3.mul(g, s3.inv(g)), 0);
        }
    }

    #[test]
    fn action_verifies_and_is_faithful() {
        let a = sign_action();
        let mut ctx = RitCtx::new(&q(), &RunConfig::default());
        let report = a.verify(&mut ctx).unwrap();
        assert!(report.is_faithful());
    }

    #[test]
    fn invalid_composition_rejected() {
        // x -> x + 1 does not square to the identity in Z/2.
        let g = FiniteGroup::cyclic(2);
        let images = vec![
            vec![parse_expr("x1", &q()).unwrap()],
            vec![parse_expr("x1 + 1", &q()).unwrap()],
        ];
        let a = ActionSpec::new(g, 1, q(), images).unwrap();
        let mut ctx = RitCtx::new(&q(), &RunConfig::default());
        assert!(matches!(a.verify(&mut ctx), Err(Error::ActionInvalid(_))));
    }

    #[test]
    fn reynolds_is_invariant() {
        let a = sign_action();
        let mut ctx = RitCtx::new(&q(), &RunConfig::default());
        let e = parse_expr("x1*x1 + x2", &q()).unwrap();
        let r = a.reynolds(&e).unwrap();
        let r_flipped = a.apply(&r, 1).unwrap();
        assert!(ctx.eq(&r, &r_flipped).unwrap());
        // x^2 is invariant, y is not: Reynolds keeps x^2 and kills nothing
        // here but averages y to 0.
        let want = parse_expr("x1*x1", &q()).unwrap();
        assert!(ctx.eq(&r, &want).unwrap());
    }

    #[test]
    fn char_divides_detected() {
        let f2 = FieldSpec::prime(2).unwrap();
        let g = FiniteGroup::cyclic(2);
        let images = vec![
            vec![parse_expr("x1", &f2).unwrap()],
            vec![parse_expr("x1 + 1", &f2).unwrap()],
        ];
        let a = ActionSpec::new(g, 1, f2, images).unwrap();
        assert!(matches!(
            a.reynolds(&Expr::var(0)),
            Err(Error::CharDivides)
        ));
    }

    #[test]
    fn linear_part_extraction() {
        let a = sign_action();
        let l = a.linear_part().unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l[0], KMat::identity(&q(), 2));
        assert_eq!(l[1], KMat::identity(&q(), 2).neg());
        // Swap action over F2.
        let f2 = FieldSpec::prime(2).unwrap();
        let g = FiniteGroup::cyclic(2);
        let images = vec![
            vec![
                parse_expr("x1", &f2).unwrap(),
                parse_expr("x2", &f2).unwrap(),
            ],
            vec![
                parse_expr("x2", &f2).unwrap(),
                parse_expr("x1", &f2).unwrap(),
            ],
        ];
        let swap = ActionSpec::new(g, 2, f2.clone(), images).unwrap();
        let l = swap.linear_part().unwrap();
        assert_eq!(*l[1].at(0, 0), f2.zero());
        assert_eq!(*l[1].at(1, 0), f2.one());
        // A rational (nonlinear) action has no linear part.
        let g2 = FiniteGroup::cyclic(2);
        let images = vec![
            vec![parse_expr("x1", &q()).unwrap()],
            vec![parse_expr("x1^-1", &q()).unwrap()],
        ];
        let rat = ActionSpec::new(g2, 1, q(), images).unwrap();
        assert!(rat.linear_part().is_none());
    }

    #[test]
    fn json_roundtrip() {
        let a = sign_action();
        let j = a.to_json();
        let b = ActionSpec::from_json(&j).unwrap();
        assert_eq!(b.m, 2);
        assert_eq!(b.group, a.group);
        for g in 0..2 {
            for j in 0..2 {
                assert_eq!(b.images[g][j], a.images[g][j]);
            }
        }
    }

    #[test]
    fn g_matrix_layout() {
        let a = sign_action();
        let basis = vec![
            Expr::one(&q()),
            parse_expr("x1", &q()).unwrap(),
        ];
        let gm = a.g_matrix(&basis).unwrap();
        assert_eq!((gm.rows(), gm.cols()), (2, 2));
        assert_eq!(*gm.at(0, 1), parse_expr("x1", &q()).unwrap());
        assert_eq!(*gm.at(1, 1), parse_expr("-x1", &q()).unwrap());
    }
}
