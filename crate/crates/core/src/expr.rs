//! Formal noncommutative rational expressions in variables x1, x2, ...:
//! a hash-consed DAG with smart constructors, a parser and printer for the
//! textual grammar, evaluation on square-matrix tuples, and substitution.
//!
//! Grammar:
//!   expr   := term (('+'|'-') term)*
//!   term   := factor ('*' factor)*
//!   factor := '-' factor | atom ('^-1')*
//!   atom   := VAR | RATIONAL | '(' expr ')' | 'inv(' expr ')'
//!   VAR    := 'x' [1-9][0-9]*
//!   RATIONAL := INT ('/' POSINT)?

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, Weak};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};
use crate::field::{Embedding, FieldSpec, Scalar};
use crate::kmat::KMat;

// ---------------------------------------------------------------------------
// DAG nodes and interning
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum Op {
    Const(Scalar),
    /// Zero-based variable index; prints as x{index+1}.
    Var(u32),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Neg(Expr),
    Inv(Expr),
}

#[derive(Debug)]
pub struct Node {
    id: u64,
    op: Op,
}

/// A shared, immutable expression. Clones are pointer copies; structural
/// equality is id equality thanks to hash-consing.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}
impl Eq for Expr {}
impl std::hash::Hash for Expr {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}

#[derive(PartialEq, Eq, Hash)]
enum Key {
    Const(Scalar),
    Var(u32),
    Sum(Vec<u64>),
    Prod(Vec<u64>),
    Neg(u64),
    Inv(u64),
}

struct Interner {
    map: HashMap<Key, Weak<Node>>,
    next_id: u64,
}

static INTERNER: Lazy<Mutex<Interner>> = Lazy::new(|| {
    Mutex::new(Interner {
        map: HashMap::new(),
        next_id: 0,
    })
});

fn key_of(op: &Op) -> Key {
    match op {
        Op::Const(c) => Key::Const(c.clone()),
        Op::Var(i) => Key::Var(*i),
        Op::Sum(v) => Key::Sum(v.iter().map(|e| e.id()).collect()),
        Op::Prod(v) => Key::Prod(v.iter().map(|e| e.id()).collect()),
        Op::Neg(e) => Key::Neg(e.id()),
        Op::Inv(e) => Key::Inv(e.id()),
    }
}

fn intern(op: Op) -> Expr {
    let key = key_of(&op);
    let mut guard = INTERNER.lock().unwrap();
    if let Some(w) = guard.map.get(&key) {
        if let Some(node) = w.upgrade() {
            return Expr(node);
        }
    }
    let id = guard.next_id;
    guard.next_id += 1;
    let node = Arc::new(Node { id, op });
    guard.map.insert(key, Arc::downgrade(&node));
    Expr(node)
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

impl Expr {
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn op(&self) -> &Op {
        &self.0.op
    }

    pub fn constant(c: Scalar) -> Expr {
        intern(Op::Const(c))
    }

    pub fn zero(spec: &FieldSpec) -> Expr {
        Expr::constant(spec.zero())
    }

    pub fn one(spec: &FieldSpec) -> Expr {
        Expr::constant(spec.one())
    }

    pub fn int(spec: &FieldSpec, n: i64) -> Expr {
        Expr::constant(spec.from_i64(n))
    }

    /// Variable with zero-based index; `var(0)` is x1.
    pub fn var(index: u32) -> Expr {
        intern(Op::Var(index))
    }

    pub fn as_const(&self) -> Option<&Scalar> {
        match self.op() {
            Op::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_const().map_or(false, |c| c.is_zero())
    }

    pub fn is_one_const(&self) -> bool {
        self.as_const().map_or(false, |c| c.is_one())
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut terms: Vec<Expr> = vec![];
        let mut const_acc: Option<Scalar> = None;
        let push = |e: &Expr, terms: &mut Vec<Expr>, const_acc: &mut Option<Scalar>| {
            if let Some(c) = e.as_const() {
                *const_acc = Some(match const_acc.take() {
                    None => c.clone(),
                    Some(acc) => acc.add(c),
                });
            } else {
                terms.push(e.clone());
            }
        };
        for side in [self, other] {
            match side.op() {
                Op::Sum(v) => {
                    for t in v {
                        push(t, &mut terms, &mut const_acc);
                    }
                }
                _ => push(side, &mut terms, &mut const_acc),
            }
        }
        if let Some(c) = const_acc {
            if !c.is_zero() || terms.is_empty() {
                terms.push(Expr::constant(c));
            }
        }
        match terms.len() {
            0 => unreachable!("sum of no terms"),
            1 => terms.pop().unwrap(),
            _ => intern(Op::Sum(terms)),
        }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        match self.op() {
            Op::Neg(inner) => inner.clone(),
            Op::Const(c) => Expr::constant(c.neg()),
            _ => intern(Op::Neg(self.clone())),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        // Constants are central: fold them to the front.
        let mut factors: Vec<Expr> = vec![];
        let mut const_acc: Option<Scalar> = None;
        let push = |e: &Expr, factors: &mut Vec<Expr>, const_acc: &mut Option<Scalar>| {
            if let Some(c) = e.as_const() {
                *const_acc = Some(match const_acc.take() {
                    None => c.clone(),
                    Some(acc) => acc.mul(c),
                });
            } else {
                factors.push(e.clone());
            }
        };
        for side in [self, other] {
            match side.op() {
                Op::Prod(v) => {
                    for t in v {
                        push(t, &mut factors, &mut const_acc);
                    }
                }
                _ => push(side, &mut factors, &mut const_acc),
            }
        }
        if let Some(c) = &const_acc {
            if c.is_zero() {
                return Expr::constant(c.clone());
            }
        }
        if let Some(c) = const_acc {
            if !c.is_one() || factors.is_empty() {
                factors.insert(0, Expr::constant(c));
            }
        }
        match factors.len() {
            0 => unreachable!("product of no factors"),
            1 => factors.pop().unwrap(),
            _ => intern(Op::Prod(factors)),
        }
    }

    pub fn inv(&self) -> Result<Expr> {
        match self.op() {
            Op::Inv(inner) => Ok(inner.clone()),
            Op::Const(c) => Ok(Expr::constant(c.inv()?)),
            Op::Neg(inner) => Ok(inner.inv()?.neg()),
            _ => Ok(intern(Op::Inv(self.clone()))),
        }
    }

    /// Integer power; negative exponents go through `inv`.
    pub fn pow(&self, e: i64) -> Result<Expr> {
        if e < 0 {
            return self.inv()?.pow(-e);
        }
        let mut acc: Option<Expr> = None;
        for _ in 0..e {
            acc = Some(match acc {
                None => self.clone(),
                Some(a) => a.mul(self),
            });
        }
        Ok(acc.unwrap_or_else(|| {
            // x^0: need a spec; use the spec of a constant subterm if any,
            // otherwise default to an abstract 1 over Q.
            match self.any_const_spec() {
                Some(spec) => Expr::one(&spec),
                None => Expr::one(&FieldSpec::rationals()),
            }
        }))
    }

    fn any_const_spec(&self) -> Option<FieldSpec> {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.op() {
                Op::Const(c) => return Some(c.spec().clone()),
                Op::Var(_) => {}
                Op::Sum(v) | Op::Prod(v) => stack.extend(v.iter().cloned()),
                Op::Neg(inner) | Op::Inv(inner) => stack.push(inner.clone()),
            }
        }
        None
    }

    /// Number of variables: one plus the largest index occurring.
    pub fn num_vars(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut max: Option<u32> = None;
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.op() {
                Op::Var(i) => max = Some(max.map_or(*i, |m| m.max(*i))),
                Op::Const(_) => {}
                Op::Sum(v) | Op::Prod(v) => stack.extend(v.iter().cloned()),
                Op::Neg(inner) | Op::Inv(inner) => stack.push(inner.clone()),
            }
        }
        max.map_or(0, |m| m as usize + 1)
    }

    /// Number of distinct DAG nodes reachable from this expression.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.op() {
                Op::Sum(v) | Op::Prod(v) => stack.extend(v.iter().cloned()),
                Op::Neg(inner) | Op::Inv(inner) => stack.push(inner.clone()),
                _ => {}
            }
        }
        seen.len()
    }

    /// Number of inversion nodes reachable (the "inversion height" proxy
    /// used when sizing randomized tests).
    pub fn inv_count(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        let mut count = 0;
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.op() {
                Op::Sum(v) | Op::Prod(v) => stack.extend(v.iter().cloned()),
                Op::Neg(inner) => stack.push(inner.clone()),
                Op::Inv(inner) => {
                    count += 1;
                    stack.push(inner.clone());
                }
                _ => {}
            }
        }
        count
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

#[derive(PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Prod,
    Factor,
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, min_prec: Prec) -> fmt::Result {
    let prec = match e.op() {
        Op::Sum(_) => Prec::Sum,
        Op::Prod(_) | Op::Neg(_) => Prec::Prod,
        _ => Prec::Factor,
    };
    let paren = prec < min_prec;
    if paren {
        write!(f, "(")?;
    }
    match e.op() {
        Op::Const(c) => write!(f, "{c}")?,
        Op::Var(i) => write!(f, "x{}", i + 1)?,
        Op::Sum(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    if let Op::Neg(inner) = t.op() {
                        write!(f, " - ")?;
                        write_expr(inner, f, Prec::Prod)?;
                        continue;
                    }
                    write!(f, " + ")?;
                }
                write_expr(t, f, Prec::Prod)?;
            }
        }
        Op::Prod(factors) => {
            for (i, t) in factors.iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                write_expr(t, f, Prec::Factor)?;
            }
        }
        Op::Neg(inner) => {
            write!(f, "-")?;
            write_expr(inner, f, Prec::Factor)?;
        }
        Op::Inv(inner) => {
            write!(f, "inv(")?;
            write_expr(inner, f, Prec::Sum)?;
            write!(f, ")")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, Prec::Sum)
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    spec: FieldSpec,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn starts_with(&mut self, s: &str) -> bool {
        self.skip_ws();
        self.bytes[self.pos..].starts_with(s.as_bytes())
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let t = self.term()?;
                acc = acc.add(&t);
            } else if self.eat(b'-') {
                let t = self.term()?;
                acc = acc.sub(&t);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            let t = self.factor()?;
            acc = acc.mul(&t);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(inner.neg());
        }
        let mut atom = self.atom()?;
        while self.eat(b'^') {
            let neg = self.eat(b'-');
            let n = self.integer()?;
            let e = if neg { -(n as i64) } else { n as i64 };
            atom = atom.pow(e).map_err(|_| self.err("inverse of zero"))?;
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.starts_with("inv(") {
            self.pos += 4;
            let inner = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected ')'"));
            }
            return inner.inv().map_err(|_| self.err("inverse of zero"));
        }
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self
                    .bytes
                    .get(self.pos)
                    .map_or(false, |b| b.is_ascii_digit())
                {
                    self.pos += 1;
                }
                if start == self.pos || self.bytes[start] == b'0' {
                    return Err(self.err("variable must be x1, x2, ..."));
                }
                let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                let idx: u32 = text
                    .parse()
                    .map_err(|_| self.err("variable index out of range"))?;
                Ok(Expr::var(idx - 1))
            }
            Some(b) if b.is_ascii_digit() => {
                let num = self.integer()?;
                if self.eat(b'/') {
                    let den = self.integer()?;
                    if den == 0 {
                        return Err(self.err("zero denominator"));
                    }
                    let d = self
                        .spec
                        .from_i64(den as i64)
                        .inv()
                        .map_err(|_| self.err("denominator vanishes in this field"))?;
                    Ok(Expr::constant(self.spec.from_i64(num as i64).mul(&d)))
                } else {
                    Ok(Expr::int(&self.spec, num as i64))
                }
            }
            _ => Err(self.err("expected a variable, number, or '('")),
        }
    }

    fn integer(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .map_or(false, |b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("number out of range"))
    }
}

/// Parse an expression; numeric literals become constants in `spec`.
pub fn parse_expr(text: &str, spec: &FieldSpec) -> Result<Expr> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        spec: spec.clone(),
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Matrix tuples and evaluation
// ---------------------------------------------------------------------------

/// A tuple of n x n matrices, one per variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixTuple {
    pub n: usize,
    pub mats: Vec<KMat>,
}

impl MatrixTuple {
    pub fn new(mats: Vec<KMat>) -> Result<MatrixTuple> {
        let n = mats.first().map_or(0, |m| m.rows());
        for m in &mats {
            if m.rows() != n || m.cols() != n {
                return Err(Error::ShapeMismatch(
                    "all tuple entries must be square of equal size".into(),
                ));
            }
        }
        Ok(MatrixTuple { n, mats })
    }

    pub fn spec(&self) -> Option<&FieldSpec> {
        self.mats.first().map(|m| m.spec())
    }

    pub fn random(
        spec: &FieldSpec,
        m: usize,
        n: usize,
        rng: &mut impl rand::Rng,
        bound: u64,
    ) -> MatrixTuple {
        let mats = (0..m).map(|_| KMat::random(spec, n, n, rng, bound)).collect();
        MatrixTuple { n, mats }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mats: Vec<Vec<Vec<String>>> = self
            .mats
            .iter()
            .map(|m| {
                (0..m.rows())
                    .map(|i| (0..m.cols()).map(|j| m.at(i, j).to_string()).collect())
                    .collect()
            })
            .collect();
        serde_json::json!({ "n": self.n, "mats": mats })
    }

    pub fn from_json(spec: &FieldSpec, v: &serde_json::Value) -> Result<MatrixTuple> {
        let n = v
            .get("n")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| Error::ParamError("tuple JSON missing \"n\"".into()))?
            as usize;
        let mats_v = v
            .get("mats")
            .and_then(|x| x.as_array())
            .ok_or_else(|| Error::ParamError("tuple JSON missing \"mats\"".into()))?;
        let mut mats = vec![];
        for mv in mats_v {
            let rows_v = mv
                .as_array()
                .ok_or_else(|| Error::ParamError("matrix must be an array of rows".into()))?;
            if rows_v.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "expected {n} rows, found {}",
                    rows_v.len()
                )));
            }
            let mut rows = vec![];
            for rv in rows_v {
                let cells = rv
                    .as_array()
                    .ok_or_else(|| Error::ParamError("row must be an array".into()))?;
                if cells.len() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "expected {n} columns, found {}",
                        cells.len()
                    )));
                }
                let mut row = vec![];
                for cell in cells {
                    let s = cell
                        .as_str()
                        .ok_or_else(|| Error::ParamError("matrix entries must be strings".into()))?;
                    row.push(Scalar::parse(spec, s)?);
                }
                rows.push(row);
            }
            mats.push(KMat::from_rows(spec, rows)?);
        }
        MatrixTuple::new(mats)
    }
}

/// Evaluate an expression at a matrix tuple. Constants must convert
/// canonically into the tuple's field (use `map_constants` with an
/// `Embedding` first for general extensions). Singular inverses surface as
/// `Domain` errors naming the offending subexpression.
pub fn evaluate(expr: &Expr, tuple: &MatrixTuple) -> Result<KMat> {
    let spec = tuple
        .spec()
        .ok_or_else(|| Error::ParamError("empty matrix tuple".into()))?
        .clone();
    let mut memo: HashMap<u64, KMat> = HashMap::new();
    eval_rec(expr, tuple, &spec, &mut memo)
}

fn eval_rec(
    e: &Expr,
    tuple: &MatrixTuple,
    spec: &FieldSpec,
    memo: &mut HashMap<u64, KMat>,
) -> Result<KMat> {
    if let Some(m) = memo.get(&e.id()) {
        return Ok(m.clone());
    }
    let n = tuple.n;
    let out = match e.op() {
        Op::Const(c) => {
            let cc = c.convert_to(spec)?;
            KMat::identity(spec, n).scale(&cc)
        }
        Op::Var(i) => {
            let i = *i as usize;
            tuple
                .mats
                .get(i)
                .cloned()
                .ok_or(Error::UnknownVariable {
                    index: i + 1,
                    nvars: tuple.mats.len(),
                })?
        }
        Op::Sum(terms) => {
            let mut acc = KMat::zero(spec, n, n);
            for t in terms {
                let m = eval_rec(t, tuple, spec, memo)?;
                acc = acc.add(&m)?;
            }
            acc
        }
        Op::Prod(factors) => {
            let mut acc: Option<KMat> = None;
            for t in factors {
                let m = eval_rec(t, tuple, spec, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.mul(&m)?,
                });
            }
            acc.unwrap()
        }
        Op::Neg(inner) => eval_rec(inner, tuple, spec, memo)?.neg(),
        Op::Inv(inner) => {
            let m = eval_rec(inner, tuple, spec, memo)?;
            m.inverse().map_err(|_| Error::Domain {
                node: clip(&inner.to_string()),
            })?
        }
    };
    memo.insert(e.id(), out.clone());
    Ok(out)
}

fn clip(s: &str) -> String {
    if s.len() <= 80 {
        s.to_string()
    } else {
        format!("{}...", &s[..77])
    }
}

/// Rebuild the expression with every constant passed through `f`
/// (field embedding, reduction mod p, ...).
pub fn map_constants(expr: &Expr, f: &impl Fn(&Scalar) -> Result<Scalar>) -> Result<Expr> {
    let mut memo = HashMap::new();
    map_const_rec(expr, f, &mut memo)
}

fn map_const_rec(
    e: &Expr,
    f: &impl Fn(&Scalar) -> Result<Scalar>,
    memo: &mut HashMap<u64, Expr>,
) -> Result<Expr> {
    if let Some(out) = memo.get(&e.id()) {
        return Ok(out.clone());
    }
    let out = match e.op() {
        Op::Const(c) => Expr::constant(f(c)?),
        Op::Var(_) => e.clone(),
        Op::Sum(terms) => {
            let mut acc: Option<Expr> = None;
            for t in terms {
                let m = map_const_rec(t, f, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.add(&m),
                });
            }
            acc.unwrap()
        }
        Op::Prod(factors) => {
            let mut acc: Option<Expr> = None;
            for t in factors {
                let m = map_const_rec(t, f, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.mul(&m),
                });
            }
            acc.unwrap()
        }
        Op::Neg(inner) => map_const_rec(inner, f, memo)?.neg(),
        Op::Inv(inner) => map_const_rec(inner, f, memo)?.inv()?,
    };
    memo.insert(e.id(), out.clone());
    Ok(out)
}

/// Constants embedded along `emb` (identity embeddings are free).
pub fn embed_constants(expr: &Expr, emb: &Embedding) -> Result<Expr> {
    if emb.is_identity() {
        return Ok(expr.clone());
    }
    map_constants(expr, &|c: &Scalar| Ok(emb.embed(c)))
}

/// Substitute `images[i]` for variable i throughout; structure is shared.
pub fn substitute(expr: &Expr, images: &[Expr]) -> Result<Expr> {
    let mut memo = HashMap::new();
    subst_rec(expr, images, &mut memo)
}

fn subst_rec(e: &Expr, images: &[Expr], memo: &mut HashMap<u64, Expr>) -> Result<Expr> {
    if let Some(out) = memo.get(&e.id()) {
        return Ok(out.clone());
    }
    let out = match e.op() {
        Op::Const(_) => e.clone(),
        Op::Var(i) => images
            .get(*i as usize)
            .cloned()
            .ok_or(Error::UnknownVariable {
                index: *i as usize + 1,
                nvars: images.len(),
            })?,
        Op::Sum(terms) => {
            let mut acc: Option<Expr> = None;
            for t in terms {
                let m = subst_rec(t, images, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.add(&m),
                });
            }
            acc.unwrap()
        }
        Op::Prod(factors) => {
            let mut acc: Option<Expr> = None;
            for t in factors {
                let m = subst_rec(t, images, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.mul(&m),
                });
            }
            acc.unwrap()
        }
        Op::Neg(inner) => subst_rec(inner, images, memo)?.neg(),
        Op::Inv(inner) => subst_rec(inner, images, memo)?.inv()?,
    };
    memo.insert(e.id(), out.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn q() -> FieldSpec {
        FieldSpec::rationals()
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let a = parse_expr("x1*x2 + x1*x2", &q()).unwrap();
        let b = parse_expr("x1*x2", &q()).unwrap();
        if let Op::Sum(terms) = a.op() {
            assert_eq!(terms[0], b);
            assert_eq!(terms[1], b);
        } else {
            panic!("expected a sum");
        }
    }

    #[test]
    fn constant_folding() {
        let e = parse_expr("2/3 + 1/3", &q()).unwrap();
        assert!(e.is_one_const());
        let z = parse_expr("0*x1", &q()).unwrap();
        assert!(z.is_zero_const());
        let one = parse_expr("x1*x1^-1", &q()).unwrap();
        // No rewriting of x*x^-1: products keep their factors.
        assert!(one.as_const().is_none());
        let id = parse_expr("inv(inv(x1))", &q()).unwrap();
        assert_eq!(id, Expr::var(0));
    }

    #[test]
    fn parse_print_roundtrip() {
        for text in [
            "x1",
            "x1 + x2",
            "x1*x2 - x2*x1",
            "inv(x1*x2 - x2*x1)",
            "x1^-1 + x2^-1",
            "-x1*(x2 + 3/2)",
            "2 - x1",
            "x12*x3",
        ] {
            let e = parse_expr(text, &q()).unwrap();
            let printed = e.to_string();
            let again = parse_expr(&printed, &q()).unwrap();
            assert_eq!(e, again, "roundtrip failed for {text}: printed {printed}");
        }
    }

    #[test]
    fn parse_errors_carry_columns() {
        match parse_expr("x1 + ", &q()) {
            Err(Error::Syntax { col, .. }) => assert_eq!(col, 6),
            other => panic!("expected syntax error, got {other:?}"),
        }
        assert!(parse_expr("x0", &q()).is_err());
        assert!(parse_expr("x1 x2", &q()).is_err());
        assert!(parse_expr("1/0", &q()).is_err());
    }

    #[test]
    fn evaluation_matches_hand_computation() {
        let e = parse_expr("x1*x2 - x2*x1", &q()).unwrap();
        let spec = q();
        let a = KMat::from_rows(
            &spec,
            vec![
                vec![spec.from_i64(0), spec.from_i64(1)],
                vec![spec.from_i64(0), spec.from_i64(0)],
            ],
        )
        .unwrap();
        let b = KMat::from_rows(
            &spec,
            vec![
                vec![spec.from_i64(0), spec.from_i64(0)],
                vec![spec.from_i64(1), spec.from_i64(0)],
            ],
        )
        .unwrap();
        let t = MatrixTuple::new(vec![a, b]).unwrap();
        let out = evaluate(&e, &t).unwrap();
        // [e12, e21] = diag(1, -1)
        let want = KMat::from_rows(
            &spec,
            vec![
                vec![spec.from_i64(1), spec.from_i64(0)],
                vec![spec.from_i64(0), spec.from_i64(-1)],
            ],
        )
        .unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn singular_inverse_is_a_domain_error() {
        let e = parse_expr("inv(x1 + x2)", &q()).unwrap();
        let spec = q();
        let a = KMat::identity(&spec, 2);
        let b = KMat::identity(&spec, 2).neg();
        let t = MatrixTuple::new(vec![a, b]).unwrap();
        match evaluate(&e, &t) {
            Err(Error::Domain { node }) => assert_eq!(node, "x1 + x2"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn substitution_composes() {
        let e = parse_expr("x1*x2", &q()).unwrap();
        let im = vec![
            parse_expr("x2", &q()).unwrap(),
            parse_expr("x1 + 1", &q()).unwrap(),
        ];
        let s = substitute(&e, &im).unwrap();
        assert_eq!(s, parse_expr("x2*(x1 + 1)", &q()).unwrap());
    }

    #[test]
    fn tuple_json_roundtrip() {
        let spec = q();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let t = MatrixTuple::random(&spec, 2, 3, &mut rng, 50);
        let j = t.to_json();
        let back = MatrixTuple::from_json(&spec, &j).unwrap();
        assert_eq!(t, back);
        // and over a finite field
        let f49 = FieldSpec::finite(7, 2, None).unwrap();
        let t2 = MatrixTuple::random(&f49, 1, 2, &mut rng, 7);
        let j2 = t2.to_json();
        assert_eq!(MatrixTuple::from_json(&f49, &j2).unwrap(), t2);
    }

    #[test]
    fn evaluation_shares_work_across_the_dag() {
        // A DAG with heavy sharing evaluates in time linear in its size.
        let mut e = parse_expr("x1 + x2", &q()).unwrap();
        for _ in 0..60 {
            e = e.mul(&e.clone().add(&Expr::one(&q())));
        }
        let _spec = q();
        let f7 = FieldSpec::prime(7).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let t = MatrixTuple::random(&f7, 2, 2, &mut rng, 7);
        let _ = evaluate(&e, &t).unwrap();
    }
}
