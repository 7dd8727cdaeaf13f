//! Matrices whose entries are noncommutative rational expressions: exact
//! arithmetic, inversion by Gauss-Jordan elimination with randomized pivot
//! certification, overdetermined right-linear solving, and substitution of
//! matrix tuples into expressions.
//!
//! Elimination steps are exact expression arithmetic; randomness enters only
//! in choosing pivots (nonzero verdicts are certified by witnesses) and in
//! recognizing zero residuals, so a returned inverse is correct and only a
//! singularity verdict is probabilistic.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{Expr, Op};
use crate::field::FieldSpec;
use crate::linrep::{RitCtx, RitVerdict};

/// Dense matrix over the free skew field.
#[derive(Clone, Debug)]
pub struct MatM {
    rows: usize,
    cols: usize,
    spec: FieldSpec,
    entries: Vec<Expr>,
}

impl MatM {
    pub fn zero(spec: &FieldSpec, rows: usize, cols: usize) -> MatM {
        MatM {
            rows,
            cols,
            spec: spec.clone(),
            entries: vec![Expr::zero(spec); rows * cols],
        }
    }

    pub fn identity(spec: &FieldSpec, n: usize) -> MatM {
        let mut m = Self::zero(spec, n, n);
        for i in 0..n {
            m.set(i, i, Expr::one(spec));
        }
        m
    }

    pub fn from_rows(spec: &FieldSpec, rows: Vec<Vec<Expr>>) -> Result<MatM> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(MatM {
            rows: r,
            cols: c,
            spec: spec.clone(),
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_fn(
        spec: &FieldSpec,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Expr,
    ) -> MatM {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        MatM {
            rows,
            cols,
            spec: spec.clone(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn at(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.entries[i * self.cols + j] = e;
    }

    fn same_shape(&self, other: &MatM) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MatM) -> Result<MatM> {
        self.same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(MatM {
            entries,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &MatM) -> Result<MatM> {
        self.same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(MatM {
            entries,
            ..self.clone()
        })
    }

    pub fn neg(&self) -> MatM {
        MatM {
            entries: self.entries.iter().map(|a| a.neg()).collect(),
            ..self.clone()
        }
    }

    /// Left multiplication by a scalar expression.
    pub fn scale_left(&self, c: &Expr) -> MatM {
        MatM {
            entries: self.entries.iter().map(|a| c.mul(a)).collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &MatM) -> Result<MatM> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = MatM::zero(&self.spec, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Expr::zero(&self.spec);
                for k in 0..self.cols {
                    acc = acc.add(&self.at(i, k).mul(other.at(k, j)));
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> MatM {
        MatM::from_fn(&self.spec, self.cols, self.rows, |i, j| {
            self.at(j, i).clone()
        })
    }

    pub fn kron(&self, other: &MatM) -> MatM {
        MatM::from_fn(
            &self.spec,
            self.rows * other.rows,
            self.cols * other.cols,
            |i, j| {
                self.at(i / other.rows, j / other.cols)
                    .mul(other.at(i % other.rows, j % other.cols))
            },
        )
    }

    /// Exact inverse over the free skew field. Pivots are certified nonzero
    /// by the randomized test; a SingularOverM verdict is probabilistic, a
    /// returned inverse is exact.
    pub fn inverse(&self, ctx: &mut RitCtx) -> Result<MatM> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = MatM::identity(&self.spec, n);
        for col in 0..n {
            let mut pivot = None;
            for r in col..n {
                match ctx.is_zero(a.at(r, col))? {
                    RitVerdict::Nonzero(_) => {
                        pivot = Some(r);
                        break;
                    }
                    RitVerdict::ProbablyZero => {
                        // Mathematically zero with high probability; replace
                        // by a literal zero to stop expression growth.
                        a.set(r, col, Expr::zero(&self.spec));
                    }
                }
            }
            let Some(pr) = pivot else {
                return Err(Error::SingularOverM);
            };
            if pr != col {
                for j in 0..n {
                    let x = a.at(col, j).clone();
                    let y = a.at(pr, j).clone();
                    a.set(col, j, y);
                    a.set(pr, j, x);
                    let x = inv.at(col, j).clone();
                    let y = inv.at(pr, j).clone();
                    inv.set(col, j, y);
                    inv.set(pr, j, x);
                }
            }
            let pinv = a.at(col, col).inv()?;
            for j in 0..n {
                a.set(col, j, pinv.mul(a.at(col, j)));
                inv.set(col, j, pinv.mul(inv.at(col, j)));
            }
            a.set(col, col, Expr::one(&self.spec));
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col).clone();
                if f.is_zero_const() {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.at(r, j).sub(&f.mul(a.at(col, j))));
                    inv.set(r, j, inv.at(r, j).sub(&f.mul(inv.at(col, j))));
                }
                a.set(r, col, Expr::zero(&self.spec));
            }
        }
        Ok(inv)
    }

    /// Solve the overdetermined right-linear system self * x = b for a
    /// scalar column x. Rows are reduced exactly; rows left without pivots
    /// must have zero right-hand side, checked by the randomized test.
    /// Ok(None) when the system is inconsistent.
    pub fn solve_right_linear(&self, b: &MatM, ctx: &mut RitCtx) -> Result<Option<Vec<Expr>>> {
        if b.rows != self.rows || b.cols != 1 {
            return Err(Error::ShapeMismatch(
                "right-hand side must be a column of matching height".into(),
            ));
        }
        let mut a = self.clone();
        let mut rhs: Vec<Expr> = (0..self.rows).map(|i| b.at(i, 0).clone()).collect();
        let mut pivot_row_of_col: Vec<Option<usize>> = vec![None; self.cols];
        let mut used_rows = vec![false; self.rows];
        for col in 0..self.cols {
            let mut pivot = None;
            for r in 0..self.rows {
                if used_rows[r] {
                    continue;
                }
                match ctx.is_zero(a.at(r, col))? {
                    RitVerdict::Nonzero(_) => {
                        pivot = Some(r);
                        break;
                    }
                    RitVerdict::ProbablyZero => a.set(r, col, Expr::zero(&self.spec)),
                }
            }
            let Some(pr) = pivot else {
                continue;
            };
            used_rows[pr] = true;
            pivot_row_of_col[col] = Some(pr);
            let pinv = a.at(pr, col).inv()?;
            for j in 0..self.cols {
                a.set(pr, j, pinv.mul(a.at(pr, j)));
            }
            rhs[pr] = pinv.mul(&rhs[pr]);
            a.set(pr, col, Expr::one(&self.spec));
            for r in 0..self.rows {
                if r == pr {
                    continue;
                }
                let f = a.at(r, col).clone();
                if f.is_zero_const() {
                    continue;
                }
                for j in 0..self.cols {
                    a.set(r, j, a.at(r, j).sub(&f.mul(a.at(pr, j))));
                }
                rhs[r] = rhs[r].sub(&f.mul(&rhs[pr]));
                a.set(r, col, Expr::zero(&self.spec));
            }
        }
        // Residual rows: no pivot used them, so their reduced right-hand
        // side must vanish for consistency.
        for r in 0..self.rows {
            if used_rows[r] {
                continue;
            }
            if !ctx.is_probably_zero(&rhs[r])? {
                return Ok(None);
            }
        }
        let mut x = vec![Expr::zero(&self.spec); self.cols];
        for (col, pr) in pivot_row_of_col.iter().enumerate() {
            if let Some(pr) = pr {
                x[col] = rhs[*pr].clone();
            }
        }
        Ok(Some(x))
    }
}

/// Evaluate a rational expression with matrices substituted for variables:
/// constants become scalar multiples of the identity block. Memoized over
/// the expression DAG; inverses use RIT-pivoted elimination.
pub fn substitute_matrix(expr: &Expr, mats: &[MatM], ctx: &mut RitCtx) -> Result<MatM> {
    let d = mats
        .first()
        .map(|m| m.rows())
        .ok_or_else(|| Error::ParamError("no matrices to substitute".into()))?;
    for m in mats {
        if m.rows() != d || m.cols() != d {
            return Err(Error::ShapeMismatch(
                "substituted matrices must be square of equal size".into(),
            ));
        }
    }
    let mut memo = HashMap::new();
    subst_rec(expr, mats, d, ctx, &mut memo)
}

fn subst_rec(
    e: &Expr,
    mats: &[MatM],
    d: usize,
    ctx: &mut RitCtx,
    memo: &mut HashMap<u64, MatM>,
) -> Result<MatM> {
    if let Some(m) = memo.get(&e.id()) {
        return Ok(m.clone());
    }
    let spec = ctx.spec.clone();
    let out = match e.op() {
        Op::Const(c) => MatM::identity(&spec, d).scale_left(&Expr::constant(c.clone())),
        Op::Var(i) => {
            let i = *i as usize;
            mats.get(i)
                .cloned()
                .ok_or(Error::UnknownVariable {
                    index: i + 1,
                    nvars: mats.len(),
                })?
        }
        Op::Sum(terms) => {
            let mut acc = MatM::zero(&spec, d, d);
            for t in terms {
                let m = subst_rec(t, mats, d, ctx, memo)?;
                acc = acc.add(&m)?;
            }
            acc
        }
        Op::Prod(factors) => {
            let mut acc: Option<MatM> = None;
            for t in factors {
                let m = subst_rec(t, mats, d, ctx, memo)?;
                acc = Some(match acc {
                    None => m,
                    Some(a) => a.mul(&m)?,
                });
            }
            acc.unwrap()
        }
        Op::Neg(inner) => subst_rec(inner, mats, d, ctx, memo)?.neg(),
        Op::Inv(inner) => subst_rec(inner, mats, d, ctx, memo)?.inverse(ctx)?,
    };
    memo.insert(e.id(), out.clone());
    Ok(out)
}
