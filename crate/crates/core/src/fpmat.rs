//! Word-arithmetic matrices over F_p, used as the fast lane for randomized
//! identity testing: rational expressions are evaluated on integer tuples
//! reduced modulo a word-sized prime, with no heap allocation per entry.

use std::collections::HashMap;

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::expr::{Expr, Op};
use crate::field::{addm, invm, mulm, subm};
use crate::kmat::KMat;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct FpMat {
    pub rows: usize,
    pub cols: usize,
    pub p: u64,
    pub e: Vec<u64>,
}

impl FpMat {
    pub fn zero(p: u64, rows: usize, cols: usize) -> FpMat {
        FpMat {
            rows,
            cols,
            p,
            e: vec![0; rows * cols],
        }
    }

    pub fn identity(p: u64, n: usize) -> FpMat {
        let mut m = Self::zero(p, n, n);
        for i in 0..n {
            m.e[i * n + i] = 1 % p;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.e[i * self.cols + j]
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &FpMat) -> FpMat {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let e = self
            .e
            .iter()
            .zip(&other.e)
            .map(|(&a, &b)| addm(a, b, self.p))
            .collect();
        FpMat { e, ..*self }
    }

    pub fn neg(&self) -> FpMat {
        let e = self
            .e
            .iter()
            .map(|&a| if a == 0 { 0 } else { self.p - a })
            .collect();
        FpMat { e, ..*self }
    }

    pub fn scale(&self, c: u64) -> FpMat {
        let e = self.e.iter().map(|&a| mulm(a, c, self.p)).collect();
        FpMat { e, ..*self }
    }

    pub fn mul(&self, other: &FpMat) -> FpMat {
        debug_assert_eq!(self.cols, other.rows);
        let p = self.p;
        let mut out = FpMat::zero(p, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0 {
                    continue;
                }
                let orow = &mut out.e[i * other.cols..(i + 1) * other.cols];
                let brow = &other.e[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o = addm(*o, mulm(a, b, p), p);
                }
            }
        }
        out
    }

    /// Kronecker product.
    pub fn kron(&self, other: &FpMat) -> FpMat {
        let p = self.p;
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = FpMat::zero(p, rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let a = self.at(i / other.rows, j / other.cols);
                let b = other.at(i % other.rows, j % other.cols);
                out.e[i * cols + j] = mulm(a, b, p);
            }
        }
        out
    }

    /// Gauss-Jordan inverse; None when singular.
    pub fn inverse(&self) -> Option<FpMat> {
        debug_assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let p = self.p;
        let mut a = self.clone();
        let mut inv = FpMat::identity(p, n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| a.at(r, col) != 0)?;
            if pivot != col {
                for j in 0..n {
                    a.e.swap(col * n + j, pivot * n + j);
                    inv.e.swap(col * n + j, pivot * n + j);
                }
            }
            let pi = invm(a.at(col, col), p);
            for j in 0..n {
                a.e[col * n + j] = mulm(a.e[col * n + j], pi, p);
                inv.e[col * n + j] = mulm(inv.e[col * n + j], pi, p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == 0 {
                    continue;
                }
                for j in 0..n {
                    let t = mulm(f, a.e[col * n + j], p);
                    a.e[r * n + j] = subm(a.e[r * n + j], t, p);
                    let t2 = mulm(f, inv.e[col * n + j], p);
                    inv.e[r * n + j] = subm(inv.e[r * n + j], t2, p);
                }
            }
        }
        Some(inv)
    }

    /// Reduce an exact matrix (rational entries, or F_p entries with the
    /// same characteristic) modulo p. Err when a denominator vanishes mod p.
    pub fn from_kmat(m: &KMat, p: u64) -> Result<FpMat> {
        let mut out = FpMat::zero(p, m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.e[i * m.cols() + j] = scalar_mod_p(m.at(i, j), p)?;
            }
        }
        Ok(out)
    }

    pub fn to_kmat(&self, spec: &crate::field::FieldSpec) -> KMat {
        KMat::from_fn(spec, self.rows, self.cols, |i, j| {
            spec.from_i64(self.at(i, j) as i64)
        })
    }
}

pub(crate) fn scalar_mod_p(s: &crate::field::Scalar, p: u64) -> Result<u64> {
    if let Some(r) = s.as_rational() {
        use num_integer::Integer;
        let pb = num_bigint::BigInt::from(p);
        let den = r.denom().mod_floor(&pb).to_u64().unwrap();
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        let num = r.numer().mod_floor(&pb).to_u64().unwrap();
        Ok(mulm(num, invm(den, p), p))
    } else {
        let spec = s.spec();
        if spec.characteristic() == p && spec.extension_degree() == Some(1) {
            Ok(s.coeffs().unwrap()[0])
        } else {
            Err(Error::FieldMismatch)
        }
    }
}

/// Evaluate an expression DAG at a tuple of F_p matrices. Ok(None) signals a
/// benign failure for this sample: a singular inverse or a constant
/// denominator divisible by p.
pub(crate) fn eval_expr_fp(expr: &Expr, mats: &[FpMat], p: u64, n: usize) -> Result<Option<FpMat>> {
    let mut memo: HashMap<u64, FpMat> = HashMap::new();
    eval_rec(expr, mats, p, n, &mut memo)
}

fn eval_rec(
    e: &Expr,
    mats: &[FpMat],
    p: u64,
    n: usize,
    memo: &mut HashMap<u64, FpMat>,
) -> Result<Option<FpMat>> {
    if let Some(m) = memo.get(&e.id()) {
        return Ok(Some(m.clone()));
    }
    let out = match e.op() {
        Op::Const(c) => match scalar_mod_p(c, p) {
            Ok(v) => FpMat::identity(p, n).scale(v),
            Err(Error::DivisionByZero) => return Ok(None),
            Err(err) => return Err(err),
        },
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
            let mut acc = FpMat::zero(p, n, n);
            for t in terms {
                match eval_rec(t, mats, p, n, memo)? {
                    Some(m) => acc = acc.add(&m),
                    None => return Ok(None),
                }
            }
            acc
        }
        Op::Prod(factors) => {
            let mut acc: Option<FpMat> = None;
            for t in factors {
                match eval_rec(t, mats, p, n, memo)? {
                    Some(m) => {
                        acc = Some(match acc {
                            None => m,
                            Some(a) => a.mul(&m),
                        })
                    }
                    None => return Ok(None),
                }
            }
            acc.unwrap()
        }
        Op::Neg(inner) => match eval_rec(inner, mats, p, n, memo)? {
            Some(m) => m.neg(),
            None => return Ok(None),
        },
        Op::Inv(inner) => match eval_rec(inner, mats, p, n, memo)? {
            Some(m) => match m.inverse() {
                Some(inv) => inv,
                None => return Ok(None),
            },
            None => return Ok(None),
        },
    };
    memo.insert(e.id(), out.clone());
    Ok(Some(out))
}

/// Uniform random matrix with entries below `bound` (and below p).
pub(crate) fn random_fpmat(p: u64, n: usize, rng: &mut impl rand::Rng, bound: u64) -> FpMat {
    let bound = bound.min(p);
    let e = (0..n * n).map(|_| rng.gen_range(0..bound)).collect();
    FpMat {
        rows: n,
        cols: n,
        p,
        e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, parse_expr, MatrixTuple};
    use crate::field::FieldSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn matches_generic_evaluation() {
        let q = FieldSpec::rationals();
        let p = 1_000_003u64;
        let fp = FieldSpec::prime(p).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for text in [
            "x1*x2 - x2*x1",
            "inv(x1 + x2)*x1",
            "x1^-1 + 2/3*x2",
        ] {
            let e = parse_expr(text, &q).unwrap();
            for _ in 0..5 {
                let fa = random_fpmat(p, 3, &mut rng, p);
                let fb = random_fpmat(p, 3, &mut rng, p);
                let out = eval_expr_fp(&e, &[fa.clone(), fb.clone()], p, 3).unwrap();
                let tuple =
                    MatrixTuple::new(vec![fa.to_kmat(&fp), fb.to_kmat(&fp)]).unwrap();
                let ep = crate::expr::map_constants(&e, &|c| c.convert_to(&fp)).unwrap();
                match (out, evaluate(&ep, &tuple)) {
                    (Some(fast), Ok(slow)) => {
                        assert_eq!(fast.to_kmat(&fp), slow);
                    }
                    (None, Err(_)) => {}
                    (a, b) => panic!("divergence: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let p = 97;
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_fpmat(p, 5, &mut rng, p);
            if let Some(inv) = a.inverse() {
                assert_eq!(a.mul(&inv), FpMat::identity(p, 5));
            }
        }
    }
}
