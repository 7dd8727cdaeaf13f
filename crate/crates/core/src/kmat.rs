//! Dense matrices over a ground field with exact rational or finite-field
//! entries: arithmetic, Gauss-Jordan elimination, kernels, Kronecker
//! products, and minimal polynomials.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{sample_scalar, FieldSpec, Scalar};
use crate::poly::SPoly;

/// Row-major dense matrix with entries in one ground field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KMat {
    rows: usize,
    cols: usize,
    spec: FieldSpec,
    entries: Vec<Scalar>,
}

impl KMat {
    pub fn zero(spec: &FieldSpec, rows: usize, cols: usize) -> KMat {
        KMat {
            rows,
            cols,
            spec: spec.clone(),
            entries: vec![spec.zero(); rows * cols],
        }
    }

    pub fn identity(spec: &FieldSpec, n: usize) -> KMat {
        let mut m = Self::zero(spec, n, n);
        for i in 0..n {
            m.set(i, i, spec.one());
        }
        m
    }

    pub fn from_fn(
        spec: &FieldSpec,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Scalar,
    ) -> KMat {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        KMat {
            rows,
            cols,
            spec: spec.clone(),
            entries,
        }
    }

    pub fn from_rows(spec: &FieldSpec, rows: Vec<Vec<Scalar>>) -> Result<KMat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let entries: Vec<Scalar> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| e.spec() != spec) {
            return Err(Error::FieldMismatch);
        }
        Ok(KMat {
            rows: r,
            cols: c,
            spec: spec.clone(),
            entries,
        })
    }

    /// Uniform random matrix; over Q entries are integers in [0, bound).
    pub fn random(
        spec: &FieldSpec,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
        bound: u64,
    ) -> KMat {
        Self::from_fn(spec, rows, cols, |_, _| sample_scalar(spec, rng, bound))
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

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Some(c) when the matrix equals c * I.
    pub fn as_scalar_multiple_of_identity(&self) -> Option<Scalar> {
        if !self.is_square() || self.rows == 0 {
            return None;
        }
        let c = self.at(0, 0).clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let want_zero = i != j;
                let e = self.at(i, j);
                if want_zero {
                    if !e.is_zero() {
                        return None;
                    }
                } else if *e != c {
                    return None;
                }
            }
        }
        Some(c)
    }

    fn same_shape(&self, other: &KMat) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.spec != other.spec {
            return Err(Error::FieldMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &KMat) -> Result<KMat> {
        self.same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(KMat {
            entries,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &KMat) -> Result<KMat> {
        self.same_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(KMat {
            entries,
            ..self.clone()
        })
    }

    pub fn neg(&self) -> KMat {
        let entries = self.entries.iter().map(|a| a.neg()).collect();
        KMat {
            entries,
            ..self.clone()
        }
    }

    pub fn scale(&self, c: &Scalar) -> KMat {
        let entries = self.entries.iter().map(|a| a.mul(c)).collect();
        KMat {
            entries,
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &KMat) -> Result<KMat> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if self.spec != other.spec {
            return Err(Error::FieldMismatch);
        }
        let mut out = KMat::zero(&self.spec, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.at(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let v = out.at(i, j).add(&a.mul(b));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> KMat {
        KMat::from_fn(&self.spec, self.cols, self.rows, |i, j| {
            self.at(j, i).clone()
        })
    }

    pub fn kron(&self, other: &KMat) -> KMat {
        assert_eq!(self.spec, other.spec);
        KMat::from_fn(
            &self.spec,
            self.rows * other.rows,
            self.cols * other.cols,
            |i, j| {
                let a = self.at(i / other.rows, j / other.cols);
                let b = other.at(i % other.rows, j % other.cols);
                a.mul(b)
            },
        )
    }

    pub fn hstack(&self, other: &KMat) -> Result<KMat> {
        if self.rows != other.rows || self.spec != other.spec {
            return Err(Error::ShapeMismatch("hstack row mismatch".into()));
        }
        Ok(KMat::from_fn(
            &self.spec,
            self.rows,
            self.cols + other.cols,
            |i, j| {
                if j < self.cols {
                    self.at(i, j).clone()
                } else {
                    other.at(i, j - self.cols).clone()
                }
            },
        ))
    }

    pub fn vstack(&self, other: &KMat) -> Result<KMat> {
        if self.cols != other.cols || self.spec != other.spec {
            return Err(Error::ShapeMismatch("vstack column mismatch".into()));
        }
        Ok(KMat::from_fn(
            &self.spec,
            self.rows + other.rows,
            self.cols,
            |i, j| {
                if i < self.rows {
                    self.at(i, j).clone()
                } else {
                    other.at(i - self.rows, j).clone()
                }
            },
        ))
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> KMat {
        KMat::from_fn(&self.spec, rows, cols, |i, j| {
            self.at(r0 + i, c0 + j).clone()
        })
    }

    pub fn column(&self, j: usize) -> KMat {
        self.submatrix(0, j, self.rows, 1)
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        let mut pivots = vec![];
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| !self.at(r, col).is_zero()) else {
                continue;
            };
            if pr != row {
                for j in 0..self.cols {
                    let a = self.at(row, j).clone();
                    let b = self.at(pr, j).clone();
                    self.set(row, j, b);
                    self.set(pr, j, a);
                }
            }
            let inv = self.at(row, col).inv().unwrap();
            for j in col..self.cols {
                let v = self.at(row, j).mul(&inv);
                self.set(row, j, v);
            }
            for r in 0..self.rows {
                if r == row || self.at(r, col).is_zero() {
                    continue;
                }
                let f = self.at(r, col).clone();
                for j in col..self.cols {
                    let v = self.at(r, j).sub(&f.mul(self.at(row, j)));
                    self.set(r, j, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place().len()
    }

    /// Columns spanning the right kernel; 0 columns when injective.
    pub fn kernel(&self) -> KMat {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = KMat::zero(&self.spec, self.cols, free.len());
        for (idx, &fc) in free.iter().enumerate() {
            out.set(fc, idx, self.spec.one());
            for (prow, &pc) in pivots.iter().enumerate() {
                out.set(pc, idx, m.at(prow, fc).neg());
            }
        }
        out
    }

    /// Exact inverse; SingularOverM is not used here, a plain shape/rank
    /// failure is reported as DivisionByZero.
    pub fn inverse(&self) -> Result<KMat> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = self.hstack(&KMat::identity(&self.spec, n))?;
        let pivots = aug.rref_in_place();
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, &c)| i != c) {
            return Err(Error::DivisionByZero);
        }
        Ok(aug.submatrix(0, n, n, n))
    }

    /// Solve self * X = rhs. None when inconsistent; for rank-deficient
    /// systems the free variables are set to zero.
    pub fn solve(&self, rhs: &KMat) -> Option<KMat> {
        if self.rows != rhs.rows || self.spec != rhs.spec {
            return None;
        }
        let mut aug = self.hstack(rhs).ok()?;
        let pivots = aug.rref_in_place();
        // Pivot in the rhs block means inconsistency.
        if pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        let mut x = KMat::zero(&self.spec, self.cols, rhs.cols);
        for (prow, &pc) in pivots.iter().enumerate() {
            for j in 0..rhs.cols {
                x.set(pc, j, aug.at(prow, self.cols + j).clone());
            }
        }
        // Verify (free variables at zero may not satisfy all rows otherwise).
        let check = self.mul(&x).ok()?;
        if &check == rhs {
            Some(x)
        } else {
            None
        }
    }

    /// Minimal polynomial, computed from the first linear dependence among
    /// the flattened powers I, A, A^2, ...
    pub fn min_poly(&self) -> SPoly {
        assert!(self.is_square());
        let n = self.rows;
        let mut powers: Vec<KMat> = vec![KMat::identity(&self.spec, n)];
        loop {
            let d = powers.len();
            // Stack the flattened powers as columns and look for a kernel
            // vector with a nonzero top coefficient in the last power.
            let mut stacked = KMat::zero(&self.spec, n * n, d);
            for (c, p) in powers.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        stacked.set(i * n + j, c, p.at(i, j).clone());
                    }
                }
            }
            if stacked.rank() < d {
                // The previous powers already dependent: the last added power
                // is a combination of the earlier ones.
                let prev: Vec<KMat> = powers[..d - 1].to_vec();
                let mut sys = KMat::zero(&self.spec, n * n, d - 1);
                for (c, p) in prev.iter().enumerate() {
                    for i in 0..n {
                        for j in 0..n {
                            sys.set(i * n + j, c, p.at(i, j).clone());
                        }
                    }
                }
                let mut rhs = KMat::zero(&self.spec, n * n, 1);
                let last = powers.last().unwrap();
                for i in 0..n {
                    for j in 0..n {
                        rhs.set(i * n + j, 0, last.at(i, j).clone());
                    }
                }
                let sol = sys.solve(&rhs).expect("dependence must be solvable");
                let mut coeffs: Vec<Scalar> =
                    (0..d - 1).map(|i| sol.at(i, 0).neg()).collect();
                coeffs.push(self.spec.one());
                return SPoly::from_coeffs(self.spec.clone(), coeffs);
            }
            let next = powers.last().unwrap().mul(self).unwrap();
            powers.push(next);
        }
    }

    /// Evaluate a polynomial at this matrix.
    pub fn eval_poly(&self, f: &SPoly) -> KMat {
        assert!(self.is_square());
        let n = self.rows;
        let mut acc = KMat::zero(&self.spec, n, n);
        for c in f.coeffs().iter().rev() {
            acc = acc.mul(self).unwrap();
            for i in 0..n {
                let v = acc.at(i, i).add(c);
                acc.set(i, i, v);
            }
        }
        acc
    }
}

impl fmt::Display for KMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.at(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}
