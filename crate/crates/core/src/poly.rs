//! Univariate polynomials over a ground field, with exact root finding.
//!
//! Over Q roots are located with the rational root theorem; over a finite
//! field by gcd with x^q - x followed by equal-degree splitting.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::field::{sample_scalar, FieldSpec, Scalar};

/// Little-endian coefficient vector, trimmed; the empty vector is zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SPoly {
    spec: FieldSpec,
    coeffs: Vec<Scalar>,
}

impl SPoly {
    pub fn from_coeffs(spec: FieldSpec, mut coeffs: Vec<Scalar>) -> SPoly {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        SPoly { spec, coeffs }
    }

    pub fn zero(spec: FieldSpec) -> SPoly {
        SPoly {
            spec,
            coeffs: vec![],
        }
    }

    pub fn constant(c: Scalar) -> SPoly {
        let spec = c.spec().clone();
        Self::from_coeffs(spec, vec![c])
    }

    pub fn x(spec: FieldSpec) -> SPoly {
        let coeffs = vec![spec.zero(), spec.one()];
        SPoly { spec, coeffs }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or None for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&Scalar> {
        self.coeffs.last()
    }

    pub fn coeff(&self, i: usize) -> Scalar {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| self.spec.zero())
    }

    pub fn add(&self, other: &SPoly) -> SPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect();
        Self::from_coeffs(self.spec.clone(), coeffs)
    }

    pub fn sub(&self, other: &SPoly) -> SPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).sub(&other.coeff(i))).collect();
        Self::from_coeffs(self.spec.clone(), coeffs)
    }

    pub fn neg(&self) -> SPoly {
        let coeffs = self.coeffs.iter().map(|c| c.neg()).collect();
        Self::from_coeffs(self.spec.clone(), coeffs)
    }

    pub fn scale(&self, c: &Scalar) -> SPoly {
        let coeffs = self.coeffs.iter().map(|a| a.mul(c)).collect();
        Self::from_coeffs(self.spec.clone(), coeffs)
    }

    pub fn mul(&self, other: &SPoly) -> SPoly {
        if self.is_zero() || other.is_zero() {
            return Self::zero(self.spec.clone());
        }
        let mut out = vec![self.spec.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::from_coeffs(self.spec.clone(), out)
    }

    /// Quotient and remainder; panics on a zero divisor.
    pub fn divmod(&self, divisor: &SPoly) -> (SPoly, SPoly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead_inv = divisor.leading().unwrap().inv().unwrap();
        let mut rem = self.clone();
        let mut quo = vec![self.spec.zero(); self.coeffs.len().saturating_sub(dd)];
        while let Some(dr) = rem.degree() {
            if dr < dd {
                break;
            }
            let c = rem.leading().unwrap().mul(&lead_inv);
            let shift = dr - dd;
            quo[shift] = quo[shift].add(&c);
            let mut coeffs = rem.coeffs.clone();
            for (i, d) in divisor.coeffs.iter().enumerate() {
                coeffs[shift + i] = coeffs[shift + i].sub(&c.mul(d));
            }
            rem = Self::from_coeffs(self.spec.clone(), coeffs);
        }
        (Self::from_coeffs(self.spec.clone(), quo), rem)
    }

    pub fn rem(&self, divisor: &SPoly) -> SPoly {
        self.divmod(divisor).1
    }

    /// Monic normalization; zero stays zero.
    pub fn monic(&self) -> SPoly {
        match self.leading() {
            None => self.clone(),
            Some(l) => self.scale(&l.inv().unwrap()),
        }
    }

    pub fn gcd(&self, other: &SPoly) -> SPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn derivative(&self) -> SPoly {
        if self.coeffs.len() <= 1 {
            return Self::zero(self.spec.clone());
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| self.spec.from_i64(i as i64).mul(c))
            .collect();
        Self::from_coeffs(self.spec.clone(), coeffs)
    }

    pub fn eval(&self, x: &Scalar) -> Scalar {
        let mut acc = self.spec.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    }

    /// self^e mod m, with an arbitrary-precision exponent.
    pub fn pow_mod(&self, e: &BigUint, m: &SPoly) -> SPoly {
        let mut acc = SPoly::constant(self.spec.one());
        let mut base = self.rem(m);
        let bits = e.bits();
        for i in 0..bits {
            if e.bit(i) {
                acc = acc.mul(&base).rem(m);
            }
            base = base.mul(&base).rem(m);
        }
        acc.rem(m)
    }
}

/// Roots in the ground field with multiplicities, plus the degree of the
/// part that does not split into linear factors over that field.
pub fn roots_in_field(f: &SPoly, rng: &mut impl Rng) -> (Vec<(Scalar, usize)>, usize) {
    let deg = match f.degree() {
        None | Some(0) => return (vec![], 0),
        Some(d) => d,
    };
    let candidates = if f.spec().is_rationals() {
        rational_root_candidates(f)
    } else {
        finite_field_roots(f, rng)
    };
    let mut out = vec![];
    let mut g = f.clone();
    let mut found = 0;
    for r in candidates {
        if !g.eval(&r).is_zero() {
            continue;
        }
        let lin = SPoly::from_coeffs(f.spec().clone(), vec![r.neg(), f.spec().one()]);
        let mut mult = 0;
        loop {
            let (q, rem) = g.divmod(&lin);
            if !rem.is_zero() {
                break;
            }
            g = q;
            mult += 1;
        }
        if mult > 0 {
            found += mult;
            out.push((r, mult));
        }
    }
    (out, deg - found)
}

/// One root in the field, chosen deterministically (smallest under the
/// coefficient ordering) among all roots; None when there is none.
pub fn one_root_in_finite_field(f: &SPoly, rng: &mut impl Rng) -> Option<Scalar> {
    let (roots, _) = roots_in_field(f, rng);
    roots
        .into_iter()
        .map(|(r, _)| r)
        .min_by(|a, b| a.coeffs().unwrap().cmp(b.coeffs().unwrap()))
}

/// Candidate rational roots p/q with p | constant term and q | leading term
/// of the primitive integer form of f. Divisor enumeration is complete when
/// the terms fit in a machine word and bounded otherwise.
fn rational_root_candidates(f: &SPoly) -> Vec<Scalar> {
    let spec = f.spec().clone();
    // Clear denominators.
    let mut den = BigInt::one();
    for c in f.coeffs() {
        let r = c.as_rational().unwrap();
        den = num_integer::lcm(den, r.denom().clone());
    }
    let ints: Vec<BigInt> = f
        .coeffs()
        .iter()
        .map(|c| {
            let r = c.as_rational().unwrap();
            (r * BigRational::from_integer(den.clone()))
                .to_integer()
        })
        .collect();
    let mut out = vec![spec.zero()];
    let lo = match ints.iter().find(|c| !c.is_zero()) {
        Some(c) => c.abs(),
        None => return out,
    };
    let hi = ints.last().unwrap().abs();
    let nums = bigint_divisors(&lo);
    let dens = bigint_divisors(&hi);
    for n in &nums {
        for d in &dens {
            let r = BigRational::new(n.clone(), d.clone());
            out.push(Scalar::rational(r.clone()));
            out.push(Scalar::rational(-r));
        }
    }
    out.sort_by(|a, b| a.as_rational().unwrap().cmp(b.as_rational().unwrap()));
    out.dedup();
    out
}

/// Positive divisors of |n|. Complete when n fits in u64; otherwise only
/// divisors up to 10^6 and their cofactors are produced.
fn bigint_divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    if n.is_zero() {
        return vec![BigInt::one()];
    }
    let mut out = vec![];
    if let Some(small) = n.to_u64() {
        let mut d = 1u64;
        while d.saturating_mul(d) <= small {
            if small % d == 0 {
                out.push(BigInt::from(d));
                out.push(BigInt::from(small / d));
            }
            d += 1;
        }
    } else {
        for d in 1u64..=1_000_000 {
            let db = BigInt::from(d);
            if (&n % &db).is_zero() {
                out.push(db.clone());
                out.push(&n / &db);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// All roots of f in its finite ground field, without multiplicity.
fn finite_field_roots(f: &SPoly, rng: &mut impl Rng) -> Vec<Scalar> {
    let spec = f.spec().clone();
    let p = spec.characteristic();
    let k = spec.extension_degree().unwrap();
    let q = BigUint::from(p).pow(k as u32);
    // Product of the distinct linear factors: gcd(f, x^q - x).
    let x = SPoly::x(spec.clone());
    let xq = x.pow_mod(&q, f);
    let lin_part = f.gcd(&xq.sub(&x));
    let mut roots = vec![];
    split_equal_degree(&lin_part, &q, rng, &mut roots);
    roots
}

/// Equal-degree splitting for a product of distinct linear factors.
fn split_equal_degree(g: &SPoly, q: &BigUint, rng: &mut impl Rng, out: &mut Vec<Scalar>) {
    let spec = g.spec().clone();
    match g.degree() {
        None | Some(0) => return,
        Some(1) => {
            let root = g.coeff(0).neg().mul(&g.coeff(1).inv().unwrap());
            out.push(root);
            return;
        }
        _ => {}
    }
    let p = spec.characteristic();
    loop {
        let h = if p == 2 {
            // Trace map sum (u x)^(2^i) over the F_2-dimension of the field.
            let e = q.bits() - 1;
            let u = sample_scalar(&spec, rng, 2);
            let ux = SPoly::from_coeffs(spec.clone(), vec![spec.zero(), u]);
            let mut term = ux.rem(g);
            let mut acc = term.clone();
            for _ in 1..e {
                term = term.mul(&term).rem(g);
                acc = acc.add(&term);
            }
            acc
        } else {
            let a = sample_scalar(&spec, rng, 2);
            let xa = SPoly::from_coeffs(spec.clone(), vec![a, spec.one()]);
            let exp = (q - BigUint::one()) / BigUint::from(2u32);
            let pw = xa.pow_mod(&exp, g);
            pw.sub(&SPoly::constant(spec.one()))
        };
        let d = g.gcd(&h);
        if let Some(dd) = d.degree() {
            if dd > 0 && dd < g.degree().unwrap() {
                let (quot, rem) = g.divmod(&d);
                debug_assert!(rem.is_zero());
                split_equal_degree(&d, q, rng, out);
                split_equal_degree(&quot, q, rng, out);
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn qpoly(coeffs: &[i64]) -> SPoly {
        let q = FieldSpec::rationals();
        SPoly::from_coeffs(q.clone(), coeffs.iter().map(|&c| q.from_i64(c)).collect())
    }

    #[test]
    fn divmod_recombines() {
        let a = qpoly(&[1, 0, -3, 2, 5]);
        let b = qpoly(&[2, 1, 1]);
        let (q, r) = a.divmod(&b);
        assert_eq!(q.mul(&b).add(&r), a);
        assert!(r.degree() < b.degree());
    }

    #[test]
    fn rational_roots() {
        // (x - 2)(x + 1/3)(x^2 + 1) up to scaling: roots 2 and -1/3.
        let f = qpoly(&[1, 3]).mul(&qpoly(&[-2, 1])).mul(&qpoly(&[1, 0, 1]));
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (roots, leftover) = roots_in_field(&f, &mut rng);
        assert_eq!(leftover, 2);
        let vals: Vec<String> = roots.iter().map(|(r, m)| format!("{r}:{m}")).collect();
        assert_eq!(vals, vec!["-1/3:1", "2:1"]);
    }

    #[test]
    fn rational_root_multiplicity() {
        let f = qpoly(&[-1, 1]).mul(&qpoly(&[-1, 1])).mul(&qpoly(&[5, 1]));
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (roots, leftover) = roots_in_field(&f, &mut rng);
        assert_eq!(leftover, 0);
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().any(|(r, m)| *m == 2 && r.is_one()));
    }

    #[test]
    fn finite_field_roots_odd_char() {
        let f7 = FieldSpec::prime(7).unwrap();
        // (x - 3)(x - 5)(x^2 + 1); x^2 + 1 has roots in F_49 but not F_7? In
        // fact x^2 = -1 = 6 has no solution mod 7, so leftover is 2.
        let lin1 = SPoly::from_coeffs(f7.clone(), vec![f7.from_i64(-3), f7.one()]);
        let lin2 = SPoly::from_coeffs(f7.clone(), vec![f7.from_i64(-5), f7.one()]);
        let quad = SPoly::from_coeffs(f7.clone(), vec![f7.one(), f7.zero(), f7.one()]);
        let f = lin1.mul(&lin2).mul(&quad);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (roots, leftover) = roots_in_field(&f, &mut rng);
        assert_eq!(leftover, 2);
        let mut vals: Vec<u64> = roots.iter().map(|(r, _)| r.coeffs().unwrap()[0]).collect();
        vals.sort();
        assert_eq!(vals, vec![3, 5]);
    }

    #[test]
    fn finite_field_roots_char_two() {
        let f8 = FieldSpec::finite(2, 3, None).unwrap();
        // x^8 - x splits completely with all 8 elements as roots.
        let x = SPoly::x(f8.clone());
        let mut x8 = x.clone();
        for _ in 0..3 {
            x8 = x8.mul(&x8);
        }
        let f = x8.sub(&x);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let (roots, leftover) = roots_in_field(&f, &mut rng);
        assert_eq!(leftover, 0);
        assert_eq!(roots.len(), 8);
    }

    #[test]
    fn gcd_and_derivative() {
        let f = qpoly(&[-1, 1]).mul(&qpoly(&[-1, 1])).mul(&qpoly(&[3, 1]));
        let g = f.gcd(&f.derivative());
        // Shared factor is exactly (x - 1).
        assert_eq!(g, qpoly(&[-1, 1]));
    }
}
