//! Exact ground-field arithmetic: the rationals, prime fields and their
//! small extensions, plus seeded random sampling and field embeddings.
//!
//! A `FieldSpec` names a field ("Q", "F(7)", "F(2,3;m=x^3+x+1)"); a `Scalar`
//! is an element of one. Rationals use arbitrary-precision integers, finite
//! field elements are coefficient vectors modulo a monic irreducible.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Word-sized modular arithmetic
// ---------------------------------------------------------------------------

#[inline]
pub(crate) fn addm(a: u64, b: u64, p: u64) -> u64 {
    let s = a.wrapping_add(b);
    if s >= p || s < a {
        s.wrapping_sub(p)
    } else {
        s
    }
}

#[inline]
pub(crate) fn subm(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a.wrapping_sub(b).wrapping_add(p)
    }
}

#[inline]
pub(crate) fn mulm(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub(crate) fn powm(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1 % p;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulm(acc, b, p);
        }
        b = mulm(b, b, p);
        e >>= 1;
    }
    acc
}

pub(crate) fn invm(a: u64, p: u64) -> u64 {
    // p is prime, a != 0
    powm(a, p - 2, p)
}

/// Deterministic Miller-Rabin for u64.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'outer: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powm(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mulm(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// A pseudorandom prime close to 2^62, for modular filtering of rational
/// computations.
pub fn random_prime(rng: &mut impl Rng) -> u64 {
    loop {
        let c: u64 = (1 << 61) | rng.gen::<u64>() % (1 << 61) | 1;
        if is_prime(c) {
            return c;
        }
    }
}

// ---------------------------------------------------------------------------
// Polynomials over F_p (little-endian coefficient vectors)
// ---------------------------------------------------------------------------

fn fp_trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn fp_mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] = addm(out[i + j], mulm(ai, bj, p), p);
        }
    }
    fp_trim(&mut out);
    out
}

/// Remainder of `a` modulo `m` (`m` need not be monic).
fn fp_rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    fp_trim(&mut r);
    let dm = m.len() - 1;
    let lead_inv = invm(m[dm], p);
    while r.len() > dm {
        let c = mulm(*r.last().unwrap(), lead_inv, p);
        let shift = r.len() - 1 - dm;
        for (i, &mi) in m.iter().enumerate() {
            r[shift + i] = subm(r[shift + i], mulm(c, mi, p), p);
        }
        fp_trim(&mut r);
        if r.is_empty() {
            break;
        }
    }
    r
}

fn fp_gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    fp_trim(&mut a);
    fp_trim(&mut b);
    while !b.is_empty() {
        let r = fp_rem(&a, &b, p);
        a = b;
        b = r;
    }
    if let Some(&lead) = a.last() {
        let li = invm(lead, p);
        for c in a.iter_mut() {
            *c = mulm(*c, li, p);
        }
    }
    a
}

/// Extended Euclid: returns g, s with s*a ≡ g (mod m), g monic.
fn fp_ext_gcd(a: &[u64], m: &[u64], p: u64) -> (Vec<u64>, Vec<u64>) {
    let (mut r0, mut r1) = (m.to_vec(), a.to_vec());
    let (mut s0, mut s1) = (vec![], vec![1u64]);
    fp_trim(&mut r0);
    fp_trim(&mut r1);
    while !r1.is_empty() {
        // r0 = q*r1 + r2
        let mut r2 = r0.clone();
        let mut q = vec![0u64; r0.len().saturating_sub(r1.len()) + 1];
        let d1 = r1.len() - 1;
        let li = invm(r1[d1], p);
        while r2.len() > d1 || (r2.len() == d1 + 1 && !r2.is_empty()) {
            if r2.len() < d1 + 1 {
                break;
            }
            let c = mulm(*r2.last().unwrap(), li, p);
            let shift = r2.len() - 1 - d1;
            q[shift] = addm(q[shift], c, p);
            for (i, &mi) in r1.iter().enumerate() {
                r2[shift + i] = subm(r2[shift + i], mulm(c, mi, p), p);
            }
            fp_trim(&mut r2);
            if r2.is_empty() {
                break;
            }
        }
        fp_trim(&mut q);
        // s2 = s0 - q*s1
        let qs1 = fp_mul(&q, &s1, p);
        let n = s0.len().max(qs1.len());
        let mut s2 = vec![0u64; n];
        for (i, c) in s2.iter_mut().enumerate() {
            let x = s0.get(i).copied().unwrap_or(0);
            let y = qs1.get(i).copied().unwrap_or(0);
            *c = subm(x, y, p);
        }
        fp_trim(&mut s2);
        r0 = std::mem::replace(&mut r1, r2);
        s0 = std::mem::replace(&mut s1, s2);
    }
    // normalize r0 monic, scale s0 accordingly
    if let Some(&lead) = r0.last() {
        let li = invm(lead, p);
        for c in r0.iter_mut() {
            *c = mulm(*c, li, p);
        }
        for c in s0.iter_mut() {
            *c = mulm(*c, li, p);
        }
    }
    (r0, s0)
}

/// h^e mod m over F_p, word-sized exponent.
fn fp_powmod(h: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = vec![1u64];
    let mut b = fp_rem(h, m, p);
    while e > 0 {
        if e & 1 == 1 {
            acc = fp_rem(&fp_mul(&acc, &b, p), m, p);
        }
        b = fp_rem(&fp_mul(&b, &b, p), m, p);
        e >>= 1;
    }
    acc
}

/// x^(p^j) mod m via iterated Frobenius (coefficients of m live in F_p).
fn fp_frobenius_power(j: usize, m: &[u64], p: u64) -> Vec<u64> {
    let mut g = fp_rem(&[0, 1], m, p); // x mod m
    for _ in 0..j {
        g = fp_powmod(&g, p, m, p);
    }
    g
}

/// Rabin irreducibility test for a monic polynomial of degree k over F_p.
fn fp_is_irreducible(m: &[u64], p: u64) -> bool {
    let k = m.len() - 1;
    if k == 0 {
        return false;
    }
    if k == 1 {
        return true;
    }
    // x^(p^k) == x mod m
    let xq = fp_frobenius_power(k, m, p);
    let x = fp_rem(&[0, 1], m, p);
    if xq != x {
        return false;
    }
    // for each prime divisor q of k: gcd(x^(p^(k/q)) - x, m) == 1
    let mut n = k;
    let mut divisors = vec![];
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            divisors.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        divisors.push(n);
    }
    for q in divisors {
        let g = fp_frobenius_power(k / q, m, p);
        let mut diff = vec![0u64; g.len().max(x.len())];
        for (i, c) in diff.iter_mut().enumerate() {
            let a = g.get(i).copied().unwrap_or(0);
            let b = x.get(i).copied().unwrap_or(0);
            *c = subm(a, b, p);
        }
        fp_trim(&mut diff);
        let gg = fp_gcd(&diff, m, p);
        if gg.len() != 1 {
            return false;
        }
    }
    true
}

/// Deterministic search for a monic irreducible of degree k over F_p.
/// Lower coefficients are enumerated as base-p digits of a counter, so the
/// result is a fixed function of (p, k).
fn find_modulus(p: u64, k: usize) -> Vec<u64> {
    if k == 1 {
        return vec![0, 1]; // x
    }
    let mut counter: u64 = 1;
    loop {
        let mut m = vec![0u64; k + 1];
        m[k] = 1;
        let mut c = counter;
        let mut i = 0;
        while c > 0 && i < k {
            m[i] = c % p;
            c /= p;
            i += 1;
        }
        if c == 0 && fp_is_irreducible(&m, p) {
            return m;
        }
        counter += 1;
    }
}

// ---------------------------------------------------------------------------
// FieldSpec
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq, Eq, Hash)]
enum Kind {
    Rationals,
    Finite { p: u64, k: usize, modulus: Vec<u64> },
}

/// Description of a ground field: the rationals, or F_{p^k} with a monic
/// irreducible modulus. Cheap to clone; equality is structural.
#[derive(Clone, Debug)]
pub struct FieldSpec(Arc<Kind>);

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}
impl Eq for FieldSpec {}
impl std::hash::Hash for FieldSpec {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl FieldSpec {
    pub fn rationals() -> Self {
        FieldSpec(Arc::new(Kind::Rationals))
    }

    /// Prime field F_p.
    pub fn prime(p: u64) -> Result<Self> {
        Self::finite(p, 1, None)
    }

    /// F_{p^k}. When `modulus` is `None` a deterministic built-in monic
    /// irreducible is used. Supplied moduli are verified (k ≤ 16).
    pub fn finite(p: u64, k: usize, modulus: Option<Vec<u64>>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if k == 0 || k > 16 {
            return Err(Error::BadModulus(k));
        }
        let m = match modulus {
            Some(mut m) => {
                fp_trim(&mut m);
                for c in m.iter_mut() {
                    *c %= p;
                }
                fp_trim(&mut m);
                if m.len() != k + 1 || m[k] != 1 || !fp_is_irreducible(&m, p) {
                    return Err(Error::BadModulus(k));
                }
                m
            }
            None => find_modulus(p, k),
        };
        Ok(FieldSpec(Arc::new(Kind::Finite { p, k, modulus: m })))
    }

    pub fn is_rationals(&self) -> bool {
        matches!(&*self.0, Kind::Rationals)
    }

    /// Field characteristic: 0 for the rationals, p otherwise.
    pub fn characteristic(&self) -> u64 {
        match &*self.0 {
            Kind::Rationals => 0,
            Kind::Finite { p, .. } => *p,
        }
    }

    pub fn p(&self) -> Option<u64> {
        match &*self.0 {
            Kind::Rationals => None,
            Kind::Finite { p, .. } => Some(*p),
        }
    }

    pub fn extension_degree(&self) -> Option<usize> {
        match &*self.0 {
            Kind::Rationals => None,
            Kind::Finite { k, .. } => Some(*k),
        }
    }

    pub fn modulus(&self) -> Option<&[u64]> {
        match &*self.0 {
            Kind::Rationals => None,
            Kind::Finite { modulus, .. } => Some(modulus),
        }
    }

    /// Number of elements, if finite and representable in u128.
    pub fn order(&self) -> Option<u128> {
        match &*self.0 {
            Kind::Rationals => None,
            Kind::Finite { p, k, .. } => {
                let mut acc: u128 = 1;
                for _ in 0..*k {
                    acc = acc.checked_mul(*p as u128)?;
                }
                Some(acc)
            }
        }
    }

    pub fn zero(&self) -> Scalar {
        match &*self.0 {
            Kind::Rationals => Scalar {
                spec: self.clone(),
                value: Value::Rat(BigRational::zero()),
            },
            Kind::Finite { k, .. } => Scalar {
                spec: self.clone(),
                value: Value::Fin(vec![0; *k]),
            },
        }
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    pub fn from_i64(&self, n: i64) -> Scalar {
        match &*self.0 {
            Kind::Rationals => Scalar {
                spec: self.clone(),
                value: Value::Rat(BigRational::from_integer(BigInt::from(n))),
            },
            Kind::Finite { p, k, .. } => {
                let mut v = vec![0u64; *k];
                v[0] = n.rem_euclid(*p as i64) as u64;
                Scalar {
                    spec: self.clone(),
                    value: Value::Fin(v),
                }
            }
        }
    }

    pub fn from_bigint(&self, n: &BigInt) -> Scalar {
        match &*self.0 {
            Kind::Rationals => Scalar {
                spec: self.clone(),
                value: Value::Rat(BigRational::from_integer(n.clone())),
            },
            Kind::Finite { p, k, .. } => {
                let r = n.mod_floor_u64(*p);
                let mut v = vec![0u64; *k];
                v[0] = r;
                Scalar {
                    spec: self.clone(),
                    value: Value::Fin(v),
                }
            }
        }
    }

    /// Element with the given little-endian coefficient vector (finite fields).
    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<Scalar> {
        match &*self.0 {
            Kind::Rationals => Err(Error::FieldMismatch),
            Kind::Finite { p, k, .. } => {
                if coeffs.len() > *k {
                    return Err(Error::BadModulus(*k));
                }
                let mut v = vec![0u64; *k];
                for (i, &c) in coeffs.iter().enumerate() {
                    v[i] = c % p;
                }
                Ok(Scalar {
                    spec: self.clone(),
                    value: Value::Fin(v),
                })
            }
        }
    }

    /// Parse "Q", "F(p)", "F(p,k)" or "F(p,k;m=...)" where the modulus is
    /// either a polynomial in x or a little-endian comma list.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "Q" {
            return Ok(Self::rationals());
        }
        let inner = t
            .strip_prefix("F(")
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| Error::ParamError(format!("cannot parse field '{t}'")))?;
        let (params, modulus) = match inner.split_once(';') {
            Some((a, b)) => (a, Some(b)),
            None => (inner, None),
        };
        let mut it = params.split(',').map(str::trim);
        let p: u64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ParamError(format!("bad prime in '{t}'")))?;
        let k: usize = match it.next() {
            Some(s) => s
                .parse()
                .map_err(|_| Error::ParamError(format!("bad extension degree in '{t}'")))?,
            None => 1,
        };
        let m = match modulus {
            None => None,
            Some(s) => {
                let s = s
                    .trim()
                    .strip_prefix("m=")
                    .ok_or_else(|| Error::ParamError("modulus must be given as m=...".into()))?;
                Some(parse_modulus(s, p)?)
            }
        };
        Self::finite(p, k, m)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Kind::Rationals => write!(f, "Q"),
            Kind::Finite { p, k, modulus } => {
                if *k == 1 {
                    write!(f, "F({p})")
                } else {
                    write!(f, "F({p},{k};m=")?;
                    let mut first = true;
                    for c in modulus {
                        if !first {
                            write!(f, ",")?;
                        }
                        write!(f, "{c}")?;
                        first = false;
                    }
                    write!(f, ")")
                }
            }
        }
    }
}

/// Modulus text: "x^3+x+1" style or "1,1,0,1" little-endian.
fn parse_modulus(s: &str, p: u64) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.contains(',') || !s.contains('x') {
        let coeffs: std::result::Result<Vec<u64>, _> =
            s.split(',').map(|c| c.trim().parse::<u64>()).collect();
        return coeffs.map_err(|_| Error::ParamError(format!("bad modulus list '{s}'")));
    }
    // polynomial in x with integer coefficients, terms joined by + or -
    let mut coeffs: Vec<u64> = vec![];
    let normalized = s.replace('-', "+-").replace(' ', "");
    for term in normalized.split('+') {
        if term.is_empty() {
            continue;
        }
        let (neg, term) = match term.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, term),
        };
        let (coef, deg) = if let Some(rest) = term.strip_prefix("x") {
            let d = if let Some(e) = rest.strip_prefix('^') {
                e.parse::<usize>()
                    .map_err(|_| Error::ParamError(format!("bad exponent in '{s}'")))?
            } else if rest.is_empty() {
                1
            } else {
                return Err(Error::ParamError(format!("bad term '{term}'")));
            };
            (1u64, d)
        } else if let Some((c, rest)) = term.split_once('x') {
            let c = c
                .trim_end_matches('*')
                .parse::<u64>()
                .map_err(|_| Error::ParamError(format!("bad coefficient in '{term}'")))?;
            let d = if let Some(e) = rest.strip_prefix('^') {
                e.parse::<usize>()
                    .map_err(|_| Error::ParamError(format!("bad exponent in '{s}'")))?
            } else if rest.is_empty() {
                1
            } else {
                return Err(Error::ParamError(format!("bad term '{term}'")));
            };
            (c, d)
        } else {
            let c = term
                .parse::<u64>()
                .map_err(|_| Error::ParamError(format!("bad constant in '{term}'")))?;
            (c, 0)
        };
        if coeffs.len() <= deg {
            coeffs.resize(deg + 1, 0);
        }
        let c = coef % p;
        coeffs[deg] = if neg {
            subm(coeffs[deg], c, p)
        } else {
            addm(coeffs[deg], c, p)
        };
    }
    Ok(coeffs)
}

trait ModFloorU64 {
    fn mod_floor_u64(&self, p: u64) -> u64;
}
impl ModFloorU64 for BigInt {
    fn mod_floor_u64(&self, p: u64) -> u64 {
        use num_integer::Integer;
        let m = self.mod_floor(&BigInt::from(p));
        m.to_u64().expect("mod_floor result fits u64")
    }
}

// ---------------------------------------------------------------------------
// Scalar
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Value {
    Rat(BigRational),
    Fin(Vec<u64>),
}

/// An element of a ground field, in canonical form: reduced fraction with
/// positive denominator, or a coefficient vector of length k reduced mod p.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    spec: FieldSpec,
    value: Value,
}

impl Scalar {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn is_zero(&self) -> bool {
        match &self.value {
            Value::Rat(r) => r.is_zero(),
            Value::Fin(v) => v.iter().all(|&c| c == 0),
        }
    }

    pub fn is_one(&self) -> bool {
        match &self.value {
            Value::Rat(r) => r.is_one(),
            Value::Fin(v) => v[0] == 1 && v[1..].iter().all(|&c| c == 0),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match &self.value {
            Value::Rat(r) => Some(r),
            Value::Fin(_) => None,
        }
    }

    pub fn coeffs(&self) -> Option<&[u64]> {
        match &self.value {
            Value::Fin(v) => Some(v),
            Value::Rat(_) => None,
        }
    }

    pub fn rational(r: BigRational) -> Scalar {
        Scalar {
            spec: FieldSpec::rationals(),
            value: Value::Rat(r),
        }
    }

    fn same_spec(&self, other: &Scalar) {
        assert!(
            self.spec == other.spec,
            "scalar operands from different fields"
        );
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.same_spec(other);
        match (&self.value, &other.value) {
            (Value::Rat(a), Value::Rat(b)) => Scalar {
                spec: self.spec.clone(),
                value: Value::Rat(a + b),
            },
            (Value::Fin(a), Value::Fin(b)) => {
                let p = self.spec.characteristic();
                let v = a
                    .iter()
                    .zip(b.iter())
                    .map(|(&x, &y)| addm(x, y, p))
                    .collect();
                Scalar {
                    spec: self.spec.clone(),
                    value: Value::Fin(v),
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Scalar {
        match &self.value {
            Value::Rat(a) => Scalar {
                spec: self.spec.clone(),
                value: Value::Rat(-a),
            },
            Value::Fin(a) => {
                let p = self.spec.characteristic();
                let v = a.iter().map(|&x| if x == 0 { 0 } else { p - x }).collect();
                Scalar {
                    spec: self.spec.clone(),
                    value: Value::Fin(v),
                }
            }
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        self.same_spec(other);
        match (&self.value, &other.value) {
            (Value::Rat(a), Value::Rat(b)) => Scalar {
                spec: self.spec.clone(),
                value: Value::Rat(a * b),
            },
            (Value::Fin(a), Value::Fin(b)) => {
                let p = self.spec.characteristic();
                let k = a.len();
                if k == 1 {
                    return Scalar {
                        spec: self.spec.clone(),
                        value: Value::Fin(vec![mulm(a[0], b[0], p)]),
                    };
                }
                let m = self.spec.modulus().unwrap();
                let prod = fp_mul(a, b, p);
                let mut r = fp_rem(&prod, m, p);
                r.resize(k, 0);
                Scalar {
                    spec: self.spec.clone(),
                    value: Value::Fin(r),
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        match &self.value {
            Value::Rat(a) => Ok(Scalar {
                spec: self.spec.clone(),
                value: Value::Rat(a.recip()),
            }),
            Value::Fin(a) => {
                let p = self.spec.characteristic();
                let k = a.len();
                if k == 1 {
                    return Ok(Scalar {
                        spec: self.spec.clone(),
                        value: Value::Fin(vec![invm(a[0], p)]),
                    });
                }
                let m = self.spec.modulus().unwrap();
                let (g, s) = fp_ext_gcd(a, m, p);
                debug_assert_eq!(g, vec![1]);
                let mut v = fp_rem(&s, m, p);
                v.resize(k, 0);
                Ok(Scalar {
                    spec: self.spec.clone(),
                    value: Value::Fin(v),
                })
            }
        }
    }

    /// Checked binary arithmetic, surfacing FieldMismatch instead of panicking.
    pub fn checked_op(op: &str, a: &Scalar, b: Option<&Scalar>) -> Result<Scalar> {
        if let Some(b) = b {
            if a.spec != b.spec {
                return Err(Error::FieldMismatch);
            }
        }
        match (op, b) {
            ("add", Some(b)) => Ok(a.add(b)),
            ("sub", Some(b)) => Ok(a.sub(b)),
            ("mul", Some(b)) => Ok(a.mul(b)),
            ("neg", None) => Ok(a.neg()),
            ("inv", None) => a.inv(),
            _ => Err(Error::ParamError(format!("unknown scalar op '{op}'"))),
        }
    }

    /// Canonical conversion into `target`: identity, reduction of a rational
    /// mod p (fails when the denominator vanishes mod p), or the lift of a
    /// prime-subfield element into an extension. General subfield embeddings
    /// go through `Embedding`.
    pub fn convert_to(&self, target: &FieldSpec) -> Result<Scalar> {
        if &self.spec == target {
            return Ok(self.clone());
        }
        match (&self.value, &*target.0) {
            (Value::Rat(r), Kind::Finite { p, k, .. }) => {
                let den = r.denom().mod_floor_u64(*p);
                if den == 0 {
                    return Err(Error::DivisionByZero);
                }
                let num = r.numer().mod_floor_u64(*p);
                let mut v = vec![0u64; *k];
                v[0] = mulm(num, invm(den, *p), *p);
                Ok(Scalar {
                    spec: target.clone(),
                    value: Value::Fin(v),
                })
            }
            (Value::Fin(a), Kind::Finite { p, k, .. })
                if self.spec.characteristic() == *p
                    && self.spec.extension_degree() == Some(1) =>
            {
                let mut v = vec![0u64; *k];
                v[0] = a[0];
                Ok(Scalar {
                    spec: target.clone(),
                    value: Value::Fin(v),
                })
            }
            _ => Err(Error::FieldMismatch),
        }
    }

    /// Parse an element in the textual form produced by Display.
    pub fn parse(spec: &FieldSpec, text: &str) -> Result<Scalar> {
        let t = text.trim();
        match &*spec.0 {
            Kind::Rationals => {
                let r = match t.split_once('/') {
                    Some((n, d)) => {
                        let n: BigInt = n
                            .trim()
                            .parse()
                            .map_err(|_| Error::ParamError(format!("bad rational '{t}'")))?;
                        let d: BigInt = d
                            .trim()
                            .parse()
                            .map_err(|_| Error::ParamError(format!("bad rational '{t}'")))?;
                        if d.is_zero() {
                            return Err(Error::DivisionByZero);
                        }
                        BigRational::new(n, d)
                    }
                    None => {
                        let n: BigInt = t
                            .parse()
                            .map_err(|_| Error::ParamError(format!("bad rational '{t}'")))?;
                        BigRational::from_integer(n)
                    }
                };
                Ok(Scalar {
                    spec: spec.clone(),
                    value: Value::Rat(r),
                })
            }
            Kind::Finite { p, k, .. } => {
                let coeffs: std::result::Result<Vec<i64>, _> =
                    t.split(',').map(|c| c.trim().parse::<i64>()).collect();
                let coeffs =
                    coeffs.map_err(|_| Error::ParamError(format!("bad field element '{t}'")))?;
                if coeffs.len() > *k {
                    return Err(Error::ParamError(format!(
                        "element '{t}' has more than {k} coefficients"
                    )));
                }
                let mut v = vec![0u64; *k];
                for (i, c) in coeffs.iter().enumerate() {
                    v[i] = c.rem_euclid(*p as i64) as u64;
                }
                Ok(Scalar {
                    spec: spec.clone(),
                    value: Value::Fin(v),
                })
            }
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Value::Rat(r) => {
                if r.denom().is_one() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "{}/{}", r.numer(), r.denom())
                }
            }
            Value::Fin(v) => {
                if v.len() == 1 {
                    write!(f, "{}", v[0])
                } else {
                    let mut first = true;
                    for c in v {
                        if !first {
                            write!(f, ",")?;
                        }
                        write!(f, "{c}")?;
                        first = false;
                    }
                    Ok(())
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Draw a random scalar: over Q an integer uniform in [0, bound), over a
/// finite field a uniform element. Deterministic per rng state.
pub fn sample_scalar(spec: &FieldSpec, rng: &mut impl Rng, bound: u64) -> Scalar {
    match &*spec.0 {
        Kind::Rationals => {
            assert!(bound >= 2, "bound must be at least 2 over Q");
            let n = rng.gen_range(0..bound);
            spec.from_i64(n as i64)
        }
        Kind::Finite { p, k, .. } => {
            let v = (0..*k).map(|_| rng.gen_range(0..*p)).collect();
            Scalar {
                spec: spec.clone(),
                value: Value::Fin(v),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Embeddings and sampling fields
// ---------------------------------------------------------------------------

/// An embedding of one finite field (or Q) into a larger one, with an exact
/// pull-back for elements in the image.
#[derive(Clone, Debug)]
pub struct Embedding {
    from: FieldSpec,
    to: FieldSpec,
    /// alpha^0..alpha^(k-1) in `to`, where alpha is a root of the base modulus.
    alpha_pows: Vec<Scalar>,
}

impl Embedding {
    pub fn identity(spec: &FieldSpec) -> Embedding {
        Embedding {
            from: spec.clone(),
            to: spec.clone(),
            alpha_pows: vec![],
        }
    }

    pub fn from_spec(&self) -> &FieldSpec {
        &self.from
    }

    pub fn to_spec(&self) -> &FieldSpec {
        &self.to
    }

    pub fn is_identity(&self) -> bool {
        self.from == self.to
    }

    pub fn embed(&self, s: &Scalar) -> Scalar {
        assert_eq!(s.spec, self.from);
        if self.is_identity() {
            return s.clone();
        }
        let coeffs = s.coeffs().expect("finite base field");
        let mut acc = self.to.zero();
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let ci = self.to.from_i64(c as i64);
            acc = acc.add(&ci.mul(&self.alpha_pows[i]));
        }
        acc
    }

    /// Inverse of `embed` on its image; None for elements outside it.
    pub fn pull_back(&self, s: &Scalar) -> Option<Scalar> {
        assert_eq!(*s.spec(), self.to);
        if self.is_identity() {
            return Some(s.clone());
        }
        let p = self.to.characteristic();
        let big_k = self.to.extension_degree().unwrap();
        let small_k = self.from.extension_degree().unwrap();
        // Solve sum_i c_i * alpha^i = s over F_p: Gauss-Jordan on the
        // augmented big_k x (small_k + 1) matrix whose columns are the
        // coordinate vectors of alpha^i.
        let mut aug = vec![vec![0u64; small_k + 1]; big_k];
        for (i, a) in self.alpha_pows.iter().enumerate() {
            for (r, &c) in a.coeffs().unwrap().iter().enumerate() {
                aug[r][i] = c;
            }
        }
        for (r, &c) in s.coeffs().unwrap().iter().enumerate() {
            aug[r][small_k] = c;
        }
        let mut pivot_of_col = vec![usize::MAX; small_k];
        let mut row = 0;
        for col in 0..small_k {
            let pr = (row..big_k).find(|&r| aug[r][col] != 0)?;
            aug.swap(row, pr);
            let piv_inv = invm(aug[row][col], p);
            for c in col..=small_k {
                aug[row][c] = mulm(aug[row][c], piv_inv, p);
            }
            for r in 0..big_k {
                if r == row || aug[r][col] == 0 {
                    continue;
                }
                let f = aug[r][col];
                for c in col..=small_k {
                    let t = mulm(f, aug[row][c], p);
                    aug[r][c] = subm(aug[r][c], t, p);
                }
            }
            pivot_of_col[col] = row;
            row += 1;
        }
        // Rows below the pivots must have vanished for the system to be
        // consistent.
        if aug[row..].iter().any(|r| r[small_k] != 0) {
            return None;
        }
        let sol: Vec<u64> = pivot_of_col.iter().map(|&r| aug[r][small_k]).collect();
        self.from.from_coeffs(&sol).ok()
    }
}

/// Minimum sampling-field size used by the randomized identity tests.
pub const MIN_SAMPLE_FIELD: u128 = 1 << 16;

/// The field to draw random matrix entries from when testing expressions over
/// `base`: Q itself, or the smallest extension of F_{p^k} with at least
/// `min_size` elements.
pub fn sampling_field(base: &FieldSpec, min_size: u128) -> Result<(FieldSpec, Embedding)> {
    match &*base.0 {
        Kind::Rationals => Ok((base.clone(), Embedding::identity(base))),
        Kind::Finite { p, k, .. } => {
            if base.order().map_or(true, |o| o >= min_size) {
                return Ok((base.clone(), Embedding::identity(base)));
            }
            let mut kk = *k;
            loop {
                kk += k;
                let mut size: u128 = 1;
                let mut big_enough = false;
                for _ in 0..kk {
                    match size.checked_mul(*p as u128) {
                        Some(s) => size = s,
                        None => {
                            big_enough = true;
                            break;
                        }
                    }
                }
                if big_enough || size >= min_size {
                    break;
                }
            }
            let ext = FieldSpec::finite(*p, kk, None)?;
            let emb = build_embedding(base, &ext)?;
            Ok((ext, emb))
        }
    }
}

/// Embedding of F_{p^k} into F_{p^K} (k | K) by sending the base generator to
/// a root of the base modulus in the extension. The root choice is
/// deterministic per (p, k, K).
pub fn build_embedding(base: &FieldSpec, ext: &FieldSpec) -> Result<Embedding> {
    let p = base.characteristic();
    let k = base
        .extension_degree()
        .ok_or(Error::FieldMismatch)?;
    let kk = ext.extension_degree().ok_or(Error::FieldMismatch)?;
    if ext.characteristic() != p || kk % k != 0 {
        return Err(Error::FieldMismatch);
    }
    if base == ext {
        return Ok(Embedding::identity(base));
    }
    if k == 1 {
        return Ok(Embedding {
            from: base.clone(),
            to: ext.clone(),
            alpha_pows: vec![ext.one()],
        });
    }
    // Base modulus as a polynomial over the extension (F_p coefficients lift
    // trivially), then find one of its roots there.
    let f: Vec<Scalar> = base
        .modulus()
        .unwrap()
        .iter()
        .map(|&c| ext.from_i64(c as i64))
        .collect();
    let poly = crate::poly::SPoly::from_coeffs(ext.clone(), f);
    use rand::SeedableRng;
    let seed = p
        .wrapping_mul(1_000_003)
        .wrapping_add(k as u64 * 10_007)
        .wrapping_add(kk as u64);
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let alpha = crate::poly::one_root_in_finite_field(&poly, &mut rng)
        .ok_or_else(|| Error::Inconclusive("no root of base modulus in extension".into()))?;
    let mut pows = vec![ext.one()];
    for _ in 1..k {
        let last = pows.last().unwrap().clone();
        pows.push(last.mul(&alpha));
    }
    Ok(Embedding {
        from: base.clone(),
        to: ext.clone(),
        alpha_pows: pows,
    })
}
