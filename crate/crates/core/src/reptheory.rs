//! Finite-dimensional modules over a finite group and their decomposition
//! into irreducible stable subspaces, in the non-modular case.
//!
//! The splitter averages a random endomorphism over the group, which always
//! lands in the commutant; eigenspaces and kernels of its minimal-polynomial
//! factors are stable subspaces, and Maschke averaging turns any stable
//! subspace into a direct summand. When a non-scalar commutant element has
//! no eigenvalues in the ground field the decomposition would need a field
//! extension, which is reported rather than guessed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldSpec, Scalar};
use crate::kmat::KMat;
use crate::poly::roots_in_field;

/// A linear action of a finite group: one invertible matrix per element,
/// closed under products (the composition convention does not matter for
/// finding stable subspaces).
#[derive(Clone, Debug)]
pub struct GModule {
    pub spec: FieldSpec,
    pub dim: usize,
    pub action: Vec<KMat>,
}

impl GModule {
    pub fn new(spec: FieldSpec, action: Vec<KMat>) -> Result<GModule> {
        let dim = action.first().map_or(0, |a| a.rows());
        for a in &action {
            if a.rows() != dim || a.cols() != dim {
                return Err(Error::ShapeMismatch("action matrices must be square".into()));
            }
        }
        Ok(GModule { spec, dim, action })
    }

    pub fn order(&self) -> usize {
        self.action.len()
    }
}

/// The h-th tensor power of a linear action: the module structure on the
/// degree-h layer spanned by words of length h. Word (i_1, ..., i_h) has
/// index sum_j i_j m^(h-1-j).
pub fn degree_layer_module(spec: &FieldSpec, lparts: &[KMat], h: usize) -> GModule {
    let action = lparts
        .iter()
        .map(|l| {
            let mut acc = KMat::identity(spec, 1);
            for _ in 0..h {
                acc = acc.kron(l);
            }
            acc
        })
        .collect();
    GModule {
        spec: spec.clone(),
        dim: lparts.first().map_or(1, |l| l.rows()).pow(h as u32),
        action,
    }
}

const SPLIT_TRIES: usize = 12;

/// Decompose into irreducible stable subspaces: returns basis matrices
/// (dim x d_i columns) whose concatenation is a basis of the whole space.
/// Requires the group order invertible in the ground field.
pub fn decompose_irreducibles(module: &GModule, rng: &mut impl Rng) -> Result<Vec<KMat>> {
    let p = module.spec.characteristic();
    if p != 0 && module.order() as u64 % p == 0 {
        return Err(Error::CharDivides);
    }
    if module.dim == 0 {
        return Ok(vec![]);
    }
    split_rec(module, rng)
}

fn split_rec(module: &GModule, rng: &mut impl Rng) -> Result<Vec<KMat>> {
    let n = module.dim;
    let spec = &module.spec;
    if n <= 1 {
        return Ok(vec![KMat::identity(spec, n)]);
    }
    let inverses: Vec<KMat> = module
        .action
        .iter()
        .map(|a| a.inverse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::ShapeMismatch("action matrix is singular".into()))?;
    let avg = Scalar::checked_op(
        "inv",
        &spec.from_i64(module.order() as i64),
        None,
    )?;
    let mut leftover_seen: Option<usize> = None;
    for attempt in 0..n + SPLIT_TRIES {
        // First strategy: the cyclic submodule of a vector. This is the
        // splitter that works for isotypic modules, where commutant elements
        // generically have no eigenvalues in the ground field. Unit vectors
        // are tried before random ones to keep the output natural and
        // reproducible.
        let v = if attempt < n {
            let mut u = KMat::zero(spec, n, 1);
            u.set(attempt, 0, spec.one());
            u
        } else {
            KMat::random(spec, n, 1, rng, 256)
        };
        let mut orbit = v;
        for a in &module.action[1..] {
            orbit = orbit.hstack(&a.mul(&orbit.submatrix(0, 0, n, 1))?)?;
        }
        let mut cyc = column_basis(&orbit)?;
        // The span of one orbit need not be stable yet; saturate it.
        loop {
            let mut ext = cyc.clone();
            for a in &module.action {
                ext = ext.hstack(&a.mul(&cyc)?)?;
            }
            let bigger = column_basis(&ext)?;
            if bigger.cols() == cyc.cols() {
                break;
            }
            cyc = bigger;
        }
        if cyc.cols() > 0 && cyc.cols() < n {
            let t = maschke_complement(module, &cyc)?;
            let mut out = vec![];
            for (basis, sub) in [
                (&cyc, restrict(module, &cyc)?),
                (&t, restrict(module, &t)?),
            ] {
                for piece in split_rec(&sub, rng)? {
                    out.push(basis.mul(&piece)?);
                }
            }
            return Ok(out);
        }
        let r = KMat::random(spec, n, n, rng, 256);
        // E = (1/|G|) sum_g A(g)^-1 R A(g) commutes with the whole action.
        let mut e = KMat::zero(spec, n, n);
        for (a, ai) in module.action.iter().zip(&inverses) {
            e = e.add(&ai.mul(&r)?.mul(a)?)?;
        }
        let e = e.scale(&avg);
        if e.as_scalar_multiple_of_identity().is_some() {
            continue;
        }
        let f = e.min_poly();
        let (roots, leftover) = roots_in_field(&f, rng);
        if roots.is_empty() {
            if leftover > 0 {
                leftover_seen = Some(leftover_seen.map_or(leftover, |l| l.min(leftover)));
            }
            continue;
        }
        // Stable subspace: the generalized eigenspace of the first root, or
        // the plain eigenspace when one root fills the whole space.
        for (lam, mult) in &roots {
            let lam_i = KMat::identity(spec, n).scale(lam);
            let shifted = e.sub(&lam_i)?;
            let mut pow = KMat::identity(spec, n);
            for _ in 0..*mult {
                pow = pow.mul(&shifted)?;
            }
            let mut s = pow.kernel();
            if s.cols() == n {
                // E - lam is nilpotent on the whole space; use its plain
                // kernel, proper because E is not scalar.
                s = shifted.kernel();
            }
            if s.cols() == 0 || s.cols() == n {
                continue;
            }
            let t = maschke_complement(module, &s)?;
            let mut out = vec![];
            for (basis, sub) in [(&s, restrict(module, &s)?), (&t, restrict(module, &t)?)] {
                for piece in split_rec(&sub, rng)? {
                    out.push(basis.mul(&piece)?);
                }
            }
            return Ok(out);
        }
    }
    match leftover_seen {
        Some(degree) => Err(Error::SplittingFieldNeeded { degree }),
        None => Ok(vec![KMat::identity(spec, n)]),
    }
}

/// Greedy column-space basis of a matrix.
pub(crate) fn column_basis(m: &KMat) -> Result<KMat> {
    let mut out: Option<KMat> = None;
    for j in 0..m.cols() {
        let col = m.submatrix(0, j, m.rows(), 1);
        if col.is_zero() {
            continue;
        }
        match &out {
            None => out = Some(col),
            Some(b) => {
                let cand = b.hstack(&col)?;
                if cand.rank() == cand.cols() {
                    out = Some(cand);
                }
            }
        }
    }
    Ok(out.unwrap_or_else(|| KMat::zero(m.spec(), m.rows(), 0)))
}

/// Restriction of the action to the span of `basis`: solves
/// basis * A_S(g) = A(g) * basis.
fn restrict(module: &GModule, basis: &KMat) -> Result<GModule> {
    let mut action = Vec::with_capacity(module.action.len());
    for a in &module.action {
        let rhs = a.mul(basis)?;
        let sol = basis
            .solve(&rhs)
            .ok_or_else(|| Error::ShapeMismatch("subspace is not stable".into()))?;
        action.push(sol);
    }
    GModule::new(module.spec.clone(), action)
}

/// A stable complement of the stable subspace spanned by `s`, by averaging
/// an arbitrary projector onto s over the group.
fn maschke_complement(module: &GModule, s: &KMat) -> Result<KMat> {
    let n = module.dim;
    let spec = &module.spec;
    let k = s.cols();
    // Extend s to a basis of the ambient space with unit vectors.
    let mut ext = s.clone();
    for j in 0..n {
        if ext.cols() == n {
            break;
        }
        let mut unit = KMat::zero(spec, n, 1);
        unit.set(j, 0, spec.one());
        let cand = ext.hstack(&unit)?;
        if cand.rank() == cand.cols() {
            ext = cand;
        }
    }
    debug_assert_eq!(ext.cols(), n);
    let ext_inv = ext.inverse()?;
    // P0: projector onto span(s) along the added unit vectors.
    let mut diag = KMat::zero(spec, n, n);
    for i in 0..k {
        diag.set(i, i, spec.one());
    }
    let p0 = ext.mul(&diag)?.mul(&ext_inv)?;
    let mut p = KMat::zero(spec, n, n);
    for a in &module.action {
        let ai = a.inverse()?;
        p = p.add(&a.mul(&p0)?.mul(&ai)?)?;
    }
    let avg = spec.from_i64(module.action.len() as i64).inv()?;
    let p = p.scale(&avg);
    let t = p.kernel();
    if t.cols() + k != n {
        return Err(Error::ShapeMismatch(
            "averaged projector has wrong rank".into(),
        ));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn qmat(rows: &[&[i64]]) -> KMat {
        let q = FieldSpec::rationals();
        KMat::from_rows(
            &q,
            rows.iter()
                .map(|r| r.iter().map(|&c| q.from_i64(c)).collect())
            .collect(),
        )
        .unwrap()
    }

    fn check_blocks(module: &GModule, blocks: &[KMat]) {
        let total: usize = blocks.iter().map(|b| b.cols()).sum();
        assert_eq!(total, module.dim);
        let mut all = blocks[0].clone();
        for b in &blocks[1..] {
            all = all.hstack(b).unwrap();
        }
        assert_eq!(all.rank(), module.dim);
        for b in blocks {
            for a in &module.action {
                let moved = a.mul(b).unwrap();
                assert!(b.solve(&moved).is_some(), "block not stable");
            }
        }
    }

    #[test]
    fn sign_action_splits_into_lines() {
        let q = FieldSpec::rationals();
        let id = KMat::identity(&q, 2);
        let neg = id.neg();
        // x -> -x, y -> y: two one-dimensional blocks.
        let flip = qmat(&[&[-1, 0], &[0, 1]]);
        let module = GModule::new(q.clone(), vec![id.clone(), flip]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let blocks = decompose_irreducibles(&module, &mut rng).unwrap();
        assert_eq!(blocks.len(), 2);
        check_blocks(&module, &blocks);
        // -I acts scalar: the module is isotypic but still splits into lines.
        let module2 = GModule::new(q, vec![id, neg]).unwrap();
        let blocks2 = decompose_irreducibles(&module2, &mut rng).unwrap();
        assert_eq!(blocks2.len(), 2);
        check_blocks(&module2, &blocks2);
    }

    #[test]
    fn permutation_module_splits_one_plus_two() {
        // S3 permuting coordinates of Q^3: trivial + standard.
        let e = qmat(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]);
        let s12 = qmat(&[&[0, 1, 0], &[1, 0, 0], &[0, 0, 1]]);
        let s13 = qmat(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]);
        let s23 = qmat(&[&[1, 0, 0], &[0, 0, 1], &[0, 1, 0]]);
        let c1 = s12.mul(&s13).unwrap();
        let c2 = s13.mul(&s12).unwrap();
        let q = FieldSpec::rationals();
        let module = GModule::new(q, vec![e, s12, s13, s23, c1, c2]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let blocks = decompose_irreducibles(&module, &mut rng).unwrap();
        let mut dims: Vec<usize> = blocks.iter().map(|b| b.cols()).collect();
        dims.sort();
        assert_eq!(dims, vec![1, 2]);
        check_blocks(&module, &blocks);
    }

    #[test]
    fn rotation_needs_a_splitting_field() {
        // C4 rotating Q^2: the commutant is Q(i), no eigenvalues in Q.
        let r = qmat(&[&[0, -1], &[1, 0]]);
        let r2 = r.mul(&r).unwrap();
        let r3 = r2.mul(&r).unwrap();
        let q = FieldSpec::rationals();
        let module =
            GModule::new(q.clone(), vec![KMat::identity(&q, 2), r, r2, r3]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        match decompose_irreducibles(&module, &mut rng) {
            Err(Error::SplittingFieldNeeded { degree }) => assert_eq!(degree, 2),
            other => panic!("expected SplittingFieldNeeded, got {other:?}"),
        }
    }

    #[test]
    fn scaling_action_over_f7() {
        // C3 scaling by 2 over F7 (2^3 = 1 mod 7): diag(2^i) on two
        // variables scaled by 2 and 4.
        let f7 = FieldSpec::prime(7).unwrap();
        let l1 = KMat::from_rows(
            &f7,
            vec![
                vec![f7.from_i64(2), f7.zero()],
                vec![f7.zero(), f7.from_i64(4)],
            ],
        )
        .unwrap();
        let l2 = l1.mul(&l1).unwrap();
        let module = GModule::new(f7.clone(), vec![KMat::identity(&f7, 2), l1, l2]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let blocks = decompose_irreducibles(&module, &mut rng).unwrap();
        assert_eq!(blocks.len(), 2);
        check_blocks(&module, &blocks);
    }

    #[test]
    fn modular_case_rejected() {
        let f2 = FieldSpec::prime(2).unwrap();
        let id = KMat::identity(&f2, 2);
        let swap = KMat::from_rows(
            &f2,
            vec![
                vec![f2.zero(), f2.one()],
                vec![f2.one(), f2.zero()],
            ],
        )
        .unwrap();
        let module = GModule::new(f2, vec![id, swap]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        assert!(matches!(
            decompose_irreducibles(&module, &mut rng),
            Err(Error::CharDivides)
        ));
    }

    #[test]
    fn tensor_layer_dimensions() {
        let q = FieldSpec::rationals();
        let l = qmat(&[&[-1, 0], &[0, -1]]);
        let module = degree_layer_module(&q, &[KMat::identity(&q, 2), l], 3);
        assert_eq!(module.dim, 8);
        assert_eq!(module.action[1], {
            let mut acc = KMat::identity(&q, 1);
            let l = qmat(&[&[-1, 0], &[0, -1]]);
            for _ in 0..3 {
                acc = acc.kron(&l);
            }
            acc
        });
    }
}
