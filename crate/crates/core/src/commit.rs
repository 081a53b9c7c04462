//! Homomorphic commitments backing verifiable secret sharing.
//!
//! Pedersen-style: `commit(m, r) = g^m · h^r` in the prime-order-`q`
//! subgroup of Z*_P, where `P = 2q + 1` is a safe prime and `q` equals the
//! sharing field prime. Matching the exponent order to the field prime is
//! what makes Lagrange interpolation carry over to commitments: the same
//! coefficients that combine shares combine the exponents.
//!
//! Parameters are toy-scale on purpose; the simulator asserts the algebraic
//! identities (homomorphism, exponent scaling, interpolation), not
//! computational hardness.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::{lagrange_coefficients, Field, FieldElement, FieldError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommitError {
    #[error("no safe-prime group available for field prime {0}")]
    NoGroup(u64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Group parameters shared by every party in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentParams {
    /// Safe-prime group modulus `P = 2q + 1`.
    modulus: u64,
    /// Order of the subgroup; equals the sharing field prime.
    order: u64,
    g: u64,
    h: u64,
}

/// A group element produced by `commit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Commitment(pub u64);

impl CommitmentParams {
    /// Derives parameters from the sharing field. Requires `2p + 1` prime,
    /// which holds for the default field prime.
    ///
    /// Generators come from hashing fixed labels into the quadratic-residue
    /// subgroup, so all parties agree without a setup message and nobody
    /// knows the discrete log of `h` base `g`.
    pub fn derive(field: &Field) -> Result<CommitmentParams, CommitError> {
        let q = field.prime();
        let modulus = q.checked_mul(2).and_then(|x| x.checked_add(1)).ok_or(CommitError::NoGroup(q))?;
        if !crate::field::is_prime_u64(modulus) {
            return Err(CommitError::NoGroup(q));
        }
        let g = hash_to_subgroup(modulus, b"commitment-generator:g");
        let h = hash_to_subgroup(modulus, b"commitment-generator:h");
        Ok(CommitmentParams { modulus, order: q, g, h })
    }

    pub fn identity(&self) -> Commitment {
        Commitment(1)
    }

    /// `g^m · h^r`.
    pub fn commit(&self, m: FieldElement, r: FieldElement) -> Commitment {
        let gm = powmod(self.g, m.0, self.modulus);
        let hr = powmod(self.h, r.0, self.modulus);
        Commitment(mulmod(gm, hr, self.modulus))
    }

    /// Group product; commits to the sum of messages and randomness.
    pub fn combine(&self, a: Commitment, b: Commitment) -> Commitment {
        Commitment(mulmod(a.0, b.0, self.modulus))
    }

    /// `c^e`; commits to `(e·m, e·r)` for a public constant `e`.
    pub fn scale(&self, c: Commitment, e: FieldElement) -> Commitment {
        Commitment(powmod(c.0, e.0, self.modulus))
    }

    /// Multiplies in `g^c`, shifting the committed message by a public
    /// constant without touching the randomness.
    pub fn shift_message(&self, c: Commitment, delta: FieldElement) -> Commitment {
        self.combine(c, Commitment(powmod(self.g, delta.0, self.modulus)))
    }

    pub fn verify_opening(&self, c: Commitment, m: FieldElement, r: FieldElement) -> bool {
        self.commit(m, r) == c
    }

    /// `Π C_i^{w_i}` with Lagrange weights for the point `at`: the
    /// commitment to the interpolated (message, randomness) pair.
    pub fn interpolate(
        &self,
        field: &Field,
        points: &[(FieldElement, Commitment)],
        at: FieldElement,
    ) -> Result<Commitment, CommitError> {
        let xs: Vec<FieldElement> = points.iter().map(|p| p.0).collect();
        let weights = lagrange_coefficients(field, &xs, at)?;
        let mut acc = self.identity();
        for (w, (_, c)) in weights.iter().zip(points) {
            acc = self.combine(acc, self.scale(*c, *w));
        }
        Ok(acc)
    }
}

/// Hash-to-subgroup: squaring a nonzero element of Z*_P lands in the
/// order-q quadratic-residue subgroup.
fn hash_to_subgroup(modulus: u64, label: &[u8]) -> u64 {
    let mut counter = 0u32;
    loop {
        let mut hasher = Sha256::new();
        hasher.update(label);
        hasher.update(counter.to_le_bytes());
        let digest = hasher.finalize();
        let x = u64::from_le_bytes(digest[..8].try_into().unwrap()) % modulus;
        let candidate = mulmod(x, x, modulus);
        if candidate > 1 {
            return candidate;
        }
        counter += 1;
    }
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, b, m);
        }
        b = mulmod(b, b, m);
        e >>= 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Polynomial;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Field, CommitmentParams) {
        let field = Field::default();
        let params = CommitmentParams::derive(&field).unwrap();
        (field, params)
    }

    #[test]
    fn generators_have_subgroup_order() {
        let (field, p) = setup();
        assert_eq!(powmod(p.g, field.prime(), p.modulus), 1);
        assert_eq!(powmod(p.h, field.prime(), p.modulus), 1);
        assert_ne!(p.g, p.h);
        assert!(p.g > 1 && p.h > 1);
    }

    #[test]
    fn commit_zero_is_identity_and_deterministic() {
        let (field, p) = setup();
        assert_eq!(p.commit(FieldElement::ZERO, FieldElement::ZERO), p.identity());
        assert!(p.verify_opening(p.identity(), FieldElement::ZERO, FieldElement::ZERO));
        let (m, r) = (field.elem(123), field.elem(456));
        assert_eq!(p.commit(m, r), p.commit(m, r));
    }

    #[test]
    fn nearby_messages_commit_differently() {
        let (field, p) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..32 {
            let m = field.random(&mut rng);
            let r = field.random(&mut rng);
            assert_ne!(p.commit(m, r), p.commit(field.add(m, FieldElement::ONE), r));
            assert!(!p.verify_opening(p.commit(m, r), field.add(m, FieldElement::ONE), r));
        }
    }

    #[test]
    fn homomorphism() {
        let (field, p) = setup();
        // hand-checkable instance
        assert_eq!(
            p.combine(p.commit(field.elem(2), field.elem(3)), p.commit(field.elem(5), field.elem(7))),
            p.commit(field.elem(7), field.elem(10))
        );
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..64 {
            let (m1, r1) = (field.random(&mut rng), field.random(&mut rng));
            let (m2, r2) = (field.random(&mut rng), field.random(&mut rng));
            let a = p.commit(m1, r1);
            let b = p.commit(m2, r2);
            assert_eq!(p.combine(a, b), p.commit(field.add(m1, m2), field.add(r1, r2)));
            assert_eq!(p.combine(a, b), p.combine(b, a));
            assert_eq!(p.combine(a, p.identity()), a);
        }
    }

    #[test]
    fn exponent_scaling() {
        let (field, p) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..32 {
            let (m, r) = (field.random(&mut rng), field.random(&mut rng));
            let c = field.random(&mut rng);
            assert_eq!(p.scale(p.commit(m, r), c), p.commit(field.mul(c, m), field.mul(c, r)));
        }
    }

    #[test]
    fn message_shift() {
        let (field, p) = setup();
        let (m, r) = (field.elem(10), field.elem(20));
        let d = field.elem(5);
        assert_eq!(p.shift_message(p.commit(m, r), d), p.commit(field.add(m, d), r));
    }

    #[test]
    fn interpolation_matches_polynomials() {
        let (field, p) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = 3;
        let fm = Polynomial::random_with_secret(&field, field.elem(99), t, &mut rng);
        let fr = Polynomial::random_with_secret(&field, field.elem(55), t, &mut rng);
        let commitments: Vec<(FieldElement, Commitment)> = (1..=(t as u64) + 1)
            .map(|i| {
                let x = field.elem(i);
                (x, p.commit(fm.eval(&field, x), fr.eval(&field, x)))
            })
            .collect();
        // at 0: the commitment to both constant terms
        let at_zero = p.interpolate(&field, &commitments, FieldElement::ZERO).unwrap();
        assert_eq!(at_zero, p.commit(field.elem(99), field.elem(55)));
        // at a held index: reproduces that commitment exactly
        let held = p.interpolate(&field, &commitments, field.elem(2)).unwrap();
        assert_eq!(held, commitments[1].1);
        // single point at its own index
        let single = p.interpolate(&field, &commitments[..1], field.elem(1)).unwrap();
        assert_eq!(single, commitments[0].1);
    }
}
