//! Prime-field arithmetic and polynomial machinery for secret sharing.
//!
//! All secret-shared values live in Z_p for a prime `p` that is fixed for a
//! whole simulation run. The default prime is a Sophie Germain prime just
//! above 2^61, which leaves plenty of headroom above 32-bit application
//! values for the masked-opening comparison subprotocol, keeps every product
//! inside `u128`, and makes `2p + 1` a safe prime usable as the commitment
//! group modulus.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

/// Default field prime: the smallest Sophie Germain prime `p >= 2^61` with
/// `p ≡ 3 (mod 4)` (so square roots are a single exponentiation and
/// `2p + 1` is prime).
pub const DEFAULT_PRIME: u64 = 2_305_843_009_213_697_963;

/// Default bit width for application circuit inputs: values must be `< 2^k`.
pub const DEFAULT_BIT_WIDTH: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("0 has no multiplicative inverse")]
    InverseOfZero,
    #[error("duplicate abscissa {0} in interpolation points")]
    DuplicateAbscissa(u64),
    #[error("interpolation requires at least one point")]
    NoPoints,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("input {value} out of range for bit width {bits}")]
    InputOutOfRange { value: u64, bits: u32 },
}

/// An element of Z_p. The residue is always reduced; elements only make
/// sense relative to the [`Field`] that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(pub u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<FieldElement> for u64 {
    fn from(e: FieldElement) -> u64 {
        e.0
    }
}

/// Arithmetic context: the prime modulus plus the application bit width.
///
/// Passing the context explicitly (instead of baking the modulus into the
/// element type) keeps the prime configurable per run, which the simulation
/// setup requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    prime: u64,
    bit_width: u32,
}

impl Default for Field {
    fn default() -> Self {
        Field { prime: DEFAULT_PRIME, bit_width: DEFAULT_BIT_WIDTH }
    }
}

impl Field {
    /// Builds a field over the given prime. Fails if `p` is not prime or the
    /// bit width leaves no masking headroom for secure comparison
    /// (`2^(k + STAT_SEC + 1)` must stay below `p`).
    pub fn new(prime: u64, bit_width: u32) -> Result<Field, FieldError> {
        if !is_prime_u64(prime) {
            return Err(FieldError::NotPrime(prime));
        }
        let needed = bit_width + crate::engine::STAT_SEC + 1;
        if needed >= 63 || prime <= (1u64 << needed) {
            return Err(FieldError::InputOutOfRange { value: prime, bits: bit_width });
        }
        Ok(Field { prime, bit_width })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn bit_width(&self) -> u32 {
        self.bit_width
    }

    /// Reduces an arbitrary integer into the field.
    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.prime)
    }

    /// Checks an application input against the configured bit width.
    pub fn check_input(&self, v: u64) -> Result<FieldElement, FieldError> {
        if self.bit_width < 64 && v >= (1u64 << self.bit_width) {
            return Err(FieldError::InputOutOfRange { value: v, bits: self.bit_width });
        }
        Ok(self.elem(v))
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 as u128 + b.0 as u128;
        FieldElement((s % self.prime as u128) as u64)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(a.0 - b.0)
        } else {
            FieldElement(self.prime - b.0 + a.0)
        }
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement(self.prime - a.0)
        }
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(((a.0 as u128 * b.0 as u128) % self.prime as u128) as u64)
    }

    pub fn pow(&self, base: FieldElement, mut exp: u64) -> FieldElement {
        let mut acc = FieldElement::ONE;
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat.
    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.is_zero() {
            return Err(FieldError::InverseOfZero);
        }
        Ok(self.pow(a, self.prime - 2))
    }

    /// Canonical square root of a quadratic residue (`p ≡ 3 mod 4`), defined
    /// as the smaller of the two roots. Returns `None` for non-residues.
    pub fn sqrt(&self, a: FieldElement) -> Option<FieldElement> {
        if a.is_zero() {
            return Some(FieldElement::ZERO);
        }
        debug_assert_eq!(self.prime % 4, 3);
        let r = self.pow(a, (self.prime + 1) / 4);
        if self.mul(r, r) != a {
            return None;
        }
        Some(r.min(self.neg(r)))
    }

    /// Uniform element from a seeded source, by rejection sampling.
    pub fn random(&self, rng: &mut impl RngCore) -> FieldElement {
        // Reject above the largest multiple of p to avoid modulo bias.
        let zone = u64::MAX - u64::MAX % self.prime;
        loop {
            let v = rng.next_u64();
            if v < zone {
                return FieldElement(v % self.prime);
            }
        }
    }
}

/// Dense polynomial over the field, low-degree coefficient first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<FieldElement>,
}

impl Polynomial {
    /// Normalizes trailing zero coefficients away (the zero polynomial keeps
    /// a single zero coefficient).
    pub fn new(mut coefficients: Vec<FieldElement>) -> Polynomial {
        while coefficients.len() > 1 && coefficients.last() == Some(&FieldElement::ZERO) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            coefficients.push(FieldElement::ZERO);
        }
        Polynomial { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coefficients
    }

    pub fn constant_term(&self) -> FieldElement {
        self.coefficients[0]
    }

    /// Horner evaluation at `x`.
    pub fn eval(&self, field: &Field, x: FieldElement) -> FieldElement {
        let mut acc = FieldElement::ZERO;
        for &c in self.coefficients.iter().rev() {
            acc = field.add(field.mul(acc, x), c);
        }
        acc
    }

    /// Random polynomial of exactly the requested degree bound with a fixed
    /// constant term: coefficients 1..=degree are drawn from `rng`.
    /// Deterministic given the rng seed.
    pub fn random_with_secret(
        field: &Field,
        secret: FieldElement,
        degree: usize,
        rng: &mut impl RngCore,
    ) -> Polynomial {
        let mut coefficients = Vec::with_capacity(degree + 1);
        coefficients.push(secret);
        for _ in 0..degree {
            coefficients.push(field.random(rng));
        }
        Polynomial { coefficients }
    }
}

/// Lagrange weights `w_i` such that `Σ w_i · f(x_i) = f(at)` for any
/// polynomial of degree `< xs.len()`.
pub fn lagrange_coefficients(
    field: &Field,
    xs: &[FieldElement],
    at: FieldElement,
) -> Result<Vec<FieldElement>, FieldError> {
    if xs.is_empty() {
        return Err(FieldError::NoPoints);
    }
    for (i, x) in xs.iter().enumerate() {
        if xs[..i].contains(x) {
            return Err(FieldError::DuplicateAbscissa(x.0));
        }
    }
    let mut weights = Vec::with_capacity(xs.len());
    for (i, &xi) in xs.iter().enumerate() {
        let mut num = FieldElement::ONE;
        let mut den = FieldElement::ONE;
        for (j, &xj) in xs.iter().enumerate() {
            if i != j {
                num = field.mul(num, field.sub(at, xj));
                den = field.mul(den, field.sub(xi, xj));
            }
        }
        weights.push(field.mul(num, field.inv(den)?));
    }
    Ok(weights)
}

/// Value at `at` of the unique degree `< points.len()` polynomial through
/// all points.
pub fn lagrange_interpolate(
    field: &Field,
    points: &[(FieldElement, FieldElement)],
    at: FieldElement,
) -> Result<FieldElement, FieldError> {
    let xs: Vec<FieldElement> = points.iter().map(|p| p.0).collect();
    let weights = lagrange_coefficients(field, &xs, at)?;
    let mut acc = FieldElement::ZERO;
    for (w, (_, y)) in weights.iter().zip(points) {
        acc = field.add(acc, field.mul(*w, *y));
    }
    Ok(acc)
}

/// Reconstructs the full coefficient vector of the unique polynomial of
/// degree `< points.len()` through the given points. Used by structural
/// tests and dispute checks, not on any hot path.
pub fn interpolate_polynomial(
    field: &Field,
    points: &[(FieldElement, FieldElement)],
) -> Result<Polynomial, FieldError> {
    if points.is_empty() {
        return Err(FieldError::NoPoints);
    }
    for (i, p) in points.iter().enumerate() {
        if points[..i].iter().any(|q| q.0 == p.0) {
            return Err(FieldError::DuplicateAbscissa(p.0 .0));
        }
    }
    // Σ_i y_i · Π_{j≠i} (x - x_j)/(x_i - x_j), computed coefficient-wise.
    let n = points.len();
    let mut acc = vec![FieldElement::ZERO; n];
    for (i, &(xi, yi)) in points.iter().enumerate() {
        let mut basis = vec![FieldElement::ZERO; n];
        basis[0] = FieldElement::ONE;
        let mut deg = 0;
        let mut den = FieldElement::ONE;
        for (j, &(xj, _)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            // basis *= (x - xj): new[d] = old[d-1] - xj·old[d]
            deg += 1;
            for d in (0..=deg).rev() {
                let shifted = if d > 0 { basis[d - 1] } else { FieldElement::ZERO };
                basis[d] = field.add(shifted, field.mul(basis[d], field.neg(xj)));
            }
            den = field.mul(den, field.sub(xi, xj));
        }
        let scale = field.mul(yi, field.inv(den)?);
        for d in 0..n {
            acc[d] = field.add(acc[d], field.mul(basis[d], scale));
        }
    }
    Ok(Polynomial::new(acc))
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

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f() -> Field {
        Field::default()
    }

    fn small() -> Field {
        // p = 97 for hand-checkable cases; bit width irrelevant here.
        Field { prime: 97, bit_width: 4 }
    }

    #[test]
    fn default_prime_is_sophie_germain() {
        assert!(is_prime_u64(DEFAULT_PRIME));
        assert!(is_prime_u64(2 * DEFAULT_PRIME + 1));
        assert_eq!(DEFAULT_PRIME % 4, 3);
    }

    #[test]
    fn additive_identity() {
        let f = f();
        let x = f.elem(123456789);
        assert_eq!(f.add(x, FieldElement::ZERO), x);
    }

    #[test]
    fn mul_mod_97() {
        let f = small();
        // 50 * 2 = 100 ≡ 3 (mod 97)
        assert_eq!(f.mul(f.elem(50), f.elem(2)), f.elem(3));
    }

    #[test]
    fn inverse_law() {
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..64 {
            let a = f.random(&mut rng);
            if a.is_zero() {
                continue;
            }
            assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
        }
        assert_eq!(f.inv(FieldElement::ZERO), Err(FieldError::InverseOfZero));
    }

    #[test]
    fn sqrt_round_trips() {
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..64 {
            let v = f.random(&mut rng);
            let sq = f.mul(v, v);
            let r = f.sqrt(sq).expect("square must be a residue");
            assert!(r == v || r == f.neg(v));
            assert_eq!(f.mul(r, r), sq);
        }
    }

    #[test]
    fn poly_eval_degree_zero_and_line() {
        let f = f();
        let c = Polynomial::new(vec![f.elem(42)]);
        assert_eq!(c.eval(&f, f.elem(999)), f.elem(42));
        let line = Polynomial::new(vec![f.elem(5), f.elem(7)]);
        assert_eq!(line.eval(&f, FieldElement::ZERO), f.elem(5));
    }

    #[test]
    fn poly_eval_matches_power_sum_oracle() {
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let poly = Polynomial::random_with_secret(&f, f.elem(3), 3, &mut rng);
        let x = f.elem(5);
        // term-by-term oracle: Σ c_i · x^i
        let mut expect = FieldElement::ZERO;
        for (i, &c) in poly.coefficients().iter().enumerate() {
            expect = f.add(expect, f.mul(c, f.pow(x, i as u64)));
        }
        assert_eq!(poly.eval(&f, x), expect);
    }

    #[test]
    fn interpolate_line_at_zero() {
        let f = small();
        // y = 2x + 1 through (1,3), (2,5): value at 0 is 1.
        let pts = [(f.elem(1), f.elem(3)), (f.elem(2), f.elem(5))];
        assert_eq!(lagrange_interpolate(&f, &pts, FieldElement::ZERO).unwrap(), f.elem(1));
    }

    #[test]
    fn interpolate_rejects_duplicates() {
        let f = small();
        let pts = [(f.elem(1), f.elem(3)), (f.elem(1), f.elem(5))];
        assert_eq!(
            lagrange_interpolate(&f, &pts, FieldElement::ZERO),
            Err(FieldError::DuplicateAbscissa(1))
        );
    }

    #[test]
    fn every_subset_recovers_the_same_secret() {
        // n = 4 points of a degree-1 polynomial: all 2-subsets agree at 0.
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let poly = Polynomial::random_with_secret(&f, f.elem(77), 1, &mut rng);
        let points: Vec<_> = (1..=4u64).map(|i| (f.elem(i), poly.eval(&f, f.elem(i)))).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                let got =
                    lagrange_interpolate(&f, &[points[i], points[j]], FieldElement::ZERO).unwrap();
                assert_eq!(got, f.elem(77));
            }
        }
    }

    #[test]
    fn coefficients_single_point_and_constant_sum() {
        let f = f();
        let at = f.elem(5);
        assert_eq!(lagrange_coefficients(&f, &[at], at).unwrap(), vec![FieldElement::ONE]);
        // constants interpolate to themselves: weights sum to 1
        let xs: Vec<_> = (1..=5u64).map(|i| f.elem(i)).collect();
        let ws = lagrange_coefficients(&f, &xs, f.elem(3)).unwrap();
        let sum = ws.iter().fold(FieldElement::ZERO, |a, &w| f.add(a, w));
        assert_eq!(sum, FieldElement::ONE);
    }

    #[test]
    fn coefficients_cross_check_interpolation() {
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let poly = Polynomial::random_with_secret(&f, f.random(&mut rng), 4, &mut rng);
        let xs: Vec<_> = (1..=5u64).map(|i| f.elem(i)).collect();
        let at = f.elem(11);
        let ws = lagrange_coefficients(&f, &xs, at).unwrap();
        let mut acc = FieldElement::ZERO;
        for (&x, &w) in xs.iter().zip(&ws) {
            acc = f.add(acc, f.mul(w, poly.eval(&f, x)));
        }
        assert_eq!(acc, poly.eval(&f, at));
    }

    #[test]
    fn random_polynomial_contract() {
        let f = f();
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let p1 = Polynomial::random_with_secret(&f, f.elem(9), 6, &mut a);
        let p2 = Polynomial::random_with_secret(&f, f.elem(9), 6, &mut b);
        assert_eq!(p1, p2, "same seed must replay identically");
        assert_eq!(p1.eval(&f, FieldElement::ZERO), f.elem(9));
        let deg0 = Polynomial::random_with_secret(&f, f.elem(4), 0, &mut a);
        assert_eq!(deg0.coefficients(), &[f.elem(4)]);
    }

    #[test]
    fn perfect_hiding_structure() {
        // For any t points of a degree-t sharing and ANY candidate secret s',
        // exactly one degree-t polynomial passes through points ∪ {(0, s')}.
        let f = f();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let t = 2;
        let poly = Polynomial::random_with_secret(&f, f.elem(1234), t, &mut rng);
        let held: Vec<_> = (1..=t as u64).map(|i| (f.elem(i), poly.eval(&f, f.elem(i)))).collect();
        for s in [0u64, 1, 99, 1234, 500_000] {
            let mut pts = held.clone();
            pts.push((FieldElement::ZERO, f.elem(s)));
            let candidate = interpolate_polynomial(&f, &pts).unwrap();
            assert!(candidate.degree() <= t);
            assert_eq!(candidate.eval(&f, FieldElement::ZERO), f.elem(s));
            for &(x, y) in &held {
                assert_eq!(candidate.eval(&f, x), y);
            }
        }
    }

    proptest! {
        #[test]
        fn field_axioms(a in 0u64..DEFAULT_PRIME, b in 0u64..DEFAULT_PRIME, c in 0u64..DEFAULT_PRIME) {
            let f = Field::default();
            let (a, b, c) = (FieldElement(a), FieldElement(b), FieldElement(c));
            // associativity
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            // commutativity
            prop_assert_eq!(f.add(a, b), f.add(b, a));
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            // distributivity
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            // inverses
            prop_assert_eq!(f.add(a, f.neg(a)), FieldElement::ZERO);
            if !a.is_zero() {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), FieldElement::ONE);
            }
            // subtraction consistency
            prop_assert_eq!(f.add(f.sub(a, b), b), a);
        }

        #[test]
        fn interpolation_recovers_constant_term(secret in 0u64..DEFAULT_PRIME, deg in 0usize..5, seed in any::<u64>()) {
            let f = Field::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let poly = Polynomial::random_with_secret(&f, FieldElement(secret), deg, &mut rng);
            let pts: Vec<_> = (1..=deg as u64 + 1).map(|i| (f.elem(i), poly.eval(&f, f.elem(i)))).collect();
            prop_assert_eq!(lagrange_interpolate(&f, &pts, FieldElement::ZERO).unwrap(), FieldElement(secret));
        }
    }
}
