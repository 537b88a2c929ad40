//! Prime-field arithmetic and polynomial interpolation.
//!
//! All sharing arithmetic happens in Z_p for a prime `p`. Production use
//! fixes a protocol-wide prime just above 2^130 so that 128-bit keys, 16-bit
//! ids and every share abscissa are distinct field elements, and so that
//! share values serialize to a fixed width. Tests are free to construct
//! small fields.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use once_cell::race::OnceBox;
use rand_core::RngCore;

/// Offset of the production prime above 2^130 (smallest prime > 2^130).
pub const PRODUCTION_PRIME_OFFSET: u32 = 169;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("modulus is not prime")]
    NotPrime,
    #[error("two interpolation points share an abscissa")]
    DuplicateAbscissa,
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error("value does not fit in the field")]
    ValueOutOfRange,
}

/// An element of Z_p. The invariant `value < p` is maintained by every
/// [`FieldConfig`] operation; elements are only constructed through a config.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

/// The prime field Z_p. Primality is checked at construction with a
/// deterministic Miller-Rabin witness set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldConfig {
    p: BigUint,
    width: usize,
}

/// Witnesses used by the construction-time Miller-Rabin check. Exact for all
/// moduli below 3.3e24; the production prime was additionally verified with
/// an independent primality oracle.
const MR_WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn miller_rabin_is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    if n.is_even() {
        return *n == two;
    }
    let n_minus_one = n - 1u8;
    let trailing = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> trailing;
    'witness: for w in MR_WITNESSES {
        let a = BigUint::from(w);
        if a >= n_minus_one {
            continue;
        }
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..trailing {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

trait EvenOdd {
    fn is_even(&self) -> bool;
}

impl EvenOdd for BigUint {
    fn is_even(&self) -> bool {
        !self.bit(0)
    }
}

impl FieldConfig {
    pub fn new(p: BigUint) -> Result<Self, FieldError> {
        if !miller_rabin_is_prime(&p) {
            return Err(FieldError::NotPrime);
        }
        let width = ((p.bits() + 7) / 8) as usize;
        Ok(Self { p, width })
    }

    pub fn from_u64(p: u64) -> Result<Self, FieldError> {
        Self::new(BigUint::from(p))
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    /// Bytes needed to serialize one element big-endian (17 for production).
    pub fn element_width(&self) -> usize {
        self.width
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(BigUint::zero())
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(BigUint::one())
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element_from_biguint(&self, v: BigUint) -> FieldElement {
        FieldElement(v % &self.p)
    }

    pub fn element_from_u64(&self, v: u64) -> FieldElement {
        self.element_from_biguint(BigUint::from(v))
    }

    /// Strict constructor: the big-endian bytes must already denote a value
    /// below p.
    pub fn element_from_bytes_be(&self, bytes: &[u8]) -> Result<FieldElement, FieldError> {
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.p {
            return Err(FieldError::ValueOutOfRange);
        }
        Ok(FieldElement(v))
    }

    /// Fixed-width big-endian encoding, [`Self::element_width`] bytes.
    pub fn element_to_bytes_be(&self, e: &FieldElement) -> Vec<u8> {
        let raw = e.0.to_bytes_be();
        let mut out = vec![0u8; self.width];
        out[self.width - raw.len()..].copy_from_slice(&raw);
        out
    }

    /// Uniform element via rejection sampling on `bits(p)` bits.
    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let bits = self.p.bits();
        let top_mask = if bits % 8 == 0 { 0xff } else { (1u16 << (bits % 8)) as u8 - 1 };
        let mut buf = vec![0u8; self.width];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= top_mask;
            let v = BigUint::from_bytes_be(&buf);
            if v < self.p {
                return FieldElement(v);
            }
        }
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let mut v = &a.0 + &b.0;
        if v >= self.p {
            v -= &self.p;
        }
        FieldElement(v)
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(&a.0 - &b.0)
        } else {
            FieldElement(&self.p - &b.0 + &a.0)
        }
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        FieldElement(&a.0 * &b.0 % &self.p)
    }

    /// Multiplicative inverse by Fermat's little theorem. Zero has no
    /// inverse; callers guarantee non-zero input (distinct abscissas do).
    pub fn inv(&self, a: &FieldElement) -> FieldElement {
        debug_assert!(!a.0.is_zero(), "zero has no inverse");
        FieldElement(a.0.modpow(&(&self.p - 2u8), &self.p))
    }
}

/// Dense polynomial over Z_p, constant term first, trailing zeros trimmed
/// (a zero polynomial keeps a single zero coefficient).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<FieldElement>,
}

impl Polynomial {
    pub fn from_coefficients(field: &FieldConfig, mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.len() > 1 && coeffs.last().map(FieldElement::is_zero).unwrap_or(false) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(field.zero());
        }
        Self { coeffs }
    }

    pub fn coefficients(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn constant_term(&self) -> &FieldElement {
        &self.coeffs[0]
    }
}

/// Horner evaluation of `poly` at `x`, mod p.
pub fn evaluate(field: &FieldConfig, poly: &Polynomial, x: &FieldElement) -> FieldElement {
    let mut acc = field.zero();
    for c in poly.coeffs.iter().rev() {
        acc = field.add(&field.mul(&acc, x), c);
    }
    acc
}

/// Lagrange interpolation: the unique polynomial of degree < len(points)
/// through all points. Any algebraically equivalent method would do; this one
/// builds the master product Π(x - x_i) once and peels each basis numerator
/// off by synthetic division.
pub fn interpolate(
    field: &FieldConfig,
    points: &[(FieldElement, FieldElement)],
) -> Result<Polynomial, FieldError> {
    if points.is_empty() {
        return Err(FieldError::NoPoints);
    }
    for (i, (xi, _)) in points.iter().enumerate() {
        for (xj, _) in points.iter().skip(i + 1) {
            if xi == xj {
                return Err(FieldError::DuplicateAbscissa);
            }
        }
    }

    let m = points.len();
    // master[j] holds the coefficient of x^j in Π(x - x_i); degree m, monic.
    let mut master = vec![field.zero(); m + 1];
    master[0] = field.one();
    let mut deg = 0;
    for (xi, _) in points {
        // multiply by (x - xi)
        master[deg + 1] = field.one();
        for j in (1..=deg).rev() {
            let shifted = master[j - 1].clone();
            master[j] = field.sub(&shifted, &field.mul(&master[j], xi));
        }
        master[0] = field.sub(&field.zero(), &field.mul(&master[0], xi));
        deg += 1;
    }

    let mut acc = vec![field.zero(); m];
    let mut quotient = vec![field.zero(); m];
    for (xi, yi) in points {
        // synthetic division of master by (x - xi): quotient has degree m-1
        quotient[m - 1] = master[m].clone();
        for j in (0..m - 1).rev() {
            quotient[j] = field.add(&master[j + 1], &field.mul(&quotient[j + 1], xi));
        }
        // denominator Π_{j≠i}(x_i - x_j) is the quotient evaluated at x_i
        let mut denom = field.zero();
        for c in quotient.iter().rev() {
            denom = field.add(&field.mul(&denom, xi), c);
        }
        let scale = field.mul(yi, &field.inv(&denom));
        for (a, q) in acc.iter_mut().zip(quotient.iter()) {
            *a = field.add(a, &field.mul(&scale, q));
        }
    }
    Ok(Polynomial::from_coefficients(field, acc))
}

static PRODUCTION_FIELD: OnceBox<FieldConfig> = OnceBox::new();

/// The protocol-wide production field: smallest prime strictly above 2^130,
/// computed once and cached. A fixed prime gives every share a fixed
/// serialization width and never leaks secret magnitudes.
pub fn production_prime() -> &'static FieldConfig {
    PRODUCTION_FIELD.get_or_init(|| {
        let p = (BigUint::one() << 130u32) + BigUint::from(PRODUCTION_PRIME_OFFSET);
        alloc::boxed::Box::new(FieldConfig::new(p).expect("production modulus is prime"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn f(p: u64) -> FieldConfig {
        FieldConfig::from_u64(p).unwrap()
    }

    fn pts(field: &FieldConfig, raw: &[(u64, u64)]) -> Vec<(FieldElement, FieldElement)> {
        raw.iter()
            .map(|&(x, y)| (field.element_from_u64(x), field.element_from_u64(y)))
            .collect()
    }

    #[test]
    fn rejects_composite_modulus() {
        assert_eq!(FieldConfig::from_u64(9).unwrap_err(), FieldError::NotPrime);
        assert_eq!(FieldConfig::from_u64(1).unwrap_err(), FieldError::NotPrime);
        assert!(FieldConfig::from_u64(2).is_ok());
    }

    #[test]
    fn interpolate_constant() {
        let field = f(7);
        let poly = interpolate(&field, &pts(&field, &[(0, 4)])).unwrap();
        assert_eq!(poly.coefficients(), &[field.element_from_u64(4)]);
    }

    #[test]
    fn interpolate_line() {
        let field = f(7);
        let poly = interpolate(&field, &pts(&field, &[(0, 5), (1, 1)])).unwrap();
        assert_eq!(
            poly.coefficients(),
            &[field.element_from_u64(5), field.element_from_u64(3)]
        );
        // verify by evaluating 5+3x mod 7 at the inputs
        assert_eq!(
            evaluate(&field, &poly, &field.element_from_u64(0)),
            field.element_from_u64(5)
        );
        assert_eq!(
            evaluate(&field, &poly, &field.element_from_u64(1)),
            field.element_from_u64(1)
        );
    }

    #[test]
    fn interpolate_degree_collapse() {
        // brute-force over all degree-<=2 polynomials mod 11 finds only 2x
        let field = f(11);
        let points = [(1u64, 2u64), (2, 4), (3, 6)];
        let mut matches = vec![];
        for a0 in 0..11u64 {
            for a1 in 0..11u64 {
                for a2 in 0..11u64 {
                    if points
                        .iter()
                        .all(|&(x, y)| (a0 + a1 * x + a2 * x * x) % 11 == y)
                    {
                        matches.push((a0, a1, a2));
                    }
                }
            }
        }
        assert_eq!(matches, vec![(0, 2, 0)]);

        let poly = interpolate(&field, &pts(&field, &points)).unwrap();
        assert_eq!(
            poly.coefficients(),
            &[field.element_from_u64(0), field.element_from_u64(2)]
        );
        assert_eq!(poly.degree(), 1);
    }

    #[test]
    fn duplicate_abscissa_rejected() {
        let field = f(7);
        assert_eq!(
            interpolate(&field, &pts(&field, &[(1, 2), (1, 3)])).unwrap_err(),
            FieldError::DuplicateAbscissa
        );
    }

    #[test]
    fn evaluate_examples() {
        let field = f(7);
        let poly = Polynomial::from_coefficients(
            &field,
            vec![field.element_from_u64(5), field.element_from_u64(3)],
        );
        assert_eq!(
            evaluate(&field, &poly, &field.element_from_u64(0)),
            field.element_from_u64(5)
        );
        assert_eq!(
            evaluate(&field, &poly, &field.element_from_u64(1)),
            field.element_from_u64(1)
        );

        let field = f(11);
        let poly = Polynomial::from_coefficients(
            &field,
            vec![
                field.element_from_u64(7),
                field.element_from_u64(10),
                field.element_from_u64(1),
            ],
        );
        // 7 + 10*3 + 9 = 46 = 2 mod 11
        assert_eq!(
            evaluate(&field, &poly, &field.element_from_u64(3)),
            field.element_from_u64(2)
        );
    }

    #[test]
    fn production_prime_is_stable_and_prime() {
        let a = production_prime();
        let b = production_prime();
        assert_eq!(a.prime(), b.prime());
        assert!(core::ptr::eq(a, b));

        let base = BigUint::one() << 130u32;
        assert_eq!(a.prime() - &base, BigUint::from(PRODUCTION_PRIME_OFFSET));
        assert_eq!(a.prime().bits(), 131);
        assert_eq!(a.element_width(), 17);
        assert!(miller_rabin_is_prime(a.prime()));
        // every candidate between 2^130 and p is composite
        for off in 1..PRODUCTION_PRIME_OFFSET {
            assert!(!miller_rabin_is_prime(&(&base + BigUint::from(off))));
        }
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        for n in 2u64..2000 {
            let by_trial = (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
            assert_eq!(
                miller_rabin_is_prime(&BigUint::from(n)),
                by_trial,
                "disagreement at {n}"
            );
        }
    }

    #[test]
    fn random_elements_lie_in_range() {
        let field = f(13);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let e = field.random_element(&mut rng);
            assert!(e.value() < field.prime());
        }
        let prod = production_prime();
        for _ in 0..50 {
            let e = prod.random_element(&mut rng);
            assert!(e.value() < prod.prime());
        }
    }

    proptest! {
        #[test]
        fn round_trip_interpolation(
            prime in prop::sample::select(vec![5u64, 7, 11, 13, 101, 257]),
            seed in any::<u64>(),
            count in 1usize..6,
        ) {
            let field = f(prime);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            // distinct abscissas 0..count (count <= 5 < every prime above)
            let points: Vec<_> = (0..count as u64)
                .map(|x| (field.element_from_u64(x), field.random_element(&mut rng)))
                .collect();
            let poly = interpolate(&field, &points).unwrap();
            prop_assert!(poly.degree() < count.max(1));
            for c in poly.coefficients() {
                prop_assert!(c.value() < field.prime());
            }
            for (x, y) in &points {
                prop_assert_eq!(&evaluate(&field, &poly, x), y);
            }
        }

        #[test]
        fn interpolation_recovers_exact_coefficients(
            prime in prop::sample::select(vec![11u64, 13, 101, 257]),
            seed in any::<u64>(),
            degree in 0usize..5,
        ) {
            let field = f(prime);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut coeffs: Vec<_> = (0..=degree).map(|_| field.random_element(&mut rng)).collect();
            // force exact degree so the comparison is not confused by trimming
            if coeffs[degree].is_zero() {
                coeffs[degree] = field.one();
            }
            let poly = Polynomial::from_coefficients(&field, coeffs.clone());
            let points: Vec<_> = (0..=degree as u64)
                .map(|x| {
                    let xe = field.element_from_u64(x);
                    let ye = evaluate(&field, &poly, &xe);
                    (xe, ye)
                })
                .collect();
            let back = interpolate(&field, &points).unwrap();
            prop_assert_eq!(back, poly);
        }
    }
}
