//! Threshold secret sharing: classical Shamir (the Vanish baseline) and the
//! recursive multi-secret scheme used by the hybrid architecture.
//!
//! Recursive dealing hides up to `k - 2` extra secrets inside the shares of a
//! single main secret by chaining interpolations: each chained secret `s_i`
//! becomes the constant term of a polynomial through the previous level's
//! re-mapped sample points, and the final degree-(k-1) polynomial carries the
//! main secret at its constant term. Shares are its values at `x = k ..
//! k+n-1`. Reconstruction inverts the dealing exactly: interpolate any `k`
//! shares, read the main secret at zero, then walk the chain back down by
//! evaluating, un-mapping and re-interpolating.
//!
//! A bundle may carry fewer than `k - 2` extra secrets; the unused degrees of
//! freedom of the top polynomial are then filled with uniformly random points
//! instead of chaining random filler secrets, which keeps dealing and
//! reconstruction quadratic in `k` without changing the scheme for the slots
//! that are in use.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::field::{evaluate, interpolate, FieldConfig, FieldElement, FieldError};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum SharingError {
    #[error("invalid sharing parameters: {0}")]
    InvalidParams(&'static str),
    #[error("secret is not an element of the sharing field")]
    SecretOutOfField,
    #[error("need {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("two shares carry the same abscissa")]
    DuplicateAbscissa,
    #[error("malformed share bytes")]
    MalformedShare,
}

impl From<FieldError> for SharingError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::DuplicateAbscissa => SharingError::DuplicateAbscissa,
            _ => SharingError::SecretOutOfField,
        }
    }
}

/// One point `(x, y)` of the dealt polynomial. `x` is never zero (zero would
/// expose the main secret directly); recursive shares use `x in [k, k+n-1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Share {
    pub x: FieldElement,
    pub y: FieldElement,
}

/// The secrets fed into a recursive dealing: the main secret plus an ordered
/// list of at most `k - 2` additional secrets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretBundle {
    pub main: FieldElement,
    pub additional: Vec<FieldElement>,
}

#[derive(Debug, Clone)]
pub struct SharingParams {
    pub share_count: u16,
    pub threshold: u16,
    pub field: FieldConfig,
}

impl SharingParams {
    pub fn new(share_count: u16, threshold: u16, field: FieldConfig) -> Result<Self, SharingError> {
        let params = Self { share_count, threshold, field };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), SharingError> {
        if self.threshold < 2 {
            return Err(SharingError::InvalidParams("threshold must be at least 2"));
        }
        if self.threshold > self.share_count {
            return Err(SharingError::InvalidParams("threshold exceeds share count"));
        }
        let max_x = u64::from(self.threshold) + u64::from(self.share_count) - 1;
        if num_bigint::BigUint::from(max_x) >= *self.field.prime() {
            return Err(SharingError::InvalidParams("k + n - 1 must be below the field prime"));
        }
        Ok(())
    }

    fn check_secret(&self, e: &FieldElement) -> Result<(), SharingError> {
        if e.value() >= self.field.prime() {
            return Err(SharingError::SecretOutOfField);
        }
        Ok(())
    }
}

/// Shamir dealing: shares at `x = 1..n` of a degree-(k-1) polynomial whose
/// constant term is the secret and whose higher coefficients are uniform.
pub fn shamir_deal<R: RngCore + ?Sized>(
    secret: &FieldElement,
    params: &SharingParams,
    rng: &mut R,
) -> Result<Vec<Share>, SharingError> {
    params.validate()?;
    let high: Vec<_> = (1..params.threshold)
        .map(|_| params.field.random_element(rng))
        .collect();
    shamir_deal_with(secret, params, &high)
}

/// Deterministic variant with the `k - 1` higher coefficients pinned by the
/// caller; `shamir_deal` draws them from its random source.
pub fn shamir_deal_with(
    secret: &FieldElement,
    params: &SharingParams,
    high_coefficients: &[FieldElement],
) -> Result<Vec<Share>, SharingError> {
    params.validate()?;
    params.check_secret(secret)?;
    if high_coefficients.len() != usize::from(params.threshold) - 1 {
        return Err(SharingError::InvalidParams("need exactly k - 1 higher coefficients"));
    }
    for c in high_coefficients {
        params.check_secret(c)?;
    }
    let field = &params.field;
    let mut coeffs = vec![secret.clone()];
    coeffs.extend_from_slice(high_coefficients);
    let poly = crate::field::Polynomial::from_coefficients(field, coeffs);
    Ok((1..=u64::from(params.share_count))
        .map(|x| {
            let xe = field.element_from_u64(x);
            let ye = evaluate(field, &poly, &xe);
            Share { x: xe, y: ye }
        })
        .collect())
}

fn check_distinct(shares: &[Share]) -> Result<(), SharingError> {
    for (i, a) in shares.iter().enumerate() {
        for b in shares.iter().skip(i + 1) {
            if a.x == b.x {
                return Err(SharingError::DuplicateAbscissa);
            }
        }
    }
    Ok(())
}

/// Interpolates any `k` of the supplied shares and returns the constant term.
pub fn shamir_reconstruct(
    shares: &[Share],
    threshold: u16,
    field: &FieldConfig,
) -> Result<FieldElement, SharingError> {
    let k = usize::from(threshold);
    if shares.len() < k {
        return Err(SharingError::InsufficientShares { needed: k, got: shares.len() });
    }
    check_distinct(shares)?;
    let points: Vec<_> = shares[..k].iter().map(|s| (s.x.clone(), s.y.clone())).collect();
    let poly = interpolate(field, &points)?;
    Ok(poly.constant_term().clone())
}

/// Recursive dealing with caller-supplied randomness for the seed point and
/// completion points, so tests can pin exact vectors.
///
/// The chain: map the seed as `(1, y11)`; for each chained secret `s_i`,
/// interpolate `(0, s_i)` plus the `i` mapped points, sample the result at
/// `x = i+1 .. 2i+1` and re-map the samples to abscissas `1 .. i+1`. The top
/// polynomial interpolates `(0, main)`, the mapped points, and one completion
/// point per unused slot; shares are its values at `x = k .. k+n-1`.
pub fn recursive_deal_with(
    bundle: &SecretBundle,
    params: &SharingParams,
    seed_y11: &FieldElement,
    completion: &[FieldElement],
) -> Result<Vec<Share>, SharingError> {
    params.validate()?;
    let field = &params.field;
    let k = usize::from(params.threshold);
    let m = bundle.additional.len();
    if m > k - 2 {
        return Err(SharingError::InvalidParams("more additional secrets than k - 2 slots"));
    }
    if completion.len() != k - 2 - m {
        return Err(SharingError::InvalidParams("need one completion point per unused slot"));
    }
    params.check_secret(&bundle.main)?;
    params.check_secret(seed_y11)?;
    for e in bundle.additional.iter().chain(completion) {
        params.check_secret(e)?;
    }

    // mapped points (j, y_ij) for the current chain level, abscissas 1..=len
    let mut mapped = vec![(field.element_from_u64(1), seed_y11.clone())];
    for (i, secret) in bundle.additional.iter().enumerate() {
        let level = i + 1;
        let mut points = vec![(field.zero(), secret.clone())];
        points.extend(mapped.iter().cloned());
        let poly = interpolate(field, &points)?;
        mapped = (1..=level as u64 + 1)
            .map(|j| {
                let sample_x = field.element_from_u64(level as u64 + j);
                let y = evaluate(field, &poly, &sample_x);
                (field.element_from_u64(j), y)
            })
            .collect();
    }

    let mut top_points = vec![(field.zero(), bundle.main.clone())];
    top_points.extend(mapped);
    for (slot, extra) in completion.iter().enumerate() {
        let x = field.element_from_u64((m + 2 + slot) as u64);
        top_points.push((x, extra.clone()));
    }
    debug_assert_eq!(top_points.len(), k);
    let top = interpolate(field, &top_points)?;

    let first = u64::from(params.threshold);
    Ok((first..first + u64::from(params.share_count))
        .map(|x| {
            let xe = field.element_from_u64(x);
            let ye = evaluate(field, &top, &xe);
            Share { x: xe, y: ye }
        })
        .collect())
}

/// Recursive dealing with uniform seed and completion points.
pub fn recursive_deal<R: RngCore + ?Sized>(
    bundle: &SecretBundle,
    params: &SharingParams,
    rng: &mut R,
) -> Result<Vec<Share>, SharingError> {
    params.validate()?;
    let k = usize::from(params.threshold);
    let m = bundle.additional.len();
    if m > k - 2 {
        return Err(SharingError::InvalidParams("more additional secrets than k - 2 slots"));
    }
    let seed = params.field.random_element(rng);
    let completion: Vec<_> = (0..k - 2 - m).map(|_| params.field.random_element(rng)).collect();
    recursive_deal_with(bundle, params, &seed, &completion)
}

/// Exact inverse of [`recursive_deal_with`]: interpolate the top polynomial
/// from any `k` shares, read the main secret at zero, then for each chained
/// level evaluate at `x = 1 ..= level+1`, un-map the values to abscissas
/// `level+1 ..= 2*level+1`, re-interpolate and read the level's secret at
/// zero.
pub fn recursive_reconstruct(
    shares: &[Share],
    params: &SharingParams,
    additional_count: usize,
) -> Result<SecretBundle, SharingError> {
    let field = &params.field;
    let k = usize::from(params.threshold);
    if additional_count > k - 2 {
        return Err(SharingError::InvalidParams("more additional secrets than k - 2 slots"));
    }
    if shares.len() < k {
        return Err(SharingError::InsufficientShares { needed: k, got: shares.len() });
    }
    check_distinct(shares)?;
    let points: Vec<_> = shares[..k].iter().map(|s| (s.x.clone(), s.y.clone())).collect();
    let top = interpolate(field, &points)?;
    let main = top.constant_term().clone();

    let mut additional = vec![field.zero(); additional_count];
    let mut current = top;
    let mut level = additional_count;
    while level > 0 {
        let unmapped: Vec<_> = (1..=level as u64 + 1)
            .map(|j| {
                let y = evaluate(field, &current, &field.element_from_u64(j));
                (field.element_from_u64(level as u64 + j), y)
            })
            .collect();
        let poly = interpolate(field, &unmapped)?;
        additional[level - 1] = poly.constant_term().clone();
        current = poly;
        level -= 1;
    }
    Ok(SecretBundle { main, additional })
}

/// Wire width of one serialized share: 2 bytes of abscissa plus the field's
/// fixed element width (19 bytes for the production prime). The Sybil size
/// filter keys on this width.
pub fn share_wire_width(field: &FieldConfig) -> usize {
    2 + field.element_width()
}

/// `x` as unsigned 16-bit big-endian, then `y` as a fixed-width big-endian
/// integer.
pub fn share_to_bytes(share: &Share, field: &FieldConfig) -> Result<Vec<u8>, SharingError> {
    let x: u16 = share
        .x
        .value()
        .try_into()
        .map_err(|_| SharingError::InvalidParams("share abscissa exceeds 16 bits"))?;
    let mut out = Vec::with_capacity(share_wire_width(field));
    out.extend_from_slice(&x.to_be_bytes());
    out.extend_from_slice(&field.element_to_bytes_be(&share.y));
    Ok(out)
}

pub fn share_from_bytes(bytes: &[u8], field: &FieldConfig) -> Result<Share, SharingError> {
    if bytes.len() != share_wire_width(field) {
        return Err(SharingError::MalformedShare);
    }
    let x = u16::from_be_bytes([bytes[0], bytes[1]]);
    let y = field
        .element_from_bytes_be(&bytes[2..])
        .map_err(|_| SharingError::MalformedShare)?;
    Ok(Share { x: field.element_from_u64(u64::from(x)), y })
}
