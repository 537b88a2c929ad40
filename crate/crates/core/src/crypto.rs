//! Symmetric encryption, hashing, key derivation and DHT index derivation.
//!
//! SHA-1 is the system's single hash primitive (the design this testbed
//! reproduces predates its deprecation; do not reuse outside simulation).
//! Data encryption is AES-128 in counter mode with a random 16-byte IV
//! prepended: the IV is the initial counter block, interpreted as a 128-bit
//! big-endian integer and incremented per block. CTR provides no integrity;
//! a wrong key yields garbage, not an error.

use alloc::vec::Vec;

use aes::cipher::{BlockEncrypt, KeyInit, KeyIvInit, StreamCipher};
use aes::Aes128;
use rand_core::RngCore;
use sha1::{Digest, Sha1};

use crate::field::{FieldConfig, FieldElement};

type Aes128Ctr = ctr::Ctr128BE<Aes128>;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("ciphertext shorter than its IV")]
    MalformedCiphertext,
    #[error("value does not fit the declared width")]
    ValueOutOfRange,
}

macro_rules! byte_newtype {
    ($(#[$doc:meta])* $name:ident, $len:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
                let mut b = [0u8; $len];
                rng.fill_bytes(&mut b);
                Self(b)
            }

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn from_slice(s: &[u8]) -> Result<Self, CryptoError> {
                let b: [u8; $len] = s.try_into().map_err(|_| CryptoError::ValueOutOfRange)?;
                Ok(Self(b))
            }
        }
    };
}

byte_newtype!(
    /// 16-byte AES-128 key (houses H and the Vanish-mode data key K).
    SymmetricKey,
    16
);
byte_newtype!(
    /// 128-bit random value (houses N_t and the server secret S_t).
    Nonce128,
    16
);
byte_newtype!(
    /// 16-byte access key L from which DHT indices are derived.
    AccessKey,
    16
);
byte_newtype!(
    /// 160-bit identifier on the DHT ring (node ids and entry indices).
    DhtId,
    20
);

/// 16-bit ephemeral record id ID_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EphemeralId(pub u16);

impl EphemeralId {
    pub fn value(&self) -> u16 {
        self.0
    }
}

pub fn sha1(data: &[u8]) -> [u8; 20] {
    let mut h = Sha1::new();
    h.update(data);
    h.finalize().into()
}

/// H = first 16 bytes of sha1(N_t || S_t); SHA-1 yields 160 bits but H must
/// be a 128-bit AES key.
pub fn derive_key(n_t: &Nonce128, s_t: &Nonce128) -> SymmetricKey {
    let mut buf = [0u8; 32];
    buf[..16].copy_from_slice(n_t.as_bytes());
    buf[16..].copy_from_slice(s_t.as_bytes());
    let digest = sha1(&buf);
    let mut key = [0u8; 16];
    key.copy_from_slice(&digest[..16]);
    SymmetricKey(key)
}

/// Raw AES-128 block encryption, exposed for known-answer tests and the
/// counter-mode layout cross-checks.
pub fn aes128_encrypt_block(key: &SymmetricKey, block: &[u8; 16]) -> [u8; 16] {
    let cipher = Aes128::new(key.as_bytes().into());
    let mut b = (*block).into();
    cipher.encrypt_block(&mut b);
    b.into()
}

/// AES-128-CTR with a fresh random IV: output is `IV || keystream XOR
/// plaintext`, so the length is always `16 + len(plaintext)`.
pub fn encrypt<R: RngCore + ?Sized>(key: &SymmetricKey, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let mut iv = [0u8; 16];
    rng.fill_bytes(&mut iv);
    let mut out = Vec::with_capacity(16 + plaintext.len());
    out.extend_from_slice(&iv);
    out.extend_from_slice(plaintext);
    let mut cipher = Aes128Ctr::new(key.as_bytes().into(), &iv.into());
    cipher.apply_keystream(&mut out[16..]);
    out
}

pub fn decrypt(key: &SymmetricKey, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < 16 {
        return Err(CryptoError::MalformedCiphertext);
    }
    let (iv, body) = ciphertext.split_at(16);
    let iv: [u8; 16] = iv.try_into().expect("split at 16");
    let mut out = body.to_vec();
    let mut cipher = Aes128Ctr::new(key.as_bytes().into(), &iv.into());
    cipher.apply_keystream(&mut out);
    Ok(out)
}

/// I_i = sha1(L || big-endian-32(i)) for i = 1..=n: the pseudorandom DHT
/// locations for a VDO's shares, deterministic in (L, n).
pub fn derive_indices(l: &AccessKey, n: u16) -> Vec<DhtId> {
    (1..=u32::from(n))
        .map(|i| {
            let mut buf = [0u8; 20];
            buf[..16].copy_from_slice(l.as_bytes());
            buf[16..].copy_from_slice(&i.to_be_bytes());
            DhtId(sha1(&buf))
        })
        .collect()
}

impl Nonce128 {
    pub fn to_field_element(&self, field: &FieldConfig) -> Result<FieldElement, CryptoError> {
        field
            .element_from_bytes_be(self.as_bytes())
            .map_err(|_| CryptoError::ValueOutOfRange)
    }

    pub fn from_field_element(e: &FieldElement, field: &FieldConfig) -> Result<Self, CryptoError> {
        let bytes = field.element_to_bytes_be(e);
        let (head, tail) = bytes.split_at(bytes.len() - 16);
        if head.iter().any(|&b| b != 0) {
            return Err(CryptoError::ValueOutOfRange);
        }
        Self::from_slice(tail)
    }
}

impl SymmetricKey {
    pub fn to_field_element(&self, field: &FieldConfig) -> Result<FieldElement, CryptoError> {
        field
            .element_from_bytes_be(self.as_bytes())
            .map_err(|_| CryptoError::ValueOutOfRange)
    }

    pub fn from_field_element(e: &FieldElement, field: &FieldConfig) -> Result<Self, CryptoError> {
        let bytes = field.element_to_bytes_be(e);
        let (head, tail) = bytes.split_at(bytes.len() - 16);
        if head.iter().any(|&b| b != 0) {
            return Err(CryptoError::ValueOutOfRange);
        }
        Self::from_slice(tail)
    }
}

impl EphemeralId {
    pub fn to_field_element(&self, field: &FieldConfig) -> FieldElement {
        field.element_from_u64(u64::from(self.0))
    }

    pub fn from_field_element(e: &FieldElement, _field: &FieldConfig) -> Result<Self, CryptoError> {
        let v: u16 = e.value().try_into().map_err(|_| CryptoError::ValueOutOfRange)?;
        Ok(Self(v))
    }
}
