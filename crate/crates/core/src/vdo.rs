//! End-to-end encapsulation and decapsulation for the three architectures,
//! plus the bit-exact VDO container format.
//!
//! A vanishing data object is everything the recipient holds: the ciphertext
//! and just enough metadata to attempt decapsulation. In `vanish` mode the
//! data key lives only as DHT shares; in `ephemerizer` mode only on the
//! central server; in `hybrid` mode the key H = h(N_t, S_t) requires both the
//! DHT shares (N_t, ID_t) and the server's S_t, so neither side alone can
//! recover the plaintext.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::bytesio::{Reader, Writer};
use crate::clock::VirtualTime;
use crate::crypto::{
    decrypt, derive_indices, encrypt, AccessKey, CryptoError, EphemeralId, Nonce128, SymmetricKey,
};
use crate::dht::{DhtError, DhtNetwork};
use crate::ephemerizer::{EphError, Ephemerizer, KeyRefusal};
use crate::field::production_prime;
use crate::sharing::{
    shamir_deal, shamir_reconstruct, share_from_bytes, share_to_bytes, Share, SharingError,
    SharingParams,
};

/// Default sharing parameters: hybrid mode splits into 50 shares at a 90%
/// threshold; the vanish baseline uses 10 shares with a threshold of 7.
pub const HYBRID_DEFAULT_SHARES: u16 = 50;
pub const HYBRID_DEFAULT_THRESHOLD: u16 = 45;
pub const VANISH_DEFAULT_SHARES: u16 = 10;
pub const VANISH_DEFAULT_THRESHOLD: u16 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VdoMode {
    Vanish,
    Ephemerizer,
    Hybrid,
}

impl VdoMode {
    pub fn as_byte(self) -> u8 {
        match self {
            VdoMode::Vanish => 0,
            VdoMode::Ephemerizer => 1,
            VdoMode::Hybrid => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VdoMode::Vanish => "vanish",
            VdoMode::Ephemerizer => "ephemerizer",
            VdoMode::Hybrid => "hybrid",
        }
    }
}

/// The vanishing data object. The mode decides which fields exist, so it is
/// an enum rather than a struct of options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Vdo {
    Vanish { l: AccessKey, n: u16, k: u16, ciphertext: Vec<u8> },
    Ephemerizer { id: EphemeralId, ciphertext: Vec<u8> },
    Hybrid { l: AccessKey, n: u16, k: u16, ciphertext: Vec<u8> },
}

impl Vdo {
    pub fn mode(&self) -> VdoMode {
        match self {
            Vdo::Vanish { .. } => VdoMode::Vanish,
            Vdo::Ephemerizer { .. } => VdoMode::Ephemerizer,
            Vdo::Hybrid { .. } => VdoMode::Hybrid,
        }
    }

    pub fn ciphertext(&self) -> &[u8] {
        match self {
            Vdo::Vanish { ciphertext, .. }
            | Vdo::Ephemerizer { ciphertext, .. }
            | Vdo::Hybrid { ciphertext, .. } => ciphertext,
        }
    }
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Server(#[from] EphError),
    #[error(transparent)]
    Dht(#[from] DhtError),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error("payload conversion failed: {0}")]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecapError {
    #[error("only {got} of the {needed} required shares are retrievable")]
    InsufficientShares { needed: usize, got: usize },
    #[error("key server refused: {0}")]
    KeyRefused(#[from] KeyRefusal),
    #[error("ciphertext shorter than its IV")]
    MalformedCiphertext,
    #[error("retrieved shares do not decode to valid secrets")]
    InvalidShareData,
    #[error("VDO mode does not match this operation")]
    WrongMode,
}

impl From<CryptoError> for DecapError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::MalformedCiphertext => DecapError::MalformedCiphertext,
            CryptoError::ValueOutOfRange => DecapError::InvalidShareData,
        }
    }
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
#[error("malformed VDO: {0}")]
pub struct MalformedVdo(pub &'static str);

/// Hybrid encapsulation: obtain a grant {H, ID_t, N_t} from the server,
/// encrypt, acknowledge (which makes the server deal the recursive shares of
/// (N_t, ID_t) into the DHT under a fresh access key), and forget H. On any
/// mid-protocol failure the half-built server record is erased and no VDO is
/// returned.
pub fn encapsulate_hybrid<R: RngCore + ?Sized>(
    data: &[u8],
    expires_at: VirtualTime,
    read_once: bool,
    params: &SharingParams,
    server: &mut Ephemerizer,
    dht: &mut DhtNetwork,
    rng: &mut R,
) -> Result<Vdo, ProtocolError> {
    params.validate()?;
    let grant = server.create_key(expires_at, read_once)?;
    let ciphertext = encrypt(&grant.h, data, rng);
    match server.distribute_shares(grant.id_t, params, dht) {
        Ok((l, k)) => Ok(Vdo::Hybrid { l, n: params.share_count, k, ciphertext }),
        Err(e) => {
            server.abort(grant.id_t);
            Err(e.into())
        }
    }
}

fn collect_shares(
    l: &AccessKey,
    n: u16,
    k: u16,
    dht: &DhtNetwork,
) -> Result<Vec<Share>, DecapError> {
    let field = production_prime();
    let mut shares = Vec::new();
    for index in derive_indices(l, n) {
        if let Some(bytes) = dht.retrieve(&index) {
            let share = share_from_bytes(&bytes, field).map_err(|_| DecapError::InvalidShareData)?;
            shares.push(share);
            if shares.len() == usize::from(k) {
                break;
            }
        }
    }
    if shares.len() < usize::from(k) {
        return Err(DecapError::InsufficientShares { needed: usize::from(k), got: shares.len() });
    }
    Ok(shares)
}

/// Hybrid decapsulation: derive the share locations from L, retrieve until
/// the threshold is met, reconstruct (N_t, ID_t), ask the server for H, and
/// decrypt. Failures are typed: missing shares point at DHT expiry or churn,
/// a refusal points at server-side expiry or read-once consumption.
pub fn decapsulate_hybrid(
    vdo: &Vdo,
    server: &mut Ephemerizer,
    dht: &DhtNetwork,
) -> Result<Vec<u8>, DecapError> {
    let Vdo::Hybrid { l, n, k, ciphertext } = vdo else {
        return Err(DecapError::WrongMode);
    };
    let field = production_prime();
    let shares = collect_shares(l, *n, *k, dht)?;
    let params = SharingParams::new(*n, *k, field.clone())
        .map_err(|_| DecapError::InvalidShareData)?;
    let bundle = crate::sharing::recursive_reconstruct(&shares, &params, 1)
        .map_err(|_| DecapError::InvalidShareData)?;
    let n_t = Nonce128::from_field_element(&bundle.main, field)?;
    let id_t = EphemeralId::from_field_element(&bundle.additional[0], field)?;
    let h = server.request_key(&n_t, id_t)?;
    Ok(decrypt(&h, ciphertext)?)
}

/// Vanish encapsulation: a random data key K is Shamir-split into the DHT;
/// the VDO carries the access key, the ciphertext and the sharing geometry.
pub fn encapsulate_vanish<R: RngCore + ?Sized>(
    data: &[u8],
    params: &SharingParams,
    dht: &mut DhtNetwork,
    rng: &mut R,
) -> Result<Vdo, ProtocolError> {
    params.validate()?;
    if params.field != *production_prime() {
        return Err(SharingError::InvalidParams("protocol sharing uses the production field").into());
    }
    let field = production_prime();
    let key = SymmetricKey::random(rng);
    let ciphertext = encrypt(&key, data, rng);
    let secret = key.to_field_element(field)?;
    let shares = shamir_deal(&secret, params, rng)?;
    let l = AccessKey::random(rng);
    let ttl = dht.entry_ttl();
    for (index, share) in derive_indices(&l, params.share_count).into_iter().zip(&shares) {
        dht.store(index, share_to_bytes(share, field)?, ttl)?;
    }
    Ok(Vdo::Vanish { l, n: params.share_count, k: params.threshold, ciphertext })
}

pub fn decapsulate_vanish(vdo: &Vdo, dht: &DhtNetwork) -> Result<Vec<u8>, DecapError> {
    let Vdo::Vanish { l, n, k, ciphertext } = vdo else {
        return Err(DecapError::WrongMode);
    };
    let field = production_prime();
    let shares = collect_shares(l, *n, *k, dht)?;
    let secret =
        shamir_reconstruct(&shares, *k, field).map_err(|_| DecapError::InvalidShareData)?;
    let key = SymmetricKey::from_field_element(&secret, field)?;
    Ok(decrypt(&key, ciphertext)?)
}

/// Client-side refresh of a vanish VDO: recover K while its shares are still
/// alive, re-split under a fresh access key, and hand back the replacement
/// VDO (same ciphertext, new L).
pub fn refresh_vanish<R: RngCore + ?Sized>(
    vdo: &Vdo,
    dht: &mut DhtNetwork,
    rng: &mut R,
) -> Result<Vdo, DecapError> {
    let Vdo::Vanish { l, n, k, ciphertext } = vdo else {
        return Err(DecapError::WrongMode);
    };
    let field = production_prime();
    let shares = collect_shares(l, *n, *k, dht)?;
    let secret =
        shamir_reconstruct(&shares, *k, field).map_err(|_| DecapError::InvalidShareData)?;
    let params = SharingParams::new(*n, *k, field.clone())
        .map_err(|_| DecapError::InvalidShareData)?;
    let fresh = shamir_deal(&secret, &params, rng).map_err(|_| DecapError::InvalidShareData)?;
    let l_new = AccessKey::random(rng);
    let ttl = dht.entry_ttl();
    for (index, share) in derive_indices(&l_new, *n).into_iter().zip(&fresh) {
        let bytes = share_to_bytes(share, field).map_err(|_| DecapError::InvalidShareData)?;
        dht.store(index, bytes, ttl).map_err(|_| DecapError::InsufficientShares {
            needed: usize::from(*k),
            got: 0,
        })?;
    }
    Ok(Vdo::Vanish { l: l_new, n: *n, k: *k, ciphertext: ciphertext.clone() })
}

/// Ephemerizer-only encapsulation: the server holds K outright; the VDO
/// carries only the ciphertext and the record id.
pub fn encapsulate_ephemerizer<R: RngCore + ?Sized>(
    data: &[u8],
    expires_at: VirtualTime,
    read_once: bool,
    server: &mut Ephemerizer,
    rng: &mut R,
) -> Result<Vdo, ProtocolError> {
    let (key, id) = server.create_direct_key(expires_at, read_once)?;
    let ciphertext = encrypt(&key, data, rng);
    Ok(Vdo::Ephemerizer { id, ciphertext })
}

pub fn decapsulate_ephemerizer(vdo: &Vdo, server: &mut Ephemerizer) -> Result<Vec<u8>, DecapError> {
    let Vdo::Ephemerizer { id, ciphertext } = vdo else {
        return Err(DecapError::WrongMode);
    };
    let key = server.request_direct_key(*id)?;
    Ok(decrypt(&key, ciphertext)?)
}

const VDO_MAGIC: &[u8; 4] = b"SDD1";
const VDO_VERSION: u8 = 1;

/// Bit-exact container: magic `SDD1`, version, mode byte, the mode's fields,
/// then the length-prefixed ciphertext.
pub fn vdo_encode(vdo: &Vdo) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(VDO_MAGIC).u8(VDO_VERSION).u8(vdo.mode().as_byte());
    match vdo {
        Vdo::Vanish { l, n, k, .. } | Vdo::Hybrid { l, n, k, .. } => {
            w.bytes(l.as_bytes()).u16(*n).u16(*k);
        }
        Vdo::Ephemerizer { id, .. } => {
            w.u16(id.value());
        }
    }
    let c = vdo.ciphertext();
    w.u64(c.len() as u64).bytes(c);
    w.finish()
}

pub fn vdo_decode(data: &[u8]) -> Result<Vdo, MalformedVdo> {
    let mut r = Reader::new(data);
    if r.take(4).map_err(|_| MalformedVdo("truncated header"))? != VDO_MAGIC {
        return Err(MalformedVdo("bad magic"));
    }
    if r.u8().map_err(|_| MalformedVdo("truncated header"))? != VDO_VERSION {
        return Err(MalformedVdo("unsupported version"));
    }
    let mode = r.u8().map_err(|_| MalformedVdo("truncated header"))?;
    let vdo = match mode {
        0 | 2 => {
            let l = AccessKey(r.array::<16>().map_err(|_| MalformedVdo("truncated access key"))?);
            let n = r.u16().map_err(|_| MalformedVdo("truncated share count"))?;
            let k = r.u16().map_err(|_| MalformedVdo("truncated threshold"))?;
            if k > n {
                return Err(MalformedVdo("threshold exceeds share count"));
            }
            let len = r.u64().map_err(|_| MalformedVdo("truncated length"))? as usize;
            let ciphertext =
                r.take(len).map_err(|_| MalformedVdo("truncated ciphertext"))?.to_vec();
            if mode == 0 {
                Vdo::Vanish { l, n, k, ciphertext }
            } else {
                Vdo::Hybrid { l, n, k, ciphertext }
            }
        }
        1 => {
            let id = EphemeralId(r.u16().map_err(|_| MalformedVdo("truncated id"))?);
            let len = r.u64().map_err(|_| MalformedVdo("truncated length"))? as usize;
            let ciphertext =
                r.take(len).map_err(|_| MalformedVdo("truncated ciphertext"))?.to_vec();
            Vdo::Ephemerizer { id, ciphertext }
        }
        _ => return Err(MalformedVdo("unknown mode")),
    };
    if r.remaining() != 0 {
        return Err(MalformedVdo("trailing bytes"));
    }
    Ok(vdo)
}
