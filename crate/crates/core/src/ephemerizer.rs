//! The centralized key server. It mints ephemeral key material, sprinkles the
//! recursive shares of (N_t, ID_t) into the DHT, answers key requests until
//! the record's timeout, erases expired records irreversibly, and re-splits
//! shares to extend a record's DHT lifetime.
//!
//! The derived key H is never stored: the server keeps only {T, S_t, ID_t}
//! (plus N_t transiently between key creation and share distribution) and
//! recomputes H = h(N_t, S_t) from the caller-supplied nonce on demand. The
//! ephemerizer-only baseline reuses the same record table with distribution
//! skipped: the record holds the data key K itself, handed out by id until
//! timeout.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bytesio::{Reader, Writer};
use crate::clock::{VirtualClock, VirtualTime};
use crate::crypto::{derive_key, derive_indices, AccessKey, EphemeralId, Nonce128, SymmetricKey};
use crate::dht::{DhtError, DhtNetwork};
use crate::field::production_prime;
use crate::sharing::{
    recursive_deal, recursive_reconstruct, share_from_bytes, share_to_bytes, SecretBundle,
    SharingError, SharingParams,
};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum EphError {
    #[error("no free record id (id space exhausted)")]
    IdSpaceExhausted,
    #[error("expiry time is not in the future")]
    InvalidExpiry,
    #[error("no record with this id")]
    UnknownId,
    #[error("shares were already distributed for this record")]
    AlreadyDistributed,
    #[error("record kind does not support this operation")]
    WrongRecordKind,
    #[error("no access key retained for this record")]
    NoAccessKeyRetained,
    #[error("reconstructed secrets do not match the record")]
    ReconstructionMismatch,
    #[error(transparent)]
    Dht(#[from] DhtError),
    #[error(transparent)]
    Sharing(#[from] SharingError),
}

/// Why a key request was refused. Expired and unknown ids are
/// indistinguishable on the wire so callers cannot probe id liveness; the
/// variants stay distinct internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum KeyRefusal {
    #[error("no such record")]
    Unknown,
    #[error("record expired")]
    Expired,
    #[error("read-once record already consumed")]
    Consumed,
}

impl KeyRefusal {
    pub fn wire_reason(&self) -> &'static str {
        match self {
            KeyRefusal::Unknown | KeyRefusal::Expired => "expired_or_unknown",
            KeyRefusal::Consumed => "consumed",
        }
    }
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("malformed snapshot")]
    Malformed,
    #[error("unsupported snapshot version")]
    VersionMismatch,
}

/// What Alice receives from `create_key`; the server forgets H immediately.
#[derive(Debug, Clone)]
pub struct KeyGrant {
    pub h: SymmetricKey,
    pub id_t: EphemeralId,
    pub n_t: Nonce128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RecordBody {
    /// Hybrid record: holds the server secret S_t.
    Hybrid { s_t: Nonce128 },
    /// Ephemerizer-only record: holds the data key K itself.
    Direct { key: SymmetricKey },
    /// Read-once record after its single grant; behaves as expired but keeps
    /// the refusal cause distinct until the sweep removes it.
    Consumed,
}

#[derive(Debug, Clone)]
struct EphemeralRecord {
    body: RecordBody,
    expires_at: VirtualTime,
    /// N_t, held only between key creation and share distribution.
    n_t_temp: Option<Nonce128>,
    /// L, retained only when the record outlives the DHT entry timeout.
    access_key: Option<AccessKey>,
    read_once: bool,
    share_params: Option<(u16, u16)>,
}

#[derive(Debug, Clone, Copy)]
pub struct EphemerizerConfig {
    /// Record id width in bits; 16 in production, smaller in exhaustion
    /// tests. Live records are capped at 2^id_bits.
    pub id_bits: u8,
    pub seed: u64,
}

impl Default for EphemerizerConfig {
    fn default() -> Self {
        Self { id_bits: 16, seed: 0 }
    }
}

#[derive(Debug)]
pub struct Ephemerizer {
    clock: VirtualClock,
    records: BTreeMap<u16, EphemeralRecord>,
    rng: ChaCha20Rng,
    id_bits: u8,
}

impl Ephemerizer {
    pub fn new(clock: VirtualClock, config: EphemerizerConfig) -> Self {
        debug_assert!(config.id_bits >= 1 && config.id_bits <= 16);
        Self {
            clock,
            records: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            id_bits: config.id_bits,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.clock.now()
    }

    pub fn clock(&self) -> VirtualClock {
        self.clock.clone()
    }

    pub fn live_count(&self) -> usize {
        self.records.len()
    }

    pub fn live_record_ids(&self) -> Vec<EphemeralId> {
        self.records.keys().map(|&id| EphemeralId(id)).collect()
    }

    /// True while the record still holds its transient N_t.
    pub fn holds_pending_nonce(&self, id_t: EphemeralId) -> bool {
        self.records.get(&id_t.0).map(|r| r.n_t_temp.is_some()).unwrap_or(false)
    }

    pub fn retains_access_key(&self, id_t: EphemeralId) -> bool {
        self.records.get(&id_t.0).map(|r| r.access_key.is_some()).unwrap_or(false)
    }

    fn fresh_id(&mut self) -> Result<u16, EphError> {
        let capacity = 1usize << self.id_bits;
        if self.records.len() >= capacity {
            return Err(EphError::IdSpaceExhausted);
        }
        let mask = (capacity - 1) as u16;
        loop {
            let candidate = (self.rng.next_u64() as u16) & mask;
            if !self.records.contains_key(&candidate) {
                return Ok(candidate);
            }
        }
    }

    /// Mints a hybrid record: fresh N_t, S_t and a unique ID_t. Returns
    /// {H, ID_t, N_t}; H is derived, handed out, and forgotten.
    pub fn create_key(
        &mut self,
        expires_at: VirtualTime,
        read_once: bool,
    ) -> Result<KeyGrant, EphError> {
        if expires_at <= self.now() {
            return Err(EphError::InvalidExpiry);
        }
        let id = self.fresh_id()?;
        let n_t = Nonce128::random(&mut self.rng);
        let s_t = Nonce128::random(&mut self.rng);
        let h = derive_key(&n_t, &s_t);
        self.records.insert(
            id,
            EphemeralRecord {
                body: RecordBody::Hybrid { s_t },
                expires_at,
                n_t_temp: Some(n_t),
                access_key: None,
                read_once,
                share_params: None,
            },
        );
        Ok(KeyGrant { h, id_t: EphemeralId(id), n_t })
    }

    /// Ephemerizer-only baseline: the record stores the data key K itself.
    pub fn create_direct_key(
        &mut self,
        expires_at: VirtualTime,
        read_once: bool,
    ) -> Result<(SymmetricKey, EphemeralId), EphError> {
        if expires_at <= self.now() {
            return Err(EphError::InvalidExpiry);
        }
        let id = self.fresh_id()?;
        let key = SymmetricKey::random(&mut self.rng);
        self.records.insert(
            id,
            EphemeralRecord {
                body: RecordBody::Direct { key },
                expires_at,
                n_t_temp: None,
                access_key: None,
                read_once,
                share_params: None,
            },
        );
        Ok((key, EphemeralId(id)))
    }

    /// Deals the recursive shares of (N_t, ID_t) into the DHT at the indices
    /// derived from a fresh access key L, then deletes N_t. L is retained
    /// only if the record outlives the DHT's fixed entry timeout (it is
    /// needed for refresh); shares are stored with that fixed timeout.
    pub fn distribute_shares(
        &mut self,
        id_t: EphemeralId,
        params: &SharingParams,
        dht: &mut DhtNetwork,
    ) -> Result<(AccessKey, u16), EphError> {
        if params.field != *production_prime() {
            return Err(SharingError::InvalidParams("protocol sharing uses the production field").into());
        }
        if params.threshold < 3 {
            return Err(SharingError::InvalidParams("hybrid sharing needs a threshold of at least 3").into());
        }
        let now = self.now();
        let record = self.records.get(&id_t.0).ok_or(EphError::UnknownId)?;
        if record.expires_at <= now {
            self.records.remove(&id_t.0);
            return Err(EphError::UnknownId);
        }
        if !matches!(record.body, RecordBody::Hybrid { .. }) {
            return Err(EphError::WrongRecordKind);
        }
        let n_t = record.n_t_temp.ok_or(EphError::AlreadyDistributed)?;
        let expires_at = record.expires_at;

        let field = production_prime();
        let l = AccessKey::random(&mut self.rng);
        let bundle = SecretBundle {
            main: n_t.to_field_element(field).expect("128-bit nonce fits the field"),
            additional: alloc::vec![id_t.to_field_element(field)],
        };
        let shares = recursive_deal(&bundle, params, &mut self.rng)?;
        let ttl = dht.entry_ttl();
        for (index, share) in derive_indices(&l, params.share_count).into_iter().zip(&shares) {
            let bytes = share_to_bytes(share, field)?;
            dht.store(index, bytes, ttl)?;
        }

        let record = self.records.get_mut(&id_t.0).expect("checked above");
        record.n_t_temp = None;
        record.share_params = Some((params.share_count, params.threshold));
        record.access_key = (expires_at > now + ttl).then_some(l);
        Ok((l, params.threshold))
    }

    /// Answers a decryption-key request: H = h(N_t, S_t) for a live record.
    /// A read-once record is consumed by its first successful grant.
    pub fn request_key(
        &mut self,
        n_t: &Nonce128,
        id_t: EphemeralId,
    ) -> Result<SymmetricKey, KeyRefusal> {
        let now = self.now();
        let record = self.records.get_mut(&id_t.0).ok_or(KeyRefusal::Unknown)?;
        if record.expires_at <= now {
            self.records.remove(&id_t.0);
            return Err(KeyRefusal::Expired);
        }
        match &record.body {
            RecordBody::Consumed => Err(KeyRefusal::Consumed),
            RecordBody::Direct { .. } => Err(KeyRefusal::Unknown),
            RecordBody::Hybrid { s_t } => {
                let h = derive_key(n_t, s_t);
                if record.read_once {
                    record.body = RecordBody::Consumed;
                    record.n_t_temp = None;
                    record.access_key = None;
                    record.share_params = None;
                }
                Ok(h)
            }
        }
    }

    /// Ephemerizer-only key request by id.
    pub fn request_direct_key(&mut self, id_t: EphemeralId) -> Result<SymmetricKey, KeyRefusal> {
        let now = self.now();
        let record = self.records.get_mut(&id_t.0).ok_or(KeyRefusal::Unknown)?;
        if record.expires_at <= now {
            self.records.remove(&id_t.0);
            return Err(KeyRefusal::Expired);
        }
        match &record.body {
            RecordBody::Consumed => Err(KeyRefusal::Consumed),
            RecordBody::Hybrid { .. } => Err(KeyRefusal::Unknown),
            RecordBody::Direct { key } => {
                let key = *key;
                if record.read_once {
                    record.body = RecordBody::Consumed;
                }
                Ok(key)
            }
        }
    }

    /// Erases every record with `expires_at <= now`. Unconditional and
    /// irreversible; the closed boundary fails closed.
    pub fn sweep_expired(&mut self) -> usize {
        let now = self.now();
        let before = self.records.len();
        self.records.retain(|_, r| r.expires_at > now);
        before - self.records.len()
    }

    /// Collects at least k shares from the DHT, reconstructs (N_t, ID_t),
    /// verifies the id, and re-splits under a fresh access key so the data
    /// survives the next DHT entry timeout. Old shares expire naturally.
    pub fn refresh(&mut self, id_t: EphemeralId, dht: &mut DhtNetwork) -> Result<AccessKey, EphError> {
        let now = self.now();
        let record = self.records.get(&id_t.0).ok_or(EphError::UnknownId)?;
        if record.expires_at <= now {
            self.records.remove(&id_t.0);
            return Err(EphError::UnknownId);
        }
        if !matches!(record.body, RecordBody::Hybrid { .. }) {
            return Err(EphError::WrongRecordKind);
        }
        let l_old = record.access_key.ok_or(EphError::NoAccessKeyRetained)?;
        let (n, k) = record.share_params.ok_or(EphError::NoAccessKeyRetained)?;
        let expires_at = record.expires_at;

        let field = production_prime();
        let params = SharingParams::new(n, k, field.clone())?;
        let mut shares = Vec::new();
        for index in derive_indices(&l_old, n) {
            if let Some(bytes) = dht.retrieve(&index) {
                if let Ok(share) = share_from_bytes(&bytes, field) {
                    shares.push(share);
                    if shares.len() == usize::from(k) {
                        break;
                    }
                }
            }
        }
        if shares.len() < usize::from(k) {
            return Err(SharingError::InsufficientShares {
                needed: usize::from(k),
                got: shares.len(),
            }
            .into());
        }
        let bundle = recursive_reconstruct(&shares, &params, 1)?;
        let id_back = EphemeralId::from_field_element(&bundle.additional[0], field)
            .map_err(|_| EphError::ReconstructionMismatch)?;
        if id_back != id_t {
            return Err(EphError::ReconstructionMismatch);
        }

        let l_new = AccessKey::random(&mut self.rng);
        let fresh = recursive_deal(&bundle, &params, &mut self.rng)?;
        let ttl = dht.entry_ttl();
        for (index, share) in derive_indices(&l_new, n).into_iter().zip(&fresh) {
            dht.store(index, share_to_bytes(share, field)?, ttl)?;
        }
        let record = self.records.get_mut(&id_t.0).expect("checked above");
        record.access_key = (expires_at > now + ttl).then_some(l_new);
        Ok(l_new)
    }

    /// Removes a half-built record so a failed encapsulation leaves nothing
    /// behind.
    pub fn abort(&mut self, id_t: EphemeralId) {
        self.records.remove(&id_t.0);
    }

    // --- snapshot codec; file IO lives in the CLI crate ---

    const SNAPSHOT_MAGIC: &'static [u8; 4] = b"EPH1";
    const RECORD_WIDTH: usize = 64;

    /// Versioned snapshot of all live records and the virtual clock. Records
    /// erased before the snapshot are unrecoverable by construction; derived
    /// keys H never appear in it.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(Self::SNAPSHOT_MAGIC).u8(1).u8(self.id_bits);
        w.u64(self.now());
        w.u32(self.records.len() as u32);
        for (&id, record) in &self.records {
            w.u16(id);
            let (kind, secret): (u8, [u8; 16]) = match &record.body {
                RecordBody::Hybrid { s_t } => (0, *s_t.as_bytes()),
                RecordBody::Direct { key } => (1, *key.as_bytes()),
                RecordBody::Consumed => (2, [0u8; 16]),
            };
            w.u8(kind).bytes(&secret);
            w.u64(record.expires_at);
            let mut flags = 0u8;
            flags |= record.read_once as u8;
            flags |= (record.n_t_temp.is_some() as u8) << 1;
            flags |= (record.access_key.is_some() as u8) << 2;
            flags |= (record.share_params.is_some() as u8) << 3;
            w.u8(flags);
            w.bytes(record.n_t_temp.as_ref().map(|n| *n.as_bytes()).unwrap_or_default().as_ref());
            w.bytes(record.access_key.as_ref().map(|l| *l.as_bytes()).unwrap_or_default().as_ref());
            let (n, k) = record.share_params.unwrap_or((0, 0));
            w.u16(n).u16(k);
        }
        w.finish()
    }

    pub fn from_snapshot_bytes(
        data: &[u8],
        clock: VirtualClock,
        seed: u64,
    ) -> Result<Self, SnapshotError> {
        let bad = |_| SnapshotError::Malformed;
        let mut r = Reader::new(data);
        if r.take(4).map_err(bad)? != Self::SNAPSHOT_MAGIC {
            return Err(SnapshotError::Malformed);
        }
        if r.u8().map_err(bad)? != 1 {
            return Err(SnapshotError::VersionMismatch);
        }
        let id_bits = r.u8().map_err(bad)?;
        if !(1..=16).contains(&id_bits) {
            return Err(SnapshotError::Malformed);
        }
        let now = r.u64().map_err(bad)?;
        let count = r.u32().map_err(bad)? as usize;
        if r.remaining() != count * Self::RECORD_WIDTH {
            return Err(SnapshotError::Malformed);
        }
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let id = r.u16().map_err(bad)?;
            let kind = r.u8().map_err(bad)?;
            let secret = r.array::<16>().map_err(bad)?;
            let expires_at = r.u64().map_err(bad)?;
            let flags = r.u8().map_err(bad)?;
            let ntemp = r.array::<16>().map_err(bad)?;
            let l = r.array::<16>().map_err(bad)?;
            let n = r.u16().map_err(bad)?;
            let k = r.u16().map_err(bad)?;
            let body = match kind {
                0 => RecordBody::Hybrid { s_t: Nonce128(secret) },
                1 => RecordBody::Direct { key: SymmetricKey(secret) },
                2 => RecordBody::Consumed,
                _ => return Err(SnapshotError::Malformed),
            };
            records.insert(
                id,
                EphemeralRecord {
                    body,
                    expires_at,
                    n_t_temp: (flags & 0b10 != 0).then_some(Nonce128(ntemp)),
                    access_key: (flags & 0b100 != 0).then_some(AccessKey(l)),
                    read_once: flags & 1 != 0,
                    share_params: (flags & 0b1000 != 0).then_some((n, k)),
                },
            );
        }
        clock.advance_to(now);
        Ok(Self { clock, records, rng: ChaCha20Rng::seed_from_u64(seed), id_bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dht::{bootstrap, DhtConfig};
    use alloc::vec;

    const HOUR: u64 = 3600;

    fn server(clock: &VirtualClock) -> Ephemerizer {
        Ephemerizer::new(clock.clone(), EphemerizerConfig { id_bits: 16, seed: 42 })
    }

    fn contains_sub(hay: &[u8], needle: &[u8]) -> bool {
        hay.windows(needle.len()).any(|w| w == needle)
    }

    #[test]
    fn create_gives_distinct_ids_and_consistent_grants() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let a = s.create_key(HOUR, false).unwrap();
        let b = s.create_key(HOUR, false).unwrap();
        assert_ne!(a.id_t, b.id_t);
        // recompute H from the record's S_t: in-module we can reach the body
        let RecordBody::Hybrid { s_t } = &s.records[&a.id_t.0].body else { panic!() };
        assert_eq!(derive_key(&a.n_t, s_t), a.h);
    }

    #[test]
    fn create_rejects_past_expiry() {
        let clock = VirtualClock::new(100);
        let mut s = server(&clock);
        assert_eq!(s.create_key(100, false).unwrap_err(), EphError::InvalidExpiry);
        assert_eq!(s.create_key(99, false).unwrap_err(), EphError::InvalidExpiry);
        assert!(s.create_key(101, false).is_ok());
    }

    #[test]
    fn id_space_exhausts_at_reduced_width() {
        let clock = VirtualClock::new(0);
        let mut s = Ephemerizer::new(clock, EphemerizerConfig { id_bits: 3, seed: 1 });
        for _ in 0..8 {
            s.create_key(HOUR, false).unwrap();
        }
        assert_eq!(s.create_key(HOUR, false).unwrap_err(), EphError::IdSpaceExhausted);
    }

    #[test]
    fn distribute_then_reconstruct_from_dht() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let mut dht = bootstrap(DhtConfig { seed: 5, ..DhtConfig::default() }, clock.clone());
        let grant = s.create_key(2 * HOUR, false).unwrap();
        assert!(s.holds_pending_nonce(grant.id_t));

        let field = production_prime();
        let params = SharingParams::new(8, 5, field.clone()).unwrap();
        let (l, k) = s.distribute_shares(grant.id_t, &params, &mut dht).unwrap();
        assert_eq!(k, 5);
        assert!(!s.holds_pending_nonce(grant.id_t), "N_t deleted after distribution");

        let mut shares = Vec::new();
        for index in derive_indices(&l, 8) {
            let bytes = dht.retrieve(&index).expect("share stored");
            shares.push(share_from_bytes(&bytes, field).unwrap());
        }
        let bundle = recursive_reconstruct(&shares, &params, 1).unwrap();
        assert_eq!(Nonce128::from_field_element(&bundle.main, field).unwrap(), grant.n_t);
        assert_eq!(
            EphemeralId::from_field_element(&bundle.additional[0], field).unwrap(),
            grant.id_t
        );

        // a second distribution is refused
        assert_eq!(
            s.distribute_shares(grant.id_t, &params, &mut dht).unwrap_err(),
            EphError::AlreadyDistributed
        );
    }

    #[test]
    fn access_key_retention_follows_record_lifetime() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let mut dht = bootstrap(DhtConfig { seed: 6, ..DhtConfig::default() }, clock.clone());
        let params = SharingParams::new(6, 4, production_prime().clone()).unwrap();

        // T = 2h with an 8h DHT timeout: not retained
        let short = s.create_key(2 * HOUR, false).unwrap();
        s.distribute_shares(short.id_t, &params, &mut dht).unwrap();
        assert!(!s.retains_access_key(short.id_t));

        // T = 20h: retained for the refresh mechanism
        let long = s.create_key(20 * HOUR, false).unwrap();
        s.distribute_shares(long.id_t, &params, &mut dht).unwrap();
        assert!(s.retains_access_key(long.id_t));
    }

    #[test]
    fn request_key_lifecycle() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let grant = s.create_key(2 * HOUR, false).unwrap();
        assert_eq!(s.request_key(&grant.n_t, grant.id_t).unwrap(), grant.h);
        // repeatable while live and not read-once
        assert_eq!(s.request_key(&grant.n_t, grant.id_t).unwrap(), grant.h);

        clock.advance_to(2 * HOUR); // closed boundary: dead exactly at T
        assert_eq!(
            s.request_key(&grant.n_t, grant.id_t).unwrap_err(),
            KeyRefusal::Expired
        );
        // the lazy expiry erased it; later requests see an unknown id
        assert_eq!(
            s.request_key(&grant.n_t, grant.id_t).unwrap_err(),
            KeyRefusal::Unknown
        );
        assert_eq!(
            s.request_key(&grant.n_t, EphemeralId(0x1234)).unwrap_err(),
            KeyRefusal::Unknown
        );
        // expired and unknown are indistinguishable on the wire
        assert_eq!(KeyRefusal::Expired.wire_reason(), KeyRefusal::Unknown.wire_reason());
        assert_ne!(KeyRefusal::Consumed.wire_reason(), KeyRefusal::Unknown.wire_reason());
    }

    #[test]
    fn read_once_is_consumed_by_first_grant() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let grant = s.create_key(HOUR, true).unwrap();
        assert_eq!(s.request_key(&grant.n_t, grant.id_t).unwrap(), grant.h);
        assert_eq!(
            s.request_key(&grant.n_t, grant.id_t).unwrap_err(),
            KeyRefusal::Consumed
        );
        // the tombstone carries no secret
        let snapshot = s.snapshot_bytes();
        assert!(matches!(s.records[&grant.id_t.0].body, RecordBody::Consumed));
        assert!(!contains_sub(&snapshot, grant.h.as_bytes()));
    }

    #[test]
    fn sweep_erases_at_the_closed_boundary() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let a = s.create_key(100, false).unwrap();
        let b = s.create_key(200, false).unwrap();
        assert_eq!(s.sweep_expired(), 0, "nothing expired, no change");
        clock.advance_to(100);
        assert_eq!(s.sweep_expired(), 1, "record dies exactly at its expiry");
        assert_eq!(s.request_key(&a.n_t, a.id_t).unwrap_err(), KeyRefusal::Unknown);
        assert_eq!(s.request_key(&b.n_t, b.id_t).unwrap(), b.h);
    }

    #[test]
    fn direct_records_serve_until_timeout() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let (key, id) = s.create_direct_key(HOUR, false).unwrap();
        assert_eq!(s.request_direct_key(id).unwrap(), key);
        clock.advance_to(HOUR + 1);
        assert_eq!(s.request_direct_key(id).unwrap_err(), KeyRefusal::Expired);
    }

    #[test]
    fn refresh_re_splits_under_a_new_access_key() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let mut dht = bootstrap(DhtConfig { seed: 7, ..DhtConfig::default() }, clock.clone());
        let params = SharingParams::new(6, 4, production_prime().clone()).unwrap();
        let grant = s.create_key(20 * HOUR, false).unwrap();
        let (l_old, _) = s.distribute_shares(grant.id_t, &params, &mut dht).unwrap();

        dht.tick(7 * HOUR + 59 * 60);
        let l_new = s.refresh(grant.id_t, &mut dht).unwrap();
        assert_ne!(l_new, l_old);
        assert!(s.retains_access_key(grant.id_t));

        // at 9h the old shares are gone but the fresh ones reconstruct
        dht.tick(HOUR + 2 * 60);
        assert!(derive_indices(&l_old, 6).iter().all(|i| dht.retrieve(i).is_none()));
        let field = production_prime();
        let shares: Vec<_> = derive_indices(&l_new, 6)
            .iter()
            .filter_map(|i| dht.retrieve(i))
            .map(|b| share_from_bytes(&b, field).unwrap())
            .collect();
        let bundle = recursive_reconstruct(&shares, &params, 1).unwrap();
        assert_eq!(Nonce128::from_field_element(&bundle.main, field).unwrap(), grant.n_t);
    }

    #[test]
    fn refresh_failure_modes() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let mut dht = bootstrap(DhtConfig { seed: 8, ..DhtConfig::default() }, clock.clone());
        let params = SharingParams::new(6, 4, production_prime().clone()).unwrap();

        assert_eq!(s.refresh(EphemeralId(1), &mut dht).unwrap_err(), EphError::UnknownId);

        // short record: no access key retained
        let short = s.create_key(2 * HOUR, false).unwrap();
        s.distribute_shares(short.id_t, &params, &mut dht).unwrap();
        assert_eq!(
            s.refresh(short.id_t, &mut dht).unwrap_err(),
            EphError::NoAccessKeyRetained
        );

        // long record whose shares all expired: insufficient shares
        let long = s.create_key(30 * HOUR, false).unwrap();
        s.distribute_shares(long.id_t, &params, &mut dht).unwrap();
        dht.tick(9 * HOUR);
        assert!(matches!(
            s.refresh(long.id_t, &mut dht).unwrap_err(),
            EphError::Sharing(SharingError::InsufficientShares { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip_preserves_behaviour() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let live = s.create_key(3 * HOUR, false).unwrap();
        let dead = s.create_key(HOUR, false).unwrap();
        clock.advance_to(2 * HOUR);
        s.sweep_expired();

        let bytes = s.snapshot_bytes();
        let mut restored =
            Ephemerizer::from_snapshot_bytes(&bytes, VirtualClock::new(0), 99).unwrap();
        assert_eq!(restored.now(), 2 * HOUR);
        assert_eq!(restored.request_key(&live.n_t, live.id_t).unwrap(), live.h);
        assert_eq!(
            restored.request_key(&dead.n_t, dead.id_t).unwrap_err(),
            KeyRefusal::Unknown
        );
        assert_eq!(restored.snapshot_bytes(), bytes);
    }

    #[test]
    fn snapshot_rejects_corruption_fail_closed() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        s.create_key(HOUR, false).unwrap();
        let bytes = s.snapshot_bytes();

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] ^= 0xff;
        assert_eq!(
            Ephemerizer::from_snapshot_bytes(&wrong_magic, VirtualClock::new(0), 0).unwrap_err(),
            SnapshotError::Malformed
        );
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert_eq!(
            Ephemerizer::from_snapshot_bytes(&wrong_version, VirtualClock::new(0), 0).unwrap_err(),
            SnapshotError::VersionMismatch
        );
        assert_eq!(
            Ephemerizer::from_snapshot_bytes(&bytes[..bytes.len() - 1], VirtualClock::new(0), 0)
                .unwrap_err(),
            SnapshotError::Malformed
        );
    }

    #[test]
    fn erasure_finality_no_secret_survives_the_sweep() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let grant = s.create_key(HOUR, false).unwrap();
        let RecordBody::Hybrid { s_t } = s.records[&grant.id_t.0].body.clone() else { panic!() };

        // while live: S_t is in the snapshot, H never is
        let live_snapshot = s.snapshot_bytes();
        assert!(contains_sub(&live_snapshot, s_t.as_bytes()));
        assert!(!contains_sub(&live_snapshot, grant.h.as_bytes()));

        clock.advance_to(2 * HOUR);
        s.sweep_expired();
        let swept = s.snapshot_bytes();
        assert!(!contains_sub(&swept, s_t.as_bytes()));
        assert!(!contains_sub(&swept, grant.h.as_bytes()));
        assert_eq!(
            s.request_key(&grant.n_t, grant.id_t).unwrap_err(),
            KeyRefusal::Unknown
        );
    }

    #[test]
    fn abort_removes_half_built_records() {
        let clock = VirtualClock::new(0);
        let mut s = server(&clock);
        let grant = s.create_key(HOUR, false).unwrap();
        s.abort(grant.id_t);
        assert_eq!(s.live_count(), 0);
        assert_eq!(
            s.request_key(&grant.n_t, grant.id_t).unwrap_err(),
            KeyRefusal::Unknown
        );
    }
}
