//! Deterministic in-process simulation of a Chord-style DHT ring.
//!
//! Nodes carry 160-bit ids on a ring; every key is owned by its successor
//! (first alive node clockwise) and replicated to the following
//! `replication_factor - 1` alive nodes. Entries expire after a TTL, nodes
//! join and leave (scripted or Poisson churn), every node pushes its entries
//! to the key's replica set at a fixed replication interval, and a joining
//! node immediately receives every entry whose replica set it lands in — the
//! behaviour a Sybil crawler exploits.
//!
//! Lookup is plain sorted-ring successor search: routing performance is not
//! the subject here, placement and replication semantics are. Expired entries
//! stop being served instantly but are only physically removed from alive
//! nodes at the next replication round; departed nodes keep their stale
//! stores forever (a node may "reappear" still holding old shares — such
//! copies are never served).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::bytesio::{Reader, Writer};
use crate::clock::{VirtualClock, VirtualTime};
use crate::crypto::{sha1, DhtId};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum DhtError {
    #[error("no alive node in the network")]
    EmptyNetwork,
    #[error("malformed network snapshot")]
    MalformedSnapshot,
}

#[derive(Debug, Clone)]
pub struct DhtConfig {
    /// Number of nodes bootstrapped into the ring.
    pub node_count: u32,
    /// Replica count r: a key lives on its successor plus r-1 followers.
    pub replication_factor: u16,
    /// Virtual seconds between replication rounds.
    pub replication_interval: VirtualTime,
    /// The network's fixed entry timeout in virtual seconds.
    pub entry_ttl: VirtualTime,
    /// Poisson churn rates, events per virtual hour (0 = no background churn).
    pub join_rate_per_hour: f64,
    pub leave_rate_per_hour: f64,
    pub seed: u64,
}

impl Default for DhtConfig {
    fn default() -> Self {
        Self {
            node_count: 200,
            replication_factor: 20,
            replication_interval: 30 * 60,
            entry_ttl: 8 * 60 * 60,
            join_rate_per_hour: 0.0,
            leave_rate_per_hour: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptedAction {
    Join(DhtId),
    Leave(DhtId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptedEvent {
    pub at: VirtualTime,
    pub action: ScriptedAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DhtEntry {
    pub key: DhtId,
    pub value: Vec<u8>,
    pub stored_at: VirtualTime,
    pub expires_at: VirtualTime,
}

impl DhtEntry {
    fn live_at(&self, now: VirtualTime) -> bool {
        now < self.expires_at
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: DhtId,
    pub store: BTreeMap<DhtId, DhtEntry>,
    pub alive: bool,
    pub joined_at: VirtualTime,
    /// Flagged nodes (Sybil identities) have their replica deliveries
    /// recorded; the ring itself treats them as ordinary nodes.
    pub observer: bool,
}

/// One replica delivery to an observer node.
#[derive(Debug, Clone)]
pub struct DeliveryReceipt {
    pub at: VirtualTime,
    pub node: DhtId,
    pub key: DhtId,
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
pub struct StoreReceipt {
    pub key: DhtId,
    pub replicas: usize,
    pub expires_at: VirtualTime,
}

#[derive(Debug)]
pub struct DhtNetwork {
    config: DhtConfig,
    clock: VirtualClock,
    nodes: BTreeMap<DhtId, NodeState>,
    rng: ChaCha20Rng,
    next_replication: VirtualTime,
    next_join: Option<VirtualTime>,
    next_leave: Option<VirtualTime>,
    scripted: Vec<ScriptedEvent>, // sorted by time, stable
    deliveries: Vec<DeliveryReceipt>,
    stored_keys: Vec<DhtId>,
}

/// Builds a fresh ring of `node_count` nodes with seeded-random ids.
pub fn bootstrap(config: DhtConfig, clock: VirtualClock) -> DhtNetwork {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut nodes = BTreeMap::new();
    while nodes.len() < config.node_count as usize {
        let id = DhtId::random(&mut rng);
        nodes.entry(id).or_insert_with(|| NodeState {
            id,
            store: BTreeMap::new(),
            alive: true,
            joined_at: clock.now(),
            observer: false,
        });
    }
    let now = clock.now();
    let mut network = DhtNetwork {
        next_replication: now + config.replication_interval,
        config,
        clock,
        nodes,
        rng,
        next_join: None,
        next_leave: None,
        scripted: Vec::new(),
        deliveries: Vec::new(),
        stored_keys: Vec::new(),
    };
    network.next_join = network.sample_churn(network.config.join_rate_per_hour);
    network.next_leave = network.sample_churn(network.config.leave_rate_per_hour);
    network
}

impl DhtNetwork {
    pub fn config(&self) -> &DhtConfig {
        &self.config
    }

    pub fn clock(&self) -> VirtualClock {
        self.clock.clone()
    }

    pub fn now(&self) -> VirtualTime {
        self.clock.now()
    }

    pub fn entry_ttl(&self) -> VirtualTime {
        self.config.entry_ttl
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.values().filter(|n| n.alive).count()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.values()
    }

    /// Every key ever written through [`DhtNetwork::store`].
    pub fn stored_keys(&self) -> &[DhtId] {
        &self.stored_keys
    }

    /// Hands out (and clears) the replica deliveries recorded for observer
    /// nodes since the last drain.
    pub fn drain_deliveries(&mut self) -> Vec<DeliveryReceipt> {
        core::mem::take(&mut self.deliveries)
    }

    /// Queues a scripted join/leave; events fire during [`DhtNetwork::tick`].
    pub fn schedule(&mut self, event: ScriptedEvent) {
        let pos = self.scripted.partition_point(|e| e.at <= event.at);
        self.scripted.insert(pos, event);
    }

    /// First alive node clockwise from `key` (wrapping).
    pub fn successor(&self, key: &DhtId) -> Result<&NodeState, DhtError> {
        self.nodes
            .range(*key..)
            .chain(self.nodes.range(..*key))
            .map(|(_, n)| n)
            .find(|n| n.alive)
            .ok_or(DhtError::EmptyNetwork)
    }

    /// The key's replica set: successor plus the following alive nodes, at
    /// most `replication_factor` in total.
    pub fn replica_set(&self, key: &DhtId) -> Vec<DhtId> {
        let r = self.config.replication_factor as usize;
        self.nodes
            .range(*key..)
            .chain(self.nodes.range(..*key))
            .filter(|(_, n)| n.alive)
            .take(r)
            .map(|(id, _)| *id)
            .collect()
    }

    /// Places an entry on the key's replica set with `expires_at = now + ttl`
    /// (capped at the network's fixed entry timeout).
    pub fn store(
        &mut self,
        key: DhtId,
        value: Vec<u8>,
        ttl: VirtualTime,
    ) -> Result<StoreReceipt, DhtError> {
        let now = self.now();
        let entry = DhtEntry {
            key,
            value,
            stored_at: now,
            expires_at: now + ttl.min(self.config.entry_ttl),
        };
        let set = self.replica_set(&key);
        if set.is_empty() {
            return Err(DhtError::EmptyNetwork);
        }
        for node_id in &set {
            self.deliver(*node_id, entry.clone());
        }
        self.stored_keys.push(key);
        Ok(StoreReceipt { key, replicas: set.len(), expires_at: entry.expires_at })
    }

    /// Returns the value if any alive node in the replica range holds a
    /// non-expired entry for `key`.
    pub fn retrieve(&self, key: &DhtId) -> Option<Vec<u8>> {
        let now = self.now();
        for node_id in self.replica_set(key) {
            if let Some(entry) = self.nodes[&node_id].store.get(key) {
                if entry.live_at(now) {
                    return Some(entry.value.clone());
                }
            }
        }
        None
    }

    /// Advances virtual time by `dt`, firing scripted events, churn events
    /// and replication rounds in timestamp order.
    pub fn tick(&mut self, dt: VirtualTime) {
        let target = self.now() + dt;
        loop {
            let next_scripted = self.scripted.first().map(|e| e.at);
            let candidates = [next_scripted, self.next_join, self.next_leave, Some(self.next_replication)];
            let next = candidates.iter().flatten().min().copied();
            match next {
                Some(t) if t <= target => {
                    self.clock.advance_to(t);
                    // fixed order at equal timestamps: scripted, churn
                    // joins, churn leaves, replication
                    while self.scripted.first().map(|e| e.at) == Some(t) {
                        let ev = self.scripted.remove(0);
                        match ev.action {
                            ScriptedAction::Join(id) => self.join_node(id, false),
                            ScriptedAction::Leave(id) => self.leave_node(&id),
                        }
                    }
                    if self.next_join == Some(t) {
                        let id = DhtId::random(&mut self.rng);
                        self.join_node(id, false);
                        self.next_join = self.sample_churn(self.config.join_rate_per_hour);
                    }
                    if self.next_leave == Some(t) {
                        self.churn_leave();
                        self.next_leave = self.sample_churn(self.config.leave_rate_per_hour);
                    }
                    if self.next_replication == t {
                        self.replication_round();
                        self.next_replication = t + self.config.replication_interval;
                    }
                }
                _ => break,
            }
        }
        self.clock.advance_to(target);
    }

    /// Adds (or revives) a node. The joiner immediately receives every live
    /// entry whose replica set it now belongs to.
    pub fn join_node(&mut self, id: DhtId, observer: bool) {
        let now = self.now();
        let node = self.nodes.entry(id).or_insert_with(|| NodeState {
            id,
            store: BTreeMap::new(),
            alive: false,
            joined_at: now,
            observer,
        });
        if node.alive {
            return;
        }
        node.alive = true;
        node.joined_at = now;
        node.observer = observer;

        for (key, entry) in self.live_entries() {
            if self.replica_set(&key).contains(&id) {
                self.deliver(id, entry);
            }
        }
    }

    pub fn leave_node(&mut self, id: &DhtId) {
        if let Some(node) = self.nodes.get_mut(id) {
            node.alive = false;
        }
    }

    /// Deterministic digest of the full network state (clock, nodes, stores).
    pub fn state_fingerprint(&self) -> [u8; 20] {
        let mut w = Writer::new();
        w.u64(self.now());
        for node in self.nodes.values() {
            w.bytes(node.id.as_bytes());
            w.u8(node.alive as u8);
            w.u8(node.observer as u8);
            w.u64(node.joined_at);
            for entry in node.store.values() {
                w.bytes(entry.key.as_bytes());
                w.u64(entry.stored_at);
                w.u64(entry.expires_at);
                w.blob(&entry.value);
            }
        }
        sha1(&w.finish())
    }

    fn deliver(&mut self, node_id: DhtId, entry: DhtEntry) {
        let now = self.now();
        let Some(node) = self.nodes.get_mut(&node_id) else { return };
        let fresh = match node.store.get(&entry.key) {
            Some(held) => held.value != entry.value,
            None => true,
        };
        node.store.insert(entry.key, entry.clone());
        if node.observer && fresh {
            self.deliveries.push(DeliveryReceipt {
                at: now,
                node: node_id,
                key: entry.key,
                value: entry.value,
            });
        }
    }

    /// Live (non-expired) entries held by alive nodes, freshest copy per key.
    fn live_entries(&self) -> Vec<(DhtId, DhtEntry)> {
        let now = self.now();
        let mut best: BTreeMap<DhtId, DhtEntry> = BTreeMap::new();
        for node in self.nodes.values().filter(|n| n.alive) {
            for entry in node.store.values().filter(|e| e.live_at(now)) {
                match best.get(&entry.key) {
                    Some(held) if held.expires_at >= entry.expires_at => {}
                    _ => {
                        best.insert(entry.key, entry.clone());
                    }
                }
            }
        }
        best.into_iter().collect()
    }

    /// One replication round: alive nodes drop expired entries, then every
    /// live entry is pushed onto exactly its current replica set.
    fn replication_round(&mut self) {
        let now = self.now();
        for node in self.nodes.values_mut() {
            if node.alive {
                node.store.retain(|_, e| e.live_at(now));
            }
        }
        let entries = self.live_entries();
        let mut placements: Vec<(DhtId, DhtEntry)> = Vec::new();
        let mut sets: BTreeMap<DhtId, Vec<DhtId>> = BTreeMap::new();
        for (key, entry) in entries {
            let set = self.replica_set(&key);
            for node_id in &set {
                placements.push((*node_id, entry.clone()));
            }
            sets.insert(key, set);
        }
        // trim copies that drifted outside the replica set
        let node_ids: Vec<DhtId> = self.nodes.keys().copied().collect();
        for node_id in node_ids {
            let node = self.nodes.get_mut(&node_id).unwrap();
            if node.alive {
                node.store.retain(|key, _| {
                    sets.get(key).map(|s| s.contains(&node_id)).unwrap_or(false)
                });
            }
        }
        for (node_id, entry) in placements {
            self.deliver(node_id, entry);
        }
    }

    fn churn_leave(&mut self) {
        let candidates: Vec<DhtId> = self
            .nodes
            .values()
            .filter(|n| n.alive && !n.observer)
            .map(|n| n.id)
            .collect();
        if candidates.len() <= 1 {
            return; // never empty the ring by background churn
        }
        let pick = (self.rng.next_u64() % candidates.len() as u64) as usize;
        self.leave_node(&candidates[pick].clone());
    }

    fn sample_churn(&mut self, rate_per_hour: f64) -> Option<VirtualTime> {
        if rate_per_hour <= 0.0 {
            return None;
        }
        let rate_per_sec = rate_per_hour / 3600.0;
        let u = ((self.rng.next_u64() >> 11) as f64 + 1.0) / (1u64 << 53) as f64;
        let dt = libm::ceil(-libm::log(u) / rate_per_sec) as u64;
        Some(self.now() + dt.max(1))
    }

    // --- snapshot codec (pure bytes; file IO lives in the CLI crate) ---

    const SNAPSHOT_MAGIC: &'static [u8; 4] = b"SDN1";

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(Self::SNAPSHOT_MAGIC).u8(1);
        w.u32(self.config.node_count)
            .u16(self.config.replication_factor)
            .u64(self.config.replication_interval)
            .u64(self.config.entry_ttl)
            .u64(self.config.join_rate_per_hour.to_bits())
            .u64(self.config.leave_rate_per_hour.to_bits())
            .u64(self.config.seed);
        w.u64(self.now());
        w.bytes(&self.rng.get_seed());
        w.u128(self.rng.get_word_pos());
        w.u64(self.next_replication);
        w.u8(self.next_join.is_some() as u8).u64(self.next_join.unwrap_or(0));
        w.u8(self.next_leave.is_some() as u8).u64(self.next_leave.unwrap_or(0));
        w.u32(self.scripted.len() as u32);
        for ev in &self.scripted {
            w.u64(ev.at);
            match ev.action {
                ScriptedAction::Join(id) => w.u8(0).bytes(id.as_bytes()),
                ScriptedAction::Leave(id) => w.u8(1).bytes(id.as_bytes()),
            };
        }
        w.u32(self.stored_keys.len() as u32);
        for key in &self.stored_keys {
            w.bytes(key.as_bytes());
        }
        w.u32(self.nodes.len() as u32);
        for node in self.nodes.values() {
            w.bytes(node.id.as_bytes());
            w.u8(node.alive as u8).u8(node.observer as u8).u64(node.joined_at);
            w.u32(node.store.len() as u32);
            for entry in node.store.values() {
                w.bytes(entry.key.as_bytes());
                w.u64(entry.stored_at).u64(entry.expires_at);
                w.blob(&entry.value);
            }
        }
        w.finish()
    }

    pub fn from_snapshot_bytes(data: &[u8], clock: VirtualClock) -> Result<Self, DhtError> {
        let bad = |_| DhtError::MalformedSnapshot;
        let mut r = Reader::new(data);
        if r.take(4).map_err(bad)? != Self::SNAPSHOT_MAGIC {
            return Err(DhtError::MalformedSnapshot);
        }
        if r.u8().map_err(bad)? != 1 {
            return Err(DhtError::MalformedSnapshot);
        }
        let config = DhtConfig {
            node_count: r.u32().map_err(bad)?,
            replication_factor: r.u16().map_err(bad)?,
            replication_interval: r.u64().map_err(bad)?,
            entry_ttl: r.u64().map_err(bad)?,
            join_rate_per_hour: f64::from_bits(r.u64().map_err(bad)?),
            leave_rate_per_hour: f64::from_bits(r.u64().map_err(bad)?),
            seed: r.u64().map_err(bad)?,
        };
        let now = r.u64().map_err(bad)?;
        let mut rng = ChaCha20Rng::from_seed(r.array::<32>().map_err(bad)?);
        rng.set_word_pos(r.u128().map_err(bad)?);
        let next_replication = r.u64().map_err(bad)?;
        let next_join = match (r.u8().map_err(bad)?, r.u64().map_err(bad)?) {
            (0, _) => None,
            (_, t) => Some(t),
        };
        let next_leave = match (r.u8().map_err(bad)?, r.u64().map_err(bad)?) {
            (0, _) => None,
            (_, t) => Some(t),
        };
        let mut scripted = Vec::new();
        for _ in 0..r.u32().map_err(bad)? {
            let at = r.u64().map_err(bad)?;
            let kind = r.u8().map_err(bad)?;
            let id = DhtId(r.array::<20>().map_err(bad)?);
            let action = match kind {
                0 => ScriptedAction::Join(id),
                1 => ScriptedAction::Leave(id),
                _ => return Err(DhtError::MalformedSnapshot),
            };
            scripted.push(ScriptedEvent { at, action });
        }
        let mut stored_keys = Vec::new();
        for _ in 0..r.u32().map_err(bad)? {
            stored_keys.push(DhtId(r.array::<20>().map_err(bad)?));
        }
        let mut nodes = BTreeMap::new();
        for _ in 0..r.u32().map_err(bad)? {
            let id = DhtId(r.array::<20>().map_err(bad)?);
            let alive = r.u8().map_err(bad)? != 0;
            let observer = r.u8().map_err(bad)? != 0;
            let joined_at = r.u64().map_err(bad)?;
            let mut store = BTreeMap::new();
            for _ in 0..r.u32().map_err(bad)? {
                let key = DhtId(r.array::<20>().map_err(bad)?);
                let stored_at = r.u64().map_err(bad)?;
                let expires_at = r.u64().map_err(bad)?;
                let value = r.blob().map_err(bad)?.to_vec();
                store.insert(key, DhtEntry { key, value, stored_at, expires_at });
            }
            nodes.insert(id, NodeState { id, store, alive, joined_at, observer });
        }
        if r.remaining() != 0 {
            return Err(DhtError::MalformedSnapshot);
        }
        clock.advance_to(now);
        Ok(Self {
            config,
            clock,
            nodes,
            rng,
            next_replication,
            next_join,
            next_leave,
            scripted,
            deliveries: Vec::new(),
            stored_keys,
        })
    }
}
