//! The persistent simulated environment the file commands operate on: one
//! virtual clock shared by a DHT network and a key server, plus the client's
//! random source. The whole thing round-trips through a single state file so
//! `encap`, `advance` and `decap` can run as separate invocations.

use std::path::Path;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;

use sdd_core::clock::{VirtualClock, VirtualTime};
use sdd_core::dht::{bootstrap, DhtConfig, DhtNetwork};
use sdd_core::ephemerizer::{Ephemerizer, EphemerizerConfig};

use crate::config;
use crate::CliError;

const ENV_MAGIC: &[u8; 4] = b"SDE1";

#[derive(Debug, Clone)]
pub struct EnvOptions {
    pub nodes: u32,
    pub replication_factor: u16,
    pub replication_interval: u64,
    pub entry_ttl: u64,
    pub join_rate_per_hour: f64,
    pub leave_rate_per_hour: f64,
    pub sweep_interval: u64,
    pub seed: u64,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self {
            nodes: config::DEFAULT_NODES,
            replication_factor: config::DEFAULT_REPLICATION_FACTOR,
            replication_interval: config::DEFAULT_REPLICATION_INTERVAL,
            entry_ttl: config::DEFAULT_ENTRY_TTL,
            join_rate_per_hour: 0.0,
            leave_rate_per_hour: 0.0,
            sweep_interval: config::DEFAULT_SWEEP_INTERVAL,
            seed: 0,
        }
    }
}

pub struct SimEnv {
    pub clock: VirtualClock,
    pub dht: DhtNetwork,
    pub server: Ephemerizer,
    pub client_rng: ChaCha20Rng,
    sweep_interval: u64,
    next_sweep: VirtualTime,
}

impl SimEnv {
    pub fn new(opts: &EnvOptions) -> Self {
        let clock = VirtualClock::new(0);
        let dht = bootstrap(
            DhtConfig {
                node_count: opts.nodes,
                replication_factor: opts.replication_factor,
                replication_interval: opts.replication_interval,
                entry_ttl: opts.entry_ttl,
                join_rate_per_hour: opts.join_rate_per_hour,
                leave_rate_per_hour: opts.leave_rate_per_hour,
                seed: opts.seed,
            },
            clock.clone(),
        );
        let server = Ephemerizer::new(
            clock.clone(),
            EphemerizerConfig { id_bits: 16, seed: opts.seed.wrapping_add(1) },
        );
        Self {
            clock,
            dht,
            server,
            client_rng: ChaCha20Rng::seed_from_u64(opts.seed.wrapping_add(2)),
            sweep_interval: opts.sweep_interval,
            next_sweep: opts.sweep_interval,
        }
    }

    pub fn now(&self) -> VirtualTime {
        self.clock.now()
    }

    /// Advances virtual time, running the server's periodic expiry sweep on
    /// its own schedule between DHT event batches.
    pub fn advance(&mut self, dt: VirtualTime) {
        let target = self.now() + dt;
        while self.next_sweep <= target {
            let step = self.next_sweep - self.now();
            self.dht.tick(step);
            self.server.sweep_expired();
            self.next_sweep += self.sweep_interval;
        }
        self.dht.tick(target - self.now());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ENV_MAGIC);
        out.push(1);
        out.extend_from_slice(&self.sweep_interval.to_be_bytes());
        out.extend_from_slice(&self.next_sweep.to_be_bytes());
        out.extend_from_slice(&self.client_rng.get_seed());
        out.extend_from_slice(&self.client_rng.get_word_pos().to_be_bytes());
        let server = self.server.snapshot_bytes();
        out.extend_from_slice(&(server.len() as u32).to_be_bytes());
        out.extend_from_slice(&server);
        let dht = self.dht.snapshot_bytes();
        out.extend_from_slice(&(dht.len() as u32).to_be_bytes());
        out.extend_from_slice(&dht);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CliError> {
        let bad = || CliError::Io("malformed environment state file".into());
        let take = |data: &mut &[u8], n: usize| -> Result<Vec<u8>, CliError> {
            if data.len() < n {
                return Err(bad());
            }
            let (head, tail) = data.split_at(n);
            let out = head.to_vec();
            *data = tail;
            Ok(out)
        };
        let mut rest = data;
        if take(&mut rest, 4)? != ENV_MAGIC {
            return Err(bad());
        }
        if take(&mut rest, 1)? != [1] {
            return Err(CliError::Io("unsupported environment state version".into()));
        }
        let sweep_interval = u64::from_be_bytes(take(&mut rest, 8)?.try_into().unwrap());
        let next_sweep = u64::from_be_bytes(take(&mut rest, 8)?.try_into().unwrap());
        let rng_seed: [u8; 32] = take(&mut rest, 32)?.try_into().unwrap();
        let word_pos = u128::from_be_bytes(take(&mut rest, 16)?.try_into().unwrap());
        let server_len = u32::from_be_bytes(take(&mut rest, 4)?.try_into().unwrap()) as usize;
        let server_bytes = take(&mut rest, server_len)?;
        let dht_len = u32::from_be_bytes(take(&mut rest, 4)?.try_into().unwrap()) as usize;
        let dht_bytes = take(&mut rest, dht_len)?;
        if !rest.is_empty() {
            return Err(bad());
        }

        let clock = VirtualClock::new(0);
        let dht = DhtNetwork::from_snapshot_bytes(&dht_bytes, clock.clone())
            .map_err(|e| CliError::Io(format!("environment state: {e}")))?;
        let server = Ephemerizer::from_snapshot_bytes(&server_bytes, clock.clone(), 0)
            .map_err(|e| CliError::Io(format!("environment state: {e}")))?;
        let mut client_rng = ChaCha20Rng::from_seed(rng_seed);
        client_rng.set_word_pos(word_pos);
        Ok(Self { clock, dht, server, client_rng, sweep_interval, next_sweep })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes())
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_bytes(&data)
    }

    /// Loads the state file, or builds a fresh environment when it does not
    /// exist yet.
    pub fn load_or_create(path: &Path, opts: &EnvOptions) -> Result<Self, CliError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new(opts))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_file_round_trip() {
        let mut env = SimEnv::new(&EnvOptions { nodes: 20, seed: 9, ..EnvOptions::default() });
        env.advance(3700);
        assert_eq!(env.now(), 3700);
        let bytes = env.to_bytes();
        let restored = SimEnv::from_bytes(&bytes).unwrap();
        assert_eq!(restored.now(), 3700);
        assert_eq!(restored.dht.state_fingerprint(), env.dht.state_fingerprint());
        assert_eq!(restored.to_bytes(), bytes);
        assert!(SimEnv::from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn advance_runs_sweeps_on_schedule() {
        let mut env = SimEnv::new(&EnvOptions { nodes: 5, seed: 1, ..EnvOptions::default() });
        let grant = env.server.create_key(90, false).unwrap();
        env.advance(200); // sweeps fire at 60, 120, 180
        assert_eq!(env.server.live_count(), 0);
        assert!(env
            .server
            .request_key(&grant.n_t, grant.id_t)
            .is_err());
    }
}
