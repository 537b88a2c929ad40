use std::path::PathBuf;

use clap::Args;
use rand_core::RngCore;

use sdd_core::clock::VirtualTime;
use sdd_core::field::production_prime;
use sdd_core::sharing::SharingParams;
use sdd_core::vdo::{
    decapsulate_ephemerizer, decapsulate_hybrid, decapsulate_vanish, encapsulate_ephemerizer,
    encapsulate_hybrid, encapsulate_vanish, refresh_vanish, Vdo,
};

use crate::commands::{EnvArgs, SharingArgs};
use crate::config::{self, format_duration, ModeArg};
use crate::env::SimEnv;
use crate::scenario;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Architecture mode under test
    #[arg(long, value_enum, default_value = "hybrid")]
    pub mode: ModeArg,
    /// Record lifetime for server-backed modes
    #[arg(long)]
    pub ttl: Option<String>,
    /// Decapsulation checkpoint before expiry (default: half the lifetime)
    #[arg(long)]
    pub check_before: Option<String>,
    /// Decapsulation checkpoint after the expected expiry
    #[arg(long)]
    pub check_after: Option<String>,
    /// Refresh the shares at this virtual time
    #[arg(long)]
    pub refresh_at: Option<String>,
    /// Scenario script with SEED and AT <t> JOIN|LEAVE <hex-id> lines
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Payload size in bytes
    #[arg(long, default_value_t = 65536)]
    pub payload: usize,
    #[command(flatten)]
    pub sharing: SharingArgs,
    #[command(flatten)]
    pub env: EnvArgs,
}

struct Timeline {
    env: SimEnv,
    vdo: Vdo,
    payload: Vec<u8>,
    /// When the current generation of DHT shares expires.
    share_deadline: Option<VirtualTime>,
    /// Server-side record timeout (None for vanish).
    record_deadline: Option<VirtualTime>,
    mismatches: usize,
}

impl Timeline {
    fn expected_alive(&self, t: VirtualTime) -> bool {
        let shares_ok = self.share_deadline.map(|d| t < d).unwrap_or(true);
        let record_ok = self.record_deadline.map(|d| t < d).unwrap_or(true);
        shares_ok && record_ok
    }

    fn decap(&mut self) -> Result<Vec<u8>, sdd_core::vdo::DecapError> {
        match &self.vdo {
            Vdo::Hybrid { .. } => decapsulate_hybrid(&self.vdo, &mut self.env.server, &self.env.dht),
            Vdo::Vanish { .. } => decapsulate_vanish(&self.vdo, &self.env.dht),
            Vdo::Ephemerizer { .. } => decapsulate_ephemerizer(&self.vdo, &mut self.env.server),
        }
    }

    fn check(&mut self) {
        let t = self.env.now();
        let expected = self.expected_alive(t);
        let result = self.decap();
        let (actual, detail) = match result {
            Ok(data) if data == self.payload => (true, "payload intact".to_string()),
            Ok(_) => (false, "payload mismatch".to_string()),
            Err(e) => (false, e.to_string()),
        };
        let verdict = if expected == actual { "as expected" } else { "UNEXPECTED" };
        if expected != actual {
            self.mismatches += 1;
        }
        println!(
            "[t={}] decap -> {} ({detail}); {verdict}",
            format_duration(t),
            if actual { "OK" } else { "FAILED" },
        );
    }

    fn refresh(&mut self) -> CliResult {
        let t = self.env.now();
        match self.vdo.mode() {
            sdd_core::vdo::VdoMode::Vanish => {
                match refresh_vanish(&self.vdo, &mut self.env.dht, &mut self.env.client_rng) {
                    Ok(new_vdo) => {
                        self.vdo = new_vdo;
                        self.share_deadline = Some(t + self.env.dht.entry_ttl());
                        println!("[t={}] refresh -> shares re-split under a new access key", format_duration(t));
                    }
                    Err(e) => {
                        self.mismatches += 1;
                        println!("[t={}] refresh -> FAILED ({e}); UNEXPECTED", format_duration(t));
                    }
                }
            }
            sdd_core::vdo::VdoMode::Hybrid => {
                let ids = self.env.server.live_record_ids();
                let Some(&id) = ids.first() else {
                    self.mismatches += 1;
                    println!("[t={}] refresh -> FAILED (no live record); UNEXPECTED", format_duration(t));
                    return Ok(());
                };
                match self.env.server.refresh(id, &mut self.env.dht) {
                    Ok(l_new) => {
                        if let Vdo::Hybrid { l, .. } = &mut self.vdo {
                            *l = l_new;
                        }
                        self.share_deadline = Some(t + self.env.dht.entry_ttl());
                        println!(
                            "[t={}] refresh -> server re-split shares, recipient re-keyed",
                            format_duration(t)
                        );
                    }
                    Err(e) => {
                        self.mismatches += 1;
                        println!("[t={}] refresh -> FAILED ({e}); UNEXPECTED", format_duration(t));
                    }
                }
            }
            sdd_core::vdo::VdoMode::Ephemerizer => {
                println!(
                    "[t={}] refresh -> nothing to refresh in ephemerizer mode",
                    format_duration(t)
                );
            }
        }
        Ok(())
    }
}

pub fn run(args: SimulateArgs) -> CliResult {
    let settings = args.env.settings()?;
    let mut opts = args.env.env_options(&settings)?;
    let script = args.scenario.as_deref().map(scenario::load).transpose()?.unwrap_or_default();
    if let Some(seed) = script.seed {
        opts.seed = seed;
    }
    let mut env = SimEnv::new(&opts);
    for event in &script.events {
        env.dht.schedule(event.clone());
    }

    let ttl = match &args.ttl {
        Some(s) => config::parse_duration(s)?,
        None => settings.duration("ttl")?.unwrap_or(config::DEFAULT_TTL),
    };
    let mut payload = vec![0u8; args.payload];
    env.client_rng.fill_bytes(&mut payload);

    println!(
        "[t=0s] bootstrap: {} nodes, r={}, entry ttl {}, seed {}",
        env.dht.alive_count(),
        env.dht.config().replication_factor,
        format_duration(env.dht.entry_ttl()),
        opts.seed,
    );

    let entry_ttl = env.dht.entry_ttl();
    let expires_at = ttl;
    let (vdo, share_deadline, record_deadline) = match args.mode {
        ModeArg::Hybrid => {
            let (n, k) = args.sharing.resolve(args.mode, &settings)?;
            let params = SharingParams::new(n, k, production_prime().clone())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let vdo = encapsulate_hybrid(
                &payload,
                expires_at,
                false,
                &params,
                &mut env.server,
                &mut env.dht,
                &mut env.client_rng,
            )?;
            println!(
                "[t=0s] encap: hybrid n={n} k={k}, record expires at t={}",
                format_duration(expires_at)
            );
            (vdo, Some(entry_ttl), Some(expires_at))
        }
        ModeArg::Vanish => {
            let (n, k) = args.sharing.resolve(args.mode, &settings)?;
            let params = SharingParams::new(n, k, production_prime().clone())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let vdo = encapsulate_vanish(&payload, &params, &mut env.dht, &mut env.client_rng)?;
            println!(
                "[t=0s] encap: vanish n={n} k={k}, shares vanish at t={}",
                format_duration(entry_ttl)
            );
            (vdo, Some(entry_ttl), None)
        }
        ModeArg::Ephemerizer => {
            let vdo = encapsulate_ephemerizer(
                &payload,
                expires_at,
                false,
                &mut env.server,
                &mut env.client_rng,
            )?;
            println!(
                "[t=0s] encap: ephemerizer, record expires at t={}",
                format_duration(expires_at)
            );
            (vdo, None, Some(expires_at))
        }
    };

    let mut timeline = Timeline {
        env,
        vdo,
        payload,
        share_deadline,
        record_deadline,
        mismatches: 0,
    };

    // phase schedule: before-check, optional refresh, after-check
    let natural_deadline = match args.mode {
        ModeArg::Vanish => entry_ttl,
        ModeArg::Ephemerizer => expires_at,
        ModeArg::Hybrid => expires_at.min(entry_ttl),
    };
    let check_before = match &args.check_before {
        Some(s) => config::parse_duration(s)?,
        None => natural_deadline / 2,
    };
    let refresh_at = args.refresh_at.as_deref().map(config::parse_duration).transpose()?;
    let check_after = match &args.check_after {
        Some(s) => config::parse_duration(s)?,
        None => natural_deadline + 60,
    };

    let mut phases: Vec<(VirtualTime, &str)> = vec![(check_before, "check")];
    if let Some(t) = refresh_at {
        phases.push((t, "refresh"));
    }
    phases.push((check_after, "check"));
    phases.sort_by_key(|(t, _)| *t);

    for (at, what) in phases {
        let now = timeline.env.now();
        if at > now {
            timeline.env.advance(at - now);
        }
        match what {
            "refresh" => timeline.refresh()?,
            _ => timeline.check(),
        }
    }

    if timeline.mismatches == 0 {
        println!("simulation complete: every phase matched expectations");
        Ok(())
    } else {
        Err(CliError::ExpectationFailed(format!(
            "{} phase(s) deviated from the expected timeline",
            timeline.mismatches
        )))
    }
}
