use std::path::PathBuf;

use clap::Args;
use rand_core::RngCore;

use sdd_core::crypto::DhtId;
use sdd_core::field::production_prime;
use sdd_core::sharing::{share_wire_width, SharingParams};
use sdd_core::sybil::{run_attack, AttackConfig, AttackTarget};
use sdd_core::vdo::{encapsulate_hybrid, encapsulate_vanish};

use crate::commands::{EnvArgs, SharingArgs};
use crate::config::{self, format_duration, ModeArg};
use crate::env::SimEnv;
use crate::report;
use crate::scenario;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct AttackArgs {
    /// Concurrent Sybil identities
    #[arg(long)]
    pub identities: Option<u32>,
    /// Virtual time between identity hops
    #[arg(long)]
    pub hop: Option<String>,
    /// Attack window (virtual)
    #[arg(long)]
    pub duration: Option<String>,
    /// Drop harvested values that do not match the share width
    #[arg(long, value_parser = ["on", "off"], default_value = "on")]
    pub size_filter: String,
    /// Record lifetime of the hybrid target
    #[arg(long)]
    pub hybrid_ttl: Option<String>,
    /// Attack rng seed (independent of the environment seed)
    #[arg(long)]
    pub attack_seed: Option<u64>,
    /// Unrelated decoy entries stored alongside the shares
    #[arg(long, default_value_t = 5)]
    pub decoys: u32,
    /// Scenario script applied to the underlying DHT
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Write the full JSON report here
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the per-target CSV summary here
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[command(flatten)]
    pub sharing: SharingArgs,
    #[command(flatten)]
    pub env: EnvArgs,
}

pub fn run(args: AttackArgs) -> CliResult {
    let settings = args.env.settings()?;
    let mut opts = args.env.env_options(&settings)?;
    let script = args.scenario.as_deref().map(scenario::load).transpose()?.unwrap_or_default();
    if let Some(seed) = script.seed {
        opts.seed = seed;
    }
    let mut env = SimEnv::new(&opts);
    for event in &script.events {
        env.dht.schedule(*event);
    }

    let hybrid_ttl = match &args.hybrid_ttl {
        Some(s) => config::parse_duration(s)?,
        None => settings.duration("ttl")?.unwrap_or(config::DEFAULT_TTL),
    };
    let config = AttackConfig {
        identity_count: args
            .identities
            .or(settings.u64("identities")?.map(|v| v as u32))
            .unwrap_or(10),
        hop_interval: match &args.hop {
            Some(s) => config::parse_duration(s)?,
            None => settings.duration("hop_interval")?.unwrap_or(config::DEFAULT_HOP_INTERVAL),
        },
        duration: match &args.duration {
            Some(s) => config::parse_duration(s)?,
            None => settings.duration("duration")?.unwrap_or(config::DEFAULT_ENTRY_TTL),
        },
        size_filter: (args.size_filter == "on").then(|| share_wire_width(production_prime())),
        seed: args.attack_seed.or(settings.u64("attack_seed")?).unwrap_or(7),
    };

    // two fresh targets: the vanish baseline and the hybrid architecture
    let field = production_prime();
    let mut vanish_payload = vec![0u8; 32 * 1024];
    env.client_rng.fill_bytes(&mut vanish_payload);
    let (vn, vk) = args.sharing.resolve(ModeArg::Vanish, &settings)?;
    let vanish_params = SharingParams::new(vn, vk, field.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let vanish_vdo =
        encapsulate_vanish(&vanish_payload, &vanish_params, &mut env.dht, &mut env.client_rng)?;

    let mut hybrid_payload = vec![0u8; 32 * 1024];
    env.client_rng.fill_bytes(&mut hybrid_payload);
    let (hn, hk) = args.sharing.resolve(ModeArg::Hybrid, &settings)?;
    let hybrid_params = SharingParams::new(hn, hk, field.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let hybrid_vdo = encapsulate_hybrid(
        &hybrid_payload,
        hybrid_ttl,
        false,
        &hybrid_params,
        &mut env.server,
        &mut env.dht,
        &mut env.client_rng,
    )?;

    // decoy entries of a different width, so the size filter has something
    // to discard
    for i in 0..args.decoys {
        let mut key = [0u8; 20];
        env.client_rng.fill_bytes(&mut key);
        let mut value = vec![0u8; 64];
        env.client_rng.fill_bytes(&mut value);
        env.dht.store(DhtId(key), value, env.dht.entry_ttl()).map_err(|e| {
            CliError::Usage(format!("storing decoy {i}: {e}"))
        })?;
    }

    let targets = [
        AttackTarget::new(vanish_vdo, &vanish_payload, None),
        AttackTarget::new(hybrid_vdo, &hybrid_payload, Some(hybrid_ttl)),
    ];
    println!(
        "attack: {} identities hopping every {} for {}, size filter {}",
        config.identity_count,
        format_duration(config.hop_interval),
        format_duration(config.duration),
        if config.size_filter.is_some() { "on" } else { "off" },
    );
    let report = run_attack(&mut env.dht, &mut env.server, &config, &targets);

    for (i, o) in report.outcomes.iter().enumerate() {
        println!(
            "target {i} ({}): harvested {} shares, k_reached={}, secrets_recovered={}, lifetime_access={}, plaintext_recovered={}",
            o.mode.name(),
            o.shares_harvested,
            o.k_reached,
            o.secrets_recovered,
            o.lifetime_access,
            o.plaintext_recovered,
        );
    }
    println!(
        "coverage: {:.4} of all stored entries; {} harvest log entries",
        report.coverage,
        report.log.entries.len()
    );

    if let Some(path) = &args.out_json {
        let doc = report::report_json(&config, &report);
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable"))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        println!("json report -> {}", path.display());
    }
    if let Some(path) = &args.out_csv {
        std::fs::write(path, report::report_csv(&report))
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        println!("csv summary -> {}", path.display());
    }
    Ok(())
}
