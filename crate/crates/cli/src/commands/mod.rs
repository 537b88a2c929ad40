pub mod advance;
pub mod attack;
pub mod bench;
pub mod decap;
pub mod encap;
pub mod serve;
pub mod simulate;

use std::path::PathBuf;

use clap::Args;

use crate::config::{self, FileSettings, ModeArg};
use crate::env::EnvOptions;
use crate::CliError;

/// Flags shared by every command that builds or opens an environment.
#[derive(Args, Debug, Clone)]
pub struct EnvArgs {
    /// Environment state file (created on first use)
    #[arg(long, default_value = "sdd.env")]
    pub state: PathBuf,
    /// DHT node count for a fresh environment
    #[arg(long)]
    pub nodes: Option<u32>,
    /// Replica count r (successor plus r-1 followers)
    #[arg(long)]
    pub replication_factor: Option<u16>,
    /// Virtual seconds between replication rounds
    #[arg(long)]
    pub replication_interval: Option<String>,
    /// The DHT's fixed entry timeout
    #[arg(long)]
    pub entry_ttl: Option<String>,
    /// Poisson churn rates in events per virtual hour
    #[arg(long)]
    pub join_rate: Option<f64>,
    #[arg(long)]
    pub leave_rate: Option<f64>,
    /// Server expiry-sweep interval in virtual seconds
    #[arg(long)]
    pub sweep_interval: Option<String>,
    /// Deterministic seed for a fresh environment
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional key = value config file (flags override it)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl EnvArgs {
    pub fn settings(&self) -> Result<FileSettings, CliError> {
        FileSettings::load(self.config.as_deref())
    }

    pub fn env_options(&self, settings: &FileSettings) -> Result<EnvOptions, CliError> {
        let duration_of = |flag: &Option<String>, key: &str, fallback: u64| -> Result<u64, CliError> {
            match flag {
                Some(s) => config::parse_duration(s),
                None => Ok(settings.duration(key)?.unwrap_or(fallback)),
            }
        };
        Ok(EnvOptions {
            nodes: match self.nodes {
                Some(n) => n,
                None => settings.u64("nodes")?.unwrap_or(u64::from(config::DEFAULT_NODES)) as u32,
            },
            replication_factor: match self.replication_factor {
                Some(r) => r,
                None => settings
                    .u64("replication_factor")?
                    .unwrap_or(u64::from(config::DEFAULT_REPLICATION_FACTOR))
                    as u16,
            },
            replication_interval: duration_of(
                &self.replication_interval,
                "replication_interval",
                config::DEFAULT_REPLICATION_INTERVAL,
            )?,
            entry_ttl: duration_of(&self.entry_ttl, "entry_ttl", config::DEFAULT_ENTRY_TTL)?,
            join_rate_per_hour: self
                .join_rate
                .or(settings.str("join_rate").and_then(|s| s.parse().ok()))
                .unwrap_or(0.0),
            leave_rate_per_hour: self
                .leave_rate
                .or(settings.str("leave_rate").and_then(|s| s.parse().ok()))
                .unwrap_or(0.0),
            sweep_interval: duration_of(
                &self.sweep_interval,
                "sweep_interval",
                config::DEFAULT_SWEEP_INTERVAL,
            )?,
            seed: match self.seed {
                Some(s) => s,
                None => settings.u64("seed")?.unwrap_or(0),
            },
        })
    }
}

/// Sharing-geometry flags shared by encap, simulate, attack and bench.
#[derive(Args, Debug, Clone)]
pub struct SharingArgs {
    /// Number of shares n
    #[arg(long)]
    pub shares: Option<u16>,
    /// Threshold k (overrides --threshold-percent)
    #[arg(long)]
    pub threshold: Option<u16>,
    /// Threshold as a percentage of n, rounded up
    #[arg(long)]
    pub threshold_percent: Option<u32>,
}

impl SharingArgs {
    pub fn resolve(
        &self,
        mode: ModeArg,
        settings: &FileSettings,
    ) -> Result<(u16, u16), CliError> {
        let shares = match self.shares {
            Some(n) => Some(n),
            None => settings.u64("shares")?.map(|v| v as u16),
        };
        let threshold = match self.threshold {
            Some(k) => Some(k),
            None => settings.u64("threshold")?.map(|v| v as u16),
        };
        let percent = match self.threshold_percent {
            Some(p) => Some(p),
            None => settings.u64("threshold_percent")?.map(|v| v as u32),
        };
        config::resolve_sharing(mode, shares, threshold, percent)
    }
}
