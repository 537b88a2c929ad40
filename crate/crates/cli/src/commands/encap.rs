use std::path::PathBuf;

use clap::Args;

use sdd_core::field::production_prime;
use sdd_core::sharing::SharingParams;
use sdd_core::vdo::{
    encapsulate_ephemerizer, encapsulate_hybrid, encapsulate_vanish, vdo_encode,
};

use crate::commands::{EnvArgs, SharingArgs};
use crate::config::{self, ModeArg};
use crate::env::SimEnv;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct EncapArgs {
    /// Architecture mode
    #[arg(long, value_enum, default_value = "hybrid")]
    pub mode: ModeArg,
    /// Input file to encapsulate
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output .vdo path (defaults to the input path plus .vdo)
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// Record lifetime (virtual); the key server refuses requests after it.
    /// Vanish mode has no server record, its lifetime is the DHT entry
    /// timeout.
    #[arg(long)]
    pub ttl: Option<String>,
    /// Consume the server record on its first key grant
    #[arg(long)]
    pub read_once: bool,
    #[command(flatten)]
    pub sharing: SharingArgs,
    #[command(flatten)]
    pub env: EnvArgs,
}

pub fn run(args: EncapArgs) -> CliResult {
    let settings = args.env.settings()?;
    let opts = args.env.env_options(&settings)?;
    let mut env = SimEnv::load_or_create(&args.env.state, &opts)?;

    let data = std::fs::read(&args.input)
        .map_err(|e| CliError::Usage(format!("input {}: {e}", args.input.display())))?;
    let ttl = match &args.ttl {
        Some(s) => config::parse_duration(s)?,
        None => settings.duration("ttl")?.unwrap_or(config::DEFAULT_TTL),
    };
    let expires_at = env.now() + ttl;

    let vdo = match args.mode {
        ModeArg::Hybrid => {
            let (n, k) = args.sharing.resolve(args.mode, &settings)?;
            let params = SharingParams::new(n, k, production_prime().clone())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            encapsulate_hybrid(
                &data,
                expires_at,
                args.read_once,
                &params,
                &mut env.server,
                &mut env.dht,
                &mut env.client_rng,
            )?
        }
        ModeArg::Vanish => {
            let (n, k) = args.sharing.resolve(args.mode, &settings)?;
            let params = SharingParams::new(n, k, production_prime().clone())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            encapsulate_vanish(&data, &params, &mut env.dht, &mut env.client_rng)?
        }
        ModeArg::Ephemerizer => encapsulate_ephemerizer(
            &data,
            expires_at,
            args.read_once,
            &mut env.server,
            &mut env.client_rng,
        )?,
    };

    let output = args
        .output
        .clone()
        .unwrap_or_else(|| {
            let mut p = args.input.clone().into_os_string();
            p.push(".vdo");
            PathBuf::from(p)
        });
    std::fs::write(&output, vdo_encode(&vdo))
        .map_err(|e| CliError::Io(format!("writing {}: {e}", output.display())))?;
    env.save(&args.env.state)?;

    match &vdo {
        sdd_core::vdo::Vdo::Vanish { n, k, .. } => println!(
            "encapsulated {} -> {} (vanish, n={n} k={k}, shares live until t={})",
            args.input.display(),
            output.display(),
            config::format_duration(env.now() + env.dht.entry_ttl()),
        ),
        sdd_core::vdo::Vdo::Ephemerizer { .. } => println!(
            "encapsulated {} -> {} (ephemerizer, key expires at t={})",
            args.input.display(),
            output.display(),
            config::format_duration(expires_at),
        ),
        sdd_core::vdo::Vdo::Hybrid { n, k, .. } => println!(
            "encapsulated {} -> {} (hybrid, n={n} k={k}, key expires at t={})",
            args.input.display(),
            output.display(),
            config::format_duration(expires_at),
        ),
    }
    Ok(())
}
