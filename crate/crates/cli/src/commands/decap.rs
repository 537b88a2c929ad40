use std::path::PathBuf;

use clap::Args;

use sdd_core::vdo::{
    decapsulate_ephemerizer, decapsulate_hybrid, decapsulate_vanish, vdo_decode, Vdo,
};

use crate::env::SimEnv;
use crate::{CliError, CliResult};

#[derive(Args, Debug)]
pub struct DecapArgs {
    /// Input .vdo file
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Where to write the recovered payload
    #[arg(long = "out")]
    pub output: PathBuf,
    /// Environment state file written by encap
    #[arg(long, default_value = "sdd.env")]
    pub state: PathBuf,
}

pub fn run(args: DecapArgs) -> CliResult {
    let mut env = SimEnv::load(&args.state)?;
    let bytes = std::fs::read(&args.input)
        .map_err(|e| CliError::Usage(format!("input {}: {e}", args.input.display())))?;
    let vdo = vdo_decode(&bytes).map_err(|e| CliError::Usage(e.to_string()))?;

    let result = match &vdo {
        Vdo::Hybrid { .. } => decapsulate_hybrid(&vdo, &mut env.server, &env.dht),
        Vdo::Vanish { .. } => decapsulate_vanish(&vdo, &env.dht),
        Vdo::Ephemerizer { .. } => decapsulate_ephemerizer(&vdo, &mut env.server),
    };
    // a decapsulation attempt can consume read-once records or lazily erase
    // expired ones, so the environment is saved either way
    env.save(&args.state)?;
    let data = result?;

    std::fs::write(&args.output, &data)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", args.output.display())))?;
    println!(
        "decapsulated {} -> {} ({} bytes, {} mode)",
        args.input.display(),
        args.output.display(),
        data.len(),
        vdo.mode().name()
    );
    Ok(())
}
