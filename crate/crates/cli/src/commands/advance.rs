use std::path::PathBuf;

use clap::Args;

use crate::config::{format_duration, parse_duration};
use crate::env::SimEnv;
use crate::CliResult;

#[derive(Args, Debug)]
pub struct AdvanceArgs {
    /// How far to advance the virtual clock (e.g. 2h, 30m, 7200)
    #[arg(long)]
    pub by: String,
    /// Environment state file
    #[arg(long, default_value = "sdd.env")]
    pub state: PathBuf,
}

pub fn run(args: AdvanceArgs) -> CliResult {
    let dt = parse_duration(&args.by)?;
    let mut env = SimEnv::load(&args.state)?;
    env.advance(dt);
    env.save(&args.state)?;
    println!("virtual clock advanced by {} to t={}", format_duration(dt), format_duration(env.now()));
    Ok(())
}
