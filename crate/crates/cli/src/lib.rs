//! Command-line toolkit for self-destructing data.
//!
//! Subcommands: `encap`/`decap` work on files against a persistent simulated
//! environment (DHT + key server + virtual clock), `advance` moves that
//! environment's virtual clock, `serve` exposes the key server's wire
//! protocol on a TCP socket, `simulate` runs scripted encap/churn/decap
//! timelines, `attack` runs the Sybil harness, and `bench` measures
//! encapsulation/decapsulation scaling against the share count.

pub mod commands;
pub mod config;
pub mod env;
pub mod report;
pub mod scenario;
pub mod wire;

use clap::{Parser, Subcommand};

/// Stable exit codes: 0 success, 2 usage, 3 expired/refused, 4 insufficient
/// shares, 5 IO. Simulation-expectation mismatches exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Refused(String),
    InsufficientShares(String),
    Io(String),
    ExpectationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ExpectationFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Refused(_) => 3,
            CliError::InsufficientShares(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Refused(m)
            | CliError::InsufficientShares(m)
            | CliError::Io(m)
            | CliError::ExpectationFailed(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<sdd_core::vdo::DecapError> for CliError {
    fn from(e: sdd_core::vdo::DecapError) -> Self {
        use sdd_core::vdo::DecapError;
        match e {
            DecapError::InsufficientShares { needed, got } => CliError::InsufficientShares(
                format!("only {got} of the {needed} required shares are retrievable (DHT expiry or churn)"),
            ),
            DecapError::KeyRefused(r) => {
                CliError::Refused(format!("key server refused the request: {r}"))
            }
            other => CliError::Refused(other.to_string()),
        }
    }
}

impl From<sdd_core::vdo::ProtocolError> for CliError {
    fn from(e: sdd_core::vdo::ProtocolError) -> Self {
        CliError::Usage(format!("encapsulation failed: {e}"))
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(name = "sdd", version, about = "Self-destructing data toolkit and simulation testbed")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encapsulate a file into a .vdo against the simulated environment
    Encap(commands::encap::EncapArgs),
    /// Decapsulate a .vdo back into the original file
    Decap(commands::decap::DecapArgs),
    /// Advance the environment's virtual clock
    Advance(commands::advance::AdvanceArgs),
    /// Serve the key-server wire protocol over TCP
    Serve(commands::serve::ServeArgs),
    /// Run an encap -> churn -> decap timeline and report each phase
    Simulate(commands::simulate::SimulateArgs),
    /// Run the Sybil crawling attack against fresh targets
    Attack(commands::attack::AttackArgs),
    /// Measure encap/decap times across share counts and fit the trend
    Bench(commands::bench::BenchArgs),
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Encap(args) => commands::encap::run(args),
        Command::Decap(args) => commands::decap::run(args),
        Command::Advance(args) => commands::advance::run(args),
        Command::Serve(args) => commands::serve::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Attack(args) => commands::attack::run(args),
        Command::Bench(args) => commands::bench::run(args),
    }
}
