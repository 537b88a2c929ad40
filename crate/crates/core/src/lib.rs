//! Core library for the self-destructing data toolkit.
//!
//! Everything in this crate is deterministic and side-effect free: callers
//! supply randomness and time flows through an explicit [`clock::VirtualClock`].
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live in
//! the companion `sdd-cli` crate.
//!
//! The pieces, bottom to top:
//!
//! - [`field`]: prime-field arithmetic and polynomial interpolation.
//! - [`sharing`]: Shamir threshold sharing and recursive multi-secret sharing.
//! - [`crypto`]: SHA-1, AES-128-CTR, key and DHT index derivation.
//! - [`dht`]: a deterministic in-process Chord-style ring with churn,
//!   replication and entry expiry under a virtual clock.
//! - [`ephemerizer`]: the central key server that mints ephemeral key material
//!   and erases it at timeout.
//! - [`vdo`]: encapsulation/decapsulation for the three architectures and the
//!   VDO container format.
//! - [`sybil`]: a Sybil crawling-attack harness over the simulated DHT.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod bytesio;
pub mod clock;
pub mod crypto;
pub mod dht;
pub mod ephemerizer;
pub mod field;
pub mod sharing;
pub mod sybil;
pub mod vdo;
