//! Throughput modeling, flow rate allocation and slotted simulation for
//! random-access multi-hop wireless networks whose receivers may apply
//! successive interference cancelation (SIC).
//!
//! The crate is organized bottom-up:
//!
//! - [`channel`]: Rayleigh-fading success probabilities for a single link.
//! - [`network`]: nodes, paths, interferer sets and per-link reception policies.
//! - [`throughput`]: average link, path and aggregate throughput.
//! - [`allocation`]: the annealing-based optimizer and the baseline schemes.
//! - [`sim`]: a slot-level simulator with relay backoff and retransmissions.
//! - [`experiments`]: scenario sweeps that write comparison tables.
//!
//! [`config`] loads scenarios from TOML, [`topologies`] provides the three
//! builtin four-node networks and [`calibrate`] recovers their distances.

pub mod allocation;
pub mod calibrate;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod network;
pub mod sim;
pub mod throughput;
pub mod topologies;

pub use error::{Error, Result};
