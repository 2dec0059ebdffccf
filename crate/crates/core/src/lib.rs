//! Covert cooperative detection with a team of AUVs, trained by a
//! dual-timescale hierarchical multi-agent PPO.

pub mod acoustics;
pub mod envsim;
pub mod error;
pub mod harness;
pub mod hmappo;
pub mod mission;
pub mod neural;
pub mod ocean;
