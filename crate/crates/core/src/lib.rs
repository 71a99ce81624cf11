//! Goal-oriented dialogue policies trained with deep Q-learning against an
//! agenda-based user simulator, with weight transfer between domains that
//! share slots.

pub mod agent;
pub mod cli;
pub mod domain;
pub mod error;
pub mod harness;
pub mod kb;
pub mod neural;
pub mod simulator;
pub mod tracker;
pub mod transfer;

pub use error::{Error, Result};
