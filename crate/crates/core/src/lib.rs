//! Analysis and design of LDPC codes with local decoding of sub-blocks and
//! global decoding through joint checks, over the binary erasure channel.

pub mod construction;
pub mod density_evolution;
pub mod ensembles;
pub mod error;
pub mod finite_length;
pub mod lp;
pub mod numfmt;
pub mod reproduce;
pub mod scheduler;
pub mod simulator;
pub mod threshold;

pub use error::{Error, Result};
