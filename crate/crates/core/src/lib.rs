//! Domain-sensitive feature attribution and the domain-sensitive feature
//! memory model for multi-domain click/conversion prediction.

pub mod artifact;
pub mod attribution;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod memory;
pub mod nn;
pub mod seed;
pub mod sensitivity;
pub mod train;

pub use error::{Error, Result};
