//! Threshold analysis for prepare-and-measure QKD protocols through group-symmetrized
//! effective channels.
//!
//! The pipeline runs in the order of the modules below: build an ensemble and its
//! measurement, generate the symmetry groups, derive the decoding scheme and its
//! automorphisms, reduce the channel to its symmetric family, then bound the key rate.

pub mod channels;
pub mod cli;
pub mod decoding;
pub mod ensembles;
pub mod error;
pub mod expr;
pub mod keyrate;
pub mod linops;
pub mod mcsim;
pub mod registry;
pub mod symmetry;

pub use error::{Error, Result};
pub use keyrate::Analysis;
