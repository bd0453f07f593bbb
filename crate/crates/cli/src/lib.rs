//! Command-line front end for `feedcap-core`: argument definitions, the
//! JSON result envelope and the CSV sweeps.

pub mod args;
pub mod commands;
pub mod sweep;
