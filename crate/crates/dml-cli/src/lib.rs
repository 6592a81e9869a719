//! Command implementations behind the `dml` binary and the acceptance suite.
//!
//! Each command returns a [`commands::Report`]: an exit code, a human-readable
//! text and a JSON value.  The binary only parses arguments and prints.

pub mod commands;
pub mod suite;

/// Version stamped into every JSON document as `schema_version`.
pub const SCHEMA_VERSION: u32 = 1;
