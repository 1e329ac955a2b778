//! Config-driven front end for qmlab: TOML schema, stage pipeline and
//! deterministic report writer.

pub mod config;
pub mod pipeline;
pub mod report;
