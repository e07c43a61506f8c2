//! Operator surface for the netsentry engine: configuration, reports,
//! manifests, and the command implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod doc;
pub mod report;
