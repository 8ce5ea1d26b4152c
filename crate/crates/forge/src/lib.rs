//! Orchestration for SRM detection and taint analysis: the end-to-end
//! pipeline, background jobs, the HTTP API and the `srm-forge` CLI.

pub mod cli;
pub mod config;
pub mod jobs;
pub mod pipeline;
pub mod project;
pub mod server;
