//! IO companion for the deployment-game library: topology and traffic
//! loaders, gravity synthesis, shortest-path flow construction, scenario
//! configuration, experiment runners and the CLI plumbing behind the
//! `deploygame` binary.

#![forbid(unsafe_code)]

pub mod config;
pub mod dataio;
pub mod experiments;
pub mod scenario;
pub mod validate;
