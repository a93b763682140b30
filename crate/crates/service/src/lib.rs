//! Agents, the batch runner, the wire-protocol service and the CLI commands
//! built on top of `embodinav-core`.

pub mod agents;
pub mod commands;
pub mod http_client;
pub mod oracle;
pub mod output;
pub mod protocol;
pub mod runner;
pub mod server;
pub mod session;
pub mod supervise;
