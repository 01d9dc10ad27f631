//! Library side of the CLI: the HTTP classification service, chart
//! rendering, and config-file handling, shared by the binary and the
//! integration tests.

pub mod chart;
pub mod config;
pub mod server;
