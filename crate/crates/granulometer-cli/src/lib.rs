//! Library surface of the `granulometer` CLI: command implementations,
//! configuration schemas, and report formats. The binary in `main.rs` is a
//! thin argument-parsing wrapper over these.

pub mod analyze;
pub mod compare;
pub mod config;
pub mod pipeline;
pub mod plan;
pub mod plot;
pub mod report;
pub mod svg;
pub mod synth;
