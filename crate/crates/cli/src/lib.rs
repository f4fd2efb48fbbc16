//! Library surface of the `mco-lab` experiment runner: configuration
//! resolution, the experiment implementations, the lossless CSV table, and
//! the built-in SVG renderer. The binary in `main.rs` is a thin shell over
//! these modules, and the integration tests parse its output with the same
//! code that wrote it.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;
