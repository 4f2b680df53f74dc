//! Library half of the `qopula` command-line tool: CSV formats and the
//! command implementations. Everything here is callable without a
//! process boundary so integration tests (and fuzzers, for the parsers)
//! can exercise the exact production paths.

pub mod csvio;
pub mod run;
