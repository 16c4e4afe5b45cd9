//! Library surface of the corrset command-line tool, exposed so integration
//! and acceptance tests can drive the commands in-process.

pub mod commands;
pub mod formats;
pub mod report;
