//! File formats and the command-line front end for `roughstruct-core`.

pub mod cli;
pub mod formats;
