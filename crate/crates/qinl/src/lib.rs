//! Text front end for the query engine: the `.qinl` surface syntax, the
//! instance exchange format and the `qinl` command line.

#![allow(clippy::result_large_err)]

pub mod cli;
pub mod surface;
