//! Typed product terms, nested relational calculus, equational schemas and
//! Delta/Sigma/Pi data migration.
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::result_large_err)]

extern crate alloc;

pub mod egraph;
pub mod equality;
pub mod fixtures;
pub mod kernel;
pub mod mapping;
pub mod migration;
pub mod nrc;
pub mod query;
pub mod schema;
pub mod value;
