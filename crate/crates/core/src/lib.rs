//! Incremental best-effort graph pattern matching over update streams.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod agent;
pub mod clustering;
pub mod graph;
pub mod igpm;
pub mod matcher;
pub mod oracle;
pub mod pattern;
pub mod pem;
pub mod proximity;
