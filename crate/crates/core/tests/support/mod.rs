//! Shared by the integration tests of this crate and the acceptance suite.
#![allow(dead_code)]

pub mod gen;
pub mod oracles;
