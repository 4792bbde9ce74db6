//! Oracles and invariant checks shared by the integration tests.
#![allow(dead_code)]

pub mod families;
pub mod invariants;
pub mod orthogonal;
