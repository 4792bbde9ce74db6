#![allow(clippy::needless_range_loop)]

pub mod cache;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod expr;
pub mod fiber;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod report;
pub mod ring;
pub mod spec_file;

pub use error::{Error, Result};
