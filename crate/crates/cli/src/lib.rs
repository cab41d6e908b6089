//! Operational surface of the solver: configuration, file formats, and the
//! verification suites the acceptance tests run.

// Negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod expr;
pub mod export;
pub mod plan_io;
pub mod rand_fields;
pub mod report;
pub mod verify;

/// Version stamp written into file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
