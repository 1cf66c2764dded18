//! Checkers for weak memory models under fair scheduling.
//!
//! Programs are parsed into per-thread transition systems ([`ir`]), run
//! against declarative models ([`consistency`], [`enumerate`]) and
//! operational machines ([`operational`]), and the two views are linked by
//! trace/graph conversions ([`correspondence`]). [`termination`] and
//! [`robustness`] build on the enumeration.

pub mod consistency;
pub mod corpus;
pub mod correspondence;
pub mod enumerate;
pub mod error;
pub mod graph;
pub mod ir;
pub mod operational;
pub mod robustness;
pub mod termination;

pub use consistency::ModelId;
pub use error::{Error, Result};
