//! Every Rust snippet in `book/src` runs as a doc test of this crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/sparse-correlation.md")]
pub mod sparse_correlation {}

#[doc = include_str!("../../../book/src/glasso.md")]
pub mod glasso {}

#[doc = include_str!("../../../book/src/partial-correlation.md")]
pub mod partial_correlation {}

#[doc = include_str!("../../../book/src/filtration.md")]
pub mod filtration {}

#[doc = include_str!("../../../book/src/benchmark.md")]
pub mod benchmark {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
