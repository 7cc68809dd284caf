//! The chapters of the guide in `book/src`, one module each, so that
//! `cargo test` runs their code blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/maps.md")]
pub mod maps {}
#[doc = include_str!("../../../book/src/action-sets.md")]
pub mod action_sets {}
#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}
#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/reference-map.md")]
pub mod reference_map {}
