// SPDX-License-Identifier: Apache-2.0

//! Mining review remarks out of version-control history.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! 1. [`ingest`] walks a git history plus a ticket-state log and splits every
//!    ticket into implementation and review commits. Each hunk of an
//!    implementation commit becomes a change-part record.
//! 2. [`remarks`] turns review-commit hunks into remarks and traces every
//!    remark back to the implementation change parts that may have triggered
//!    it, widening the search scope ([`scope`]) when nothing is found.
//!    [`szz`] runs plain blame-style tracing for comparison.
//! 3. [`features`] computes the per-record feature catalog, including n-gram
//!    entropy features.
//! 4. [`rules`] evaluates `skip when … unless …` rulesets against the traced
//!    dataset and [`mining`] searches for Pareto-optimal rulesets.

pub mod content;
pub mod error;
pub mod features;
pub mod fixture;
pub mod git;
pub mod history;
pub mod ingest;
pub mod mining;
pub mod remarks;
pub mod rules;
pub mod scope;
pub mod szz;

pub use error::{Error, Result};
