//! Example-driven repair of SQL queries.
//!
//! A problem is a set of source/destination table pairs. A query is correct
//! when it maps every source onto its destination. [`eval::triage`] decides
//! correctness, [`rewrite`] applies rule-based fixes, and [`synth`] searches
//! for WHERE-clause edits over finite domains.

pub mod classify;
pub mod eval;
pub mod harness;
pub mod pipeline;
pub mod query;
pub mod rewrite;
pub mod synth;
pub mod table;

#[cfg(test)]
mod fixtures;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/queries.md")]
    mod queries {}
    #[doc = include_str!("../../../book/src/triage.md")]
    mod triage {}
    #[doc = include_str!("../../../book/src/rewrites.md")]
    mod rewrites {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/practice.md")]
    mod practice {}
}
