//! Command-line driver support: the HTTP review API and the
//! `objectives eval` batch evaluator.

pub mod api;
pub mod objectives;
