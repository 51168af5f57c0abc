//! Compiles stratified Datalog with negation, built-ins and aggregates into
//! non-recursive SQL and evaluates it to fixpoint inside a relational
//! database.

pub mod analysis;
pub mod ast;
pub mod backend;
pub mod check;
pub mod directives;
pub mod engine;
pub mod error;
pub mod parser;
pub mod sql;

pub use error::{Diagnostic, Error, Result};
