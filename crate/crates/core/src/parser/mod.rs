//! Parsers for program text and for directive files.

mod directives;
mod lexer;
mod program;

use crate::ast::Program;
use crate::check::check_program;
use crate::directives::DirectiveSet;
use crate::error::Diagnostic;

pub use lexer::{tokenize, Tok, Token};

/// Parses a program and runs the arity and safety checks.
pub fn parse_program(text: &str) -> Result<Program, Vec<Diagnostic>> {
    let program = parse_program_unchecked(text)?;
    check_program(&program)?;
    Ok(program)
}

/// Parses a program without semantic checks. Callers that override `maxint`
/// run [`check_program`] themselves afterwards.
pub fn parse_program_unchecked(text: &str) -> Result<Program, Vec<Diagnostic>> {
    program::ProgramParser::new(text)
        .and_then(|p| p.parse())
        .map_err(|d| vec![d])
}

pub fn parse_directives(text: &str) -> Result<DirectiveSet, Vec<Diagnostic>> {
    directives::DirectiveParser::new(text).parse().map_err(|d| vec![d])
}
