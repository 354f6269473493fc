//! Problem-file language: lexer, parser, pretty-printer and lowering to
//! bundle, Lagrangian and rule sets.

mod ast;
mod error;
mod lexer;
mod lower;
mod parser;
mod print;

pub use ast::*;
pub use error::ParseError;
pub use lower::{decimal, lower, Background, JacobiSetup, OracleSetup, Problem, Variation};
pub use parser::{parse_expr, parse_problem, RESERVED};
pub use print::{print_expr, print_problem};

/// Parses and resolves a problem file.
pub fn load(source: &str, cap: Option<usize>) -> crate::Result<Problem> {
    lower(&parse_problem(source)?, cap)
}
