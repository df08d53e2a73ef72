//! Lexing and parsing of a C subset into per-function syntax trees.

mod ast;
mod parser;
mod token;

pub use ast::*;
pub use parser::{parse_function, parse_unit, FrontendError, ParseError};
pub use token::{tokenize, LexError, Token, TokenKind, KEYWORDS};
