//! Text syntax for schemas, instances, mappings, queries, NRC expressions
//! and migration directives.

pub mod ast;
pub mod elaborate;
pub mod lexer;
pub mod parser;
pub mod printer;

pub use ast::*;
pub use elaborate::{elaborate, instance_to_decl, ElabError, Workspace};
pub use parser::{parse, parse_nrc, parse_nrc_type, parse_query, parse_term, parse_type, ParseError};
pub use printer::print;
