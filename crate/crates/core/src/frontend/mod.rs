//! Verilog subset frontend: lexer, parser, AST and a canonical printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod printer;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use ast::ModuleAst;

/// Source position (1-based line and column).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Loc {
    pub file: Arc<str>,
    pub line: u32,
    pub col: u32,
}

impl Loc {
    pub fn new(file: &str, line: u32, col: u32) -> Self {
        Loc {
            file: Arc::from(file),
            line,
            col,
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("{loc}: unsupported construct: {construct}")]
    Unsupported { loc: Loc, construct: String },
    #[error("{loc}: module `{name}` defined more than once (first at {first})")]
    DuplicateModule { loc: Loc, name: String, first: Loc },
    #[error("{loc}: unknown module `{name}`")]
    UnknownModule { loc: Loc, name: String },
}

impl ParseError {
    pub fn loc(&self) -> &Loc {
        match self {
            ParseError::Syntax { loc, .. }
            | ParseError::Unsupported { loc, .. }
            | ParseError::DuplicateModule { loc, .. }
            | ParseError::UnknownModule { loc, .. } => loc,
        }
    }
}

/// A set of source files parsed together.
#[derive(Clone, Debug, Default)]
pub struct SourceUnit {
    pub files: Vec<(String, String)>,
}

impl SourceUnit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_text(path: &str, text: &str) -> Self {
        let mut u = Self::new();
        u.add(path, text);
        u
    }

    pub fn add(&mut self, path: &str, text: &str) {
        self.files.push((path.to_string(), text.to_string()));
    }
}

/// Parse one file's text into modules without cross-module checks.
pub fn parse_text(path: &str, text: &str) -> Result<Vec<ModuleAst>, ParseError> {
    let file: Arc<str> = Arc::from(path);
    let toks = lexer::tokenize(&file, text)?;
    parser::Parser::new(toks).parse_modules()
}

/// Parse every file of the unit and check that module names are unique and
/// every instantiated module is defined.
pub fn parse(unit: &SourceUnit) -> Result<Vec<ModuleAst>, ParseError> {
    let mut mods = Vec::new();
    for (path, text) in &unit.files {
        mods.extend(parse_text(path, text)?);
    }
    let mut seen: HashMap<&str, &Loc> = HashMap::new();
    for m in &mods {
        if let Some(first) = seen.insert(&m.name, &m.loc) {
            return Err(ParseError::DuplicateModule {
                loc: m.loc.clone(),
                name: m.name.clone(),
                first: first.clone(),
            });
        }
    }
    for m in &mods {
        for item in &m.items {
            if let ast::Item::Instance(inst) = item {
                if !seen.contains_key(inst.module.as_str()) {
                    return Err(ParseError::UnknownModule {
                        loc: inst.loc.clone(),
                        name: inst.module.clone(),
                    });
                }
            }
        }
    }
    Ok(mods)
}
