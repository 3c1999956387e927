use std::sync::Arc;

use super::{Loc, ParseError};
use crate::bits::Bits;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    /// `$finish`, `$display`, ...
    System(String),
    Number {
        size: Option<u32>,
        value: Bits,
    },
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "**", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "~&", "~|", "~^", "^~", "+:",
    "-:", "(*", "*)", "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "?", ":", "(", ")", "[", "]", "{",
    "}", ",", ";", ".", "#", "@", "=",
];

pub fn tokenize(file: &Arc<str>, text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let loc_at = |line: u32, col: u32| Loc {
        file: file.clone(),
        line,
        col,
    };
    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            bump!(1);
            continue;
        }
        if text[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                bump!(1);
            }
            continue;
        }
        if text[i..].starts_with("/*") {
            let start = loc_at(line, col);
            bump!(2);
            loop {
                if i >= bytes.len() {
                    return Err(ParseError::Syntax {
                        loc: start,
                        message: "unterminated block comment".into(),
                    });
                }
                if text[i..].starts_with("*/") {
                    bump!(2);
                    break;
                }
                bump!(1);
            }
            continue;
        }
        let loc = loc_at(line, col);
        if c == b'`' {
            return Err(ParseError::Unsupported {
                loc,
                construct: "compiler directive".into(),
            });
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let start = i;
            bump!(1);
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                bump!(1);
            }
            let word = &text[start..i];
            let tok = if let Some(sys) = word.strip_prefix('$') {
                Tok::System(sys.to_string())
            } else {
                Tok::Ident(word.to_string())
            };
            out.push(Token { tok, loc });
            continue;
        }
        if c == b'"' {
            bump!(1);
            let mut s = String::new();
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(ParseError::Syntax {
                        loc,
                        message: "unterminated string".into(),
                    });
                }
                if bytes[i] == b'"' {
                    bump!(1);
                    break;
                }
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    let esc = bytes[i + 1];
                    s.push(match esc {
                        b'n' => '\n',
                        b't' => '\t',
                        other => other as char,
                    });
                    bump!(2);
                    continue;
                }
                s.push(bytes[i] as char);
                bump!(1);
            }
            out.push(Token { tok: Tok::Str(s), loc });
            continue;
        }
        if c.is_ascii_digit() || c == b'\'' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
                bump!(1);
            }
            let size_text = &text[start..i];
            // tolerate whitespace between size and base: `8 'hff`
            let mut j = i;
            while j < bytes.len() && bytes[j] == b' ' {
                j += 1;
            }
            if j < bytes.len() && bytes[j] == b'\'' && (size_text.is_empty() || j + 1 < bytes.len()) {
                bump!(j - i);
                bump!(1);
                if i < bytes.len() && (bytes[i] == b's' || bytes[i] == b'S') {
                    return Err(ParseError::Unsupported {
                        loc,
                        construct: "signed literal".into(),
                    });
                }
                let radix = match bytes.get(i).map(|b| b.to_ascii_lowercase()) {
                    Some(b'h') => 16,
                    Some(b'd') => 10,
                    Some(b'o') => 8,
                    Some(b'b') => 2,
                    _ => {
                        return Err(ParseError::Syntax {
                            loc,
                            message: "expected base after '\''".into(),
                        })
                    }
                };
                bump!(1);
                while i < bytes.len() && bytes[i] == b' ' {
                    bump!(1);
                }
                let dstart = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'?') {
                    bump!(1);
                }
                let digits: String = text[dstart..i].chars().filter(|&c| c != '_').collect();
                if digits
                    .chars()
                    .any(|c| matches!(c.to_ascii_lowercase(), 'x' | 'z' | '?'))
                {
                    return Err(ParseError::Unsupported {
                        loc,
                        construct: "x/z literal (only two-valued logic is simulated)".into(),
                    });
                }
                let size = if size_text.is_empty() {
                    None
                } else {
                    let s: u32 = size_text.replace('_', "").parse().map_err(|_| ParseError::Syntax {
                        loc: loc.clone(),
                        message: "bad literal size".into(),
                    })?;
                    if s == 0 {
                        return Err(ParseError::Syntax {
                            loc,
                            message: "literal size must be positive".into(),
                        });
                    }
                    Some(s)
                };
                let width = size.unwrap_or(32).max(1);
                let value = Bits::parse_radix(&digits, radix, width).ok_or_else(|| ParseError::Syntax {
                    loc: loc.clone(),
                    message: format!("bad digits `{digits}` for base {radix}"),
                })?;
                out.push(Token {
                    tok: Tok::Number { size, value },
                    loc,
                });
            } else {
                let digits = size_text.replace('_', "");
                // unsized decimal: at least 32 bits
                let need = (digits.len() as u32 * 4).max(32);
                let v = Bits::parse_radix(&digits, 10, need).unwrap();
                let used = (0..need).rev().find(|&b| v.bit(b)).map(|b| b + 1).unwrap_or(1);
                let value = v.resize(used.max(32));
                out.push(Token {
                    tok: Tok::Number { size: None, value },
                    loc,
                });
            }
            continue;
        }
        match PUNCTS.iter().find(|p| text[i..].starts_with(**p)) {
            Some(p) => {
                bump!(p.len());
                out.push(Token {
                    tok: Tok::Punct(p),
                    loc,
                });
            }
            None => {
                return Err(ParseError::Syntax {
                    loc,
                    message: format!("unexpected character `{}`", c as char),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        loc: loc_at(line, col),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(&Arc::from("t.v"), s)
            .unwrap()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn numbers_and_operators() {
        let t = toks("8'hFF + 3 <= a");
        assert_eq!(
            t[0],
            Tok::Number {
                size: Some(8),
                value: Bits::from_u64(255, 8)
            }
        );
        assert_eq!(t[1], Tok::Punct("+"));
        assert_eq!(t[3], Tok::Punct("<="));
    }

    #[test]
    fn x_literal_is_unsupported_with_location() {
        let err = tokenize(&Arc::from("t.v"), "assign y =\n  1'bx;").unwrap_err();
        match err {
            ParseError::Unsupported { loc, .. } => assert_eq!((loc.line, loc.col), (2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comments_are_skipped() {
        let t = toks("a // x\n /* y \n z */ b");
        assert_eq!(t.len(), 3);
    }
}
