use std::fmt;

use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    DotDot,
    Star,
    Minus,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Ident(String),
    /// Backtick-quoted; never a keyword.
    QuotedIdent(String),
    Str(String),
    Int(u64),
    Float(f64),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::LParen => "'('",
            Tok::RParen => "')'",
            Tok::LBracket => "'['",
            Tok::RBracket => "']'",
            Tok::LBrace => "'{'",
            Tok::RBrace => "'}'",
            Tok::Colon => "':'",
            Tok::Comma => "','",
            Tok::Dot => "'.'",
            Tok::DotDot => "'..'",
            Tok::Star => "'*'",
            Tok::Minus => "'-'",
            Tok::Eq => "'='",
            Tok::Ne => "'<>'",
            Tok::Lt => "'<'",
            Tok::Le => "'<='",
            Tok::Gt => "'>'",
            Tok::Ge => "'>='",
            Tok::Ident(s) => return write!(f, "identifier {s}"),
            Tok::QuotedIdent(s) => return write!(f, "identifier `{s}`"),
            Tok::Str(s) => return write!(f, "string {s:?}"),
            Tok::Int(v) => return write!(f, "integer {v}"),
            Tok::Float(v) => return write!(f, "number {v:?}"),
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, expected: &[&str], found: String| SyntaxError {
        line,
        column,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        let next = chars.get(i + 1).copied();
        let simple = match (c, next) {
            ('<', Some('=')) => Some((Tok::Le, 2)),
            ('<', Some('>')) => Some((Tok::Ne, 2)),
            ('>', Some('=')) => Some((Tok::Ge, 2)),
            ('.', Some('.')) => Some((Tok::DotDot, 2)),
            ('(', _) => Some((Tok::LParen, 1)),
            (')', _) => Some((Tok::RParen, 1)),
            ('[', _) => Some((Tok::LBracket, 1)),
            (']', _) => Some((Tok::RBracket, 1)),
            ('{', _) => Some((Tok::LBrace, 1)),
            ('}', _) => Some((Tok::RBrace, 1)),
            (':', _) => Some((Tok::Colon, 1)),
            (',', _) => Some((Tok::Comma, 1)),
            ('.', _) => Some((Tok::Dot, 1)),
            ('*', _) => Some((Tok::Star, 1)),
            ('-', _) => Some((Tok::Minus, 1)),
            ('=', _) => Some((Tok::Eq, 1)),
            ('<', _) => Some((Tok::Lt, 1)),
            ('>', _) => Some((Tok::Gt, 1)),
            _ => None,
        };
        if let Some((tok, n)) = simple {
            advance(n, &mut i);
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c == '\'' || c == '"' || c == '`' {
            let mut j = i + 1;
            let mut value = String::new();
            let mut closed = false;
            while j < chars.len() {
                match chars[j] {
                    '\\' if c != '`' => {
                        let escaped = match chars.get(j + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('r') => '\r',
                            Some(other) => *other,
                            None => break,
                        };
                        value.push(escaped);
                        j += 2;
                    }
                    q if q == c => {
                        closed = true;
                        j += 1;
                        break;
                    }
                    other => {
                        value.push(other);
                        j += 1;
                    }
                }
            }
            if !closed {
                return Err(err(
                    start_line,
                    start_col,
                    &["closing quote"],
                    "end of input".into(),
                ));
            }
            advance(j - i, &mut i);
            let tok = if c == '`' {
                Tok::QuotedIdent(value)
            } else {
                Tok::Str(value)
            };
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let mut float = false;
            if chars.get(j) == Some(&'.') && chars.get(j + 1).is_some_and(char::is_ascii_digit) {
                float = true;
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if matches!(chars.get(j), Some('e' | 'E')) {
                let mut k = j + 1;
                if matches!(chars.get(k), Some('+' | '-')) {
                    k += 1;
                }
                if chars.get(k).is_some_and(char::is_ascii_digit) {
                    float = true;
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let text: String = chars[i..j].iter().collect();
            let tok =
                if float {
                    Tok::Float(
                        text.parse()
                            .map_err(|_| err(start_line, start_col, &["number"], text.clone()))?,
                    )
                } else {
                    Tok::Int(text.parse().map_err(|_| {
                        err(start_line, start_col, &["integer in range"], text.clone())
                    })?)
                };
            advance(j - i, &mut i);
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            advance(j - i, &mut i);
            out.push(Token {
                tok: Tok::Ident(text),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        return Err(err(start_line, start_col, &["token"], format!("{c:?}")));
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}
