//! Hand-rolled lexer shared by the component and diagram grammars.
//!
//! `#` starts a comment that runs to the end of the line. Names may contain
//! slashes and dots after the first character so that flattened position
//! names round-trip through exported files.

use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Name(String),
    Int(u64),
    Real(f64),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Eq,
    Arrow,
    Oplus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Real(x) => write!(f, "`{x}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Oplus => write!(f, "`(+)`"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '/' || c == '.'
}

pub fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let n = chars.len();

    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            toks.push(Token { tok: $tok, line: $l, col: $c })
        };
    }

    while i < n {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < n && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        match c {
            '{' => {
                push!(Tok::LBrace, tl, tc);
                i += 1;
                col += 1;
            }
            '}' => {
                push!(Tok::RBrace, tl, tc);
                i += 1;
                col += 1;
            }
            '[' => {
                push!(Tok::LBracket, tl, tc);
                i += 1;
                col += 1;
            }
            ']' => {
                push!(Tok::RBracket, tl, tc);
                i += 1;
                col += 1;
            }
            '(' => {
                if i + 2 < n && chars[i + 1] == '+' && chars[i + 2] == ')' {
                    push!(Tok::Oplus, tl, tc);
                    i += 3;
                    col += 3;
                } else {
                    push!(Tok::LParen, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            ')' => {
                push!(Tok::RParen, tl, tc);
                i += 1;
                col += 1;
            }
            ',' => {
                push!(Tok::Comma, tl, tc);
                i += 1;
                col += 1;
            }
            ';' => {
                push!(Tok::Semi, tl, tc);
                i += 1;
                col += 1;
            }
            ':' => {
                push!(Tok::Colon, tl, tc);
                i += 1;
                col += 1;
            }
            '=' => {
                push!(Tok::Eq, tl, tc);
                i += 1;
                col += 1;
            }
            '-' => {
                if i + 1 < n && chars[i + 1] == '>' {
                    push!(Tok::Arrow, tl, tc);
                    i += 2;
                    col += 2;
                } else if i + 1 < n && chars[i + 1].is_ascii_digit() {
                    let (tok, len) = lex_number(&chars[i..], tl, tc)?;
                    push!(tok, tl, tc);
                    i += len;
                    col += len;
                } else {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        expected: String::from("`->` or a number after `-`"),
                    });
                }
            }
            '"' => {
                let mut j = i + 1;
                while j < n && chars[j] != '"' && chars[j] != '\n' {
                    j += 1;
                }
                if j >= n || chars[j] != '"' {
                    return Err(ParseError::Syntax {
                        line: tl,
                        col: tc,
                        expected: String::from("a closing `\"`"),
                    });
                }
                let s: String = chars[i + 1..j].iter().collect();
                push!(Tok::Str(s), tl, tc);
                col += j + 1 - i;
                i = j + 1;
            }
            _ if c.is_ascii_digit() => {
                let (tok, len) = lex_number(&chars[i..], tl, tc)?;
                push!(tok, tl, tc);
                i += len;
                col += len;
            }
            _ if is_name_start(c) => {
                let mut j = i + 1;
                while j < n && is_name_char(chars[j]) {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                push!(Tok::Name(s), tl, tc);
                col += j - i;
                i = j;
            }
            _ => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    expected: format!("a token, found `{c}`"),
                });
            }
        }
    }
    Ok(toks)
}

/// Lexes a number starting at `chars[0]` (optionally signed). Pure digit
/// runs become `Int`, anything with a point or exponent becomes `Real`.
fn lex_number(chars: &[char], line: usize, col: usize) -> Result<(Tok, usize), ParseError> {
    let mut j = 0;
    if chars[j] == '-' {
        j += 1;
    }
    while j < chars.len() && chars[j].is_ascii_digit() {
        j += 1;
    }
    let mut is_real = false;
    if j < chars.len() && chars[j] == '.' && j + 1 < chars.len() && chars[j + 1].is_ascii_digit() {
        is_real = true;
        j += 1;
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
    }
    if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
        let mut k = j + 1;
        if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
            k += 1;
        }
        if k < chars.len() && chars[k].is_ascii_digit() {
            is_real = true;
            j = k;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
        }
    }
    let text: String = chars[..j].iter().collect();
    let bad = || ParseError::Syntax {
        line,
        col,
        expected: format!("a numeric literal, found `{text}`"),
    };
    if is_real || text.starts_with('-') {
        let x: f64 = text.parse().map_err(|_| bad())?;
        if is_real || x < 0.0 {
            return Ok((Tok::Real(x), j));
        }
    }
    let v: u64 = text.parse().map_err(|_| bad())?;
    Ok((Tok::Int(v), j))
}

/// A token stream with one-token lookahead helpers used by both parsers.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Cursor, ParseError> {
        let toks = lex(text)?;
        let (end_line, end_col) = match toks.last() {
            Some(t) => (t.line, t.col + 1),
            None => (1, 1),
        };
        Ok(Cursor { toks, pos: 0, end_line, end_col })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    /// Line and column of the current token, or just past the last one.
    pub fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.end_line, self.end_col),
        }
    }

    pub fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn err(&self, expected: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        let mut expected = expected.into();
        if let Some(t) = self.peek() {
            expected = format!("{expected}, found {t}");
        }
        ParseError::Syntax { line, col, expected }
    }

    pub fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(what)),
        }
    }

    /// Consumes the keyword `kw`, a bare name token with that spelling.
    pub fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Name(s)) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(format!("`{kw}`"))),
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        match self.peek() {
            Some(Tok::Name(s)) if s == kw => {
                self.bump();
                true
            }
            _ => false,
        }
    }

    pub fn expect_name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Name(_)) => match self.bump().map(|t| t.tok) {
                Some(Tok::Name(s)) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.err(what)),
        }
    }

    pub fn expect_int(&mut self, what: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Tok::Int(_)) => match self.bump().map(|t| t.tok) {
                Some(Tok::Int(v)) => Ok(v as usize),
                _ => unreachable!(),
            },
            _ => Err(self.err(what)),
        }
    }

    /// A real literal; plain integers are accepted and widened.
    pub fn expect_real(&mut self, what: &str) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Int(_)) | Some(Tok::Real(_)) => match self.bump().map(|t| t.tok) {
                Some(Tok::Int(v)) => Ok(v as f64),
                Some(Tok::Real(x)) => Ok(x),
                _ => unreachable!(),
            },
            _ => Err(self.err(what)),
        }
    }

    pub fn expect_str(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Str(_)) => match self.bump().map(|t| t.tok) {
                Some(Tok::Str(s)) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.err(what)),
        }
    }

    pub fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.err("end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_punctuation_and_oplus() {
        let toks = lex("a (+) b ; ( c )").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Name("a".into()),
                Tok::Oplus,
                Tok::Name("b".into()),
                Tok::Semi,
                Tok::LParen,
                Tok::Name("c".into()),
                Tok::RParen,
            ]
        );
    }

    #[test]
    fn lexes_numbers() {
        let toks = lex("3 0.25 1e-6 2.5E3").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![Tok::Int(3), Tok::Real(0.25), Tok::Real(1e-6), Tok::Real(2.5e3)]
        );
    }

    #[test]
    fn arrow_does_not_swallow_names() {
        let toks = lex("1 -> q0 2 -> exit 1").unwrap();
        assert_eq!(toks[1].tok, Tok::Arrow);
        assert_eq!(toks[2].tok, Tok::Name("q0".into()));
    }

    #[test]
    fn tracks_positions_across_lines_and_comments() {
        let toks = lex("a # rest is ignored\n  b").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }

    #[test]
    fn slash_names_round_trip() {
        let toks = lex("L/R/q0").unwrap();
        assert_eq!(toks[0].tok, Tok::Name("L/R/q0".into()));
    }

    #[test]
    fn rejects_unterminated_string() {
        assert!(matches!(
            lex("load \"oops"),
            Err(ParseError::Syntax { .. })
        ));
    }
}
