use crate::datamodel::Value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Lit(Value),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Semicolon,
    Star,
    Minus,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub fn syntax_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Split query text into tokens carrying 1-based line and column.
pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, line: &mut usize, col: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let (tok, len) = match two.as_str() {
            "<=" => (Tok::Le, 2),
            ">=" => (Tok::Ge, 2),
            "<>" | "!=" => (Tok::Ne, 2),
            _ => match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '[' => (Tok::LBracket, 1),
                ']' => (Tok::RBracket, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ':' => (Tok::Colon, 1),
                ',' => (Tok::Comma, 1),
                '.' => (Tok::Dot, 1),
                ';' => (Tok::Semicolon, 1),
                '*' => (Tok::Star, 1),
                '-' => (Tok::Minus, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '=' => (Tok::Eq, 1),
                '\'' | '"' => {
                    let quote = c;
                    let mut s = String::new();
                    let mut j = i + 1;
                    loop {
                        match chars.get(j) {
                            None => return Err(syntax_error(start_line, start_col, "unterminated string literal")),
                            Some('\\') if j + 1 < chars.len() => {
                                s.push(chars[j + 1]);
                                j += 2;
                            }
                            Some(&q) if q == quote => {
                                if chars.get(j + 1) == Some(&quote) {
                                    s.push(quote);
                                    j += 2;
                                } else {
                                    j += 1;
                                    break;
                                }
                            }
                            Some(&other) => {
                                s.push(other);
                                j += 1;
                            }
                        }
                    }
                    (Tok::Lit(Value::Str(s)), j - i)
                }
                '`' => {
                    let end = chars[i + 1..]
                        .iter()
                        .position(|&x| x == '`')
                        .ok_or_else(|| syntax_error(start_line, start_col, "unterminated quoted identifier"))?;
                    let s: String = chars[i + 1..i + 1 + end].iter().collect();
                    (Tok::Ident(s), end + 2)
                }
                d if d.is_ascii_digit() => {
                    let mut j = i;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let mut is_float = false;
                    if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                        is_float = true;
                        j += 1;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                    if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                        let mut k = j + 1;
                        if k < chars.len() && matches!(chars[k], '+' | '-') {
                            k += 1;
                        }
                        if k < chars.len() && chars[k].is_ascii_digit() {
                            is_float = true;
                            j = k;
                            while j < chars.len() && chars[j].is_ascii_digit() {
                                j += 1;
                            }
                        }
                    }
                    let text: String = chars[i..j].iter().collect();
                    let value = if is_float {
                        Value::Float(text.parse().map_err(|_| syntax_error(line, col, "bad number"))?)
                    } else {
                        Value::Int(
                            text.parse()
                                .map_err(|_| syntax_error(start_line, start_col, "integer out of range"))?,
                        )
                    };
                    (Tok::Lit(value), j - i)
                }
                a if a.is_alphabetic() || a == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    (Tok::Ident(chars[i..j].iter().collect()), j - i)
                }
                other => {
                    return Err(syntax_error(start_line, start_col, format!("unexpected character `{other}`")));
                }
            },
        };
        advance(len, &mut i, &mut line, &mut col);
        out.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    Ok(out)
}

/// Cursor over a token list with position-aware errors.
pub struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Cursor {
    pub fn new(text: &str) -> Result<Cursor> {
        let toks = tokenize(text)?;
        let lines: Vec<&str> = text.split('\n').collect();
        let end = (lines.len(), lines.last().map(|l| l.chars().count() + 1).unwrap_or(1));
        Ok(Cursor { toks, pos: 0, end })
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        let (line, column) = self
            .toks
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.end);
        syntax_error(line, column, message)
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(format!("expected {kw}")))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    /// A literal, allowing a leading minus on numbers.
    pub fn literal(&mut self) -> Result<Value> {
        let neg = self.eat(&Tok::Minus);
        match self.next() {
            Some(Tok::Lit(Value::Int(i))) if neg => Ok(Value::Int(-i)),
            Some(Tok::Lit(Value::Float(f))) if neg => Ok(Value::Float(-f)),
            Some(Tok::Lit(v)) if !neg => Ok(v),
            Some(Tok::Ident(s)) if !neg && s.eq_ignore_ascii_case("true") => Ok(Value::Bool(true)),
            Some(Tok::Ident(s)) if !neg && s.eq_ignore_ascii_case("false") => Ok(Value::Bool(false)),
            Some(Tok::Ident(s)) if !neg && s.eq_ignore_ascii_case("null") => Ok(Value::Null),
            _ => {
                self.pos -= 1;
                Err(self.error("expected a literal"))
            }
        }
    }

    pub fn starts_literal(&self) -> bool {
        match self.peek() {
            Some(Tok::Lit(_)) => true,
            Some(Tok::Minus) => matches!(self.peek_at(1), Some(Tok::Lit(Value::Int(_) | Value::Float(_)))),
            Some(Tok::Ident(s)) => {
                ["true", "false", "null"].iter().any(|k| s.eq_ignore_ascii_case(k))
                    && !matches!(self.peek_at(1), Some(Tok::Dot | Tok::LParen))
            }
            _ => false,
        }
    }

    pub fn comparator(&mut self) -> Result<crate::algebra::CmpOp> {
        use crate::algebra::CmpOp;
        let op = match self.peek() {
            Some(Tok::Eq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            _ => return Err(self.error("expected a comparison operator")),
        };
        self.pos += 1;
        Ok(op)
    }
}
