//! Minimal S-expression reader for the SMT-LIB2 command stream.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

impl SExp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            SExp::Atom(s) => Some(s),
            SExp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExp]> {
        match self {
            SExp::Atom(_) => None,
            SExp::List(items) => Some(items),
        }
    }
}

impl fmt::Display for SExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExp::Atom(s) => write!(f, "{s}"),
            SExp::List(items) => {
                write!(f, "(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{it}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Incremental reader: feed text, pull complete top-level expressions.
#[derive(Default)]
pub struct Reader {
    buf: String,
}

impl Reader {
    pub fn new() -> Self {
        Reader::default()
    }

    pub fn push_line(&mut self, line: &str) {
        self.buf.push_str(line);
        self.buf.push('\n');
    }

    /// Pops the next complete S-expression, if the buffer holds one.
    pub fn next_sexp(&mut self) -> Result<Option<SExp>, String> {
        let mut lexer = Lexer::new(&self.buf);
        match parse_sexp(&mut lexer)? {
            Some(sexp) => {
                let consumed = lexer.pos;
                self.buf.drain(..consumed);
                Ok(Some(sexp))
            }
            None => Ok(None),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

#[derive(Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Atom(String),
    /// End of currently buffered input (more may arrive later).
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn skip_trivia(&mut self) {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b';' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn next_tok(&mut self) -> Result<Tok, String> {
        self.skip_trivia();
        if self.pos >= self.bytes.len() {
            return Ok(Tok::Eof);
        }
        let b = self.bytes[self.pos];
        match b {
            b'(' => {
                self.pos += 1;
                Ok(Tok::LParen)
            }
            b')' => {
                self.pos += 1;
                Ok(Tok::RParen)
            }
            b'"' => {
                // String literal; quotes kept so the atom is recognizable.
                let start = self.pos;
                self.pos += 1;
                loop {
                    if self.pos >= self.bytes.len() {
                        return Ok(Tok::Eof); // incomplete string, wait for more input
                    }
                    if self.bytes[self.pos] == b'"' {
                        if self.pos + 1 < self.bytes.len() && self.bytes[self.pos + 1] == b'"' {
                            self.pos += 2;
                            continue;
                        }
                        self.pos += 1;
                        break;
                    }
                    self.pos += 1;
                }
                Ok(Tok::Atom(self.src[start..self.pos].to_string()))
            }
            b'|' => {
                let start = self.pos;
                self.pos += 1;
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'|' {
                    self.pos += 1;
                }
                if self.pos >= self.bytes.len() {
                    return Ok(Tok::Eof);
                }
                self.pos += 1;
                Ok(Tok::Atom(self.src[start..self.pos].to_string()))
            }
            _ => {
                let start = self.pos;
                while self.pos < self.bytes.len() {
                    let c = self.bytes[self.pos];
                    if c.is_ascii_whitespace() || c == b'(' || c == b')' || c == b';' {
                        break;
                    }
                    self.pos += 1;
                }
                Ok(Tok::Atom(self.src[start..self.pos].to_string()))
            }
        }
    }
}

/// Parses one S-expression; returns None if the buffered input is incomplete.
fn parse_sexp(lexer: &mut Lexer) -> Result<Option<SExp>, String> {
    let mut stack: Vec<Vec<SExp>> = Vec::new();
    loop {
        let save = lexer.pos;
        match lexer.next_tok()? {
            Tok::Eof => {
                // A bare top-level atom at end of buffer could still be a
                // prefix of a longer atom, so only emit complete lists.
                let _ = save;
                return Ok(None);
            }
            Tok::LParen => stack.push(Vec::new()),
            Tok::RParen => {
                let items = stack.pop().ok_or("unbalanced ')'")?;
                let sexp = SExp::List(items);
                match stack.last_mut() {
                    Some(top) => top.push(sexp),
                    None => return Ok(Some(sexp)),
                }
            }
            Tok::Atom(a) => {
                let sexp = SExp::Atom(a);
                match stack.last_mut() {
                    Some(top) => top.push(sexp),
                    None => {
                        // A top-level atom is complete only if followed by
                        // trivia plus more input (otherwise wait).
                        return Ok(Some(sexp));
                    }
                }
            }
        }
    }
}
