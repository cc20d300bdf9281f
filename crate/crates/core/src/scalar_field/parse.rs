//! Recursive-descent parser for the scalar expression language.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?          (right-associative)
//! primary := number | "pi" | var | func "(" expr ")" | "(" expr ")"
//! var     := "x" digit+                    (1-based, at most n)
//! func    := sin | cos | tan | exp | log | sqrt | sinh | cosh | neg
//! number  := digit+ ("." digit*)? (("e" | "E") ("+" | "-")? digit+)?
//! ```

use super::{BinaryOp, Func, Node};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable x{index} out of range (n = {n})")]
    VariableOutOfRange { index: usize, n: usize },
    #[error("constant subexpression outside its domain: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Token, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            let start = self.pos;
            let Some(&c) = self.bytes.get(self.pos) else {
                out.push((Token::End, start));
                return Ok(out);
            };
            let tok = match c {
                b'+' => Token::Plus,
                b'-' => Token::Minus,
                b'*' => Token::Star,
                b'/' => Token::Slash,
                b'^' => Token::Caret,
                b'(' => Token::LParen,
                b')' => Token::RParen,
                b'0'..=b'9' | b'.' => {
                    let t = self.number()?;
                    out.push((t, start));
                    continue;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    while self.pos < self.bytes.len()
                        && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    out.push((Token::Ident(self.src[start..self.pos].to_string()), start));
                    continue;
                }
                other => {
                    return Err(ParseError {
                        kind: ParseErrorKind::Syntax(format!("unexpected character `{}`", other as char)),
                        position: start,
                    })
                }
            };
            self.pos += 1;
            out.push((tok, start));
        }
    }

    fn number(&mut self) -> Result<Token, ParseError> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.pos < lx.bytes.len() && lx.bytes[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut count = digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(ParseError {
                kind: ParseErrorKind::Syntax("malformed number".into()),
                position: start,
            });
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax("malformed exponent".into()),
                    position: save,
                });
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Token::Number).map_err(|_| ParseError {
            kind: ParseErrorKind::Syntax(format!("malformed number `{text}`")),
            position: start,
        })
    }
}

pub(super) struct Parser {
    tokens: Vec<(Token, usize)>,
    idx: usize,
    n: usize,
}

impl Parser {
    pub(super) fn parse(text: &str, n: usize) -> Result<Node, ParseError> {
        let tokens = Lexer::new(text).tokens()?;
        let mut p = Parser { tokens, idx: 0, n };
        let node = p.expr()?;
        match p.peek() {
            Token::End => Ok(node),
            other => Err(p.syntax(format!("unexpected token {other:?}"))),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.idx].0
    }

    fn position(&self) -> usize {
        self.tokens[self.idx].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.idx].0.clone();
        if self.idx + 1 < self.tokens.len() {
            self.idx += 1;
        }
        t
    }

    fn syntax(&self, msg: String) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax(msg),
            position: self.position(),
        }
    }

    fn fold(&self, node: Node, position: usize) -> Result<Node, ParseError> {
        node.folded().map_err(|msg| ParseError {
            kind: ParseErrorKind::Domain(msg),
            position,
        })
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinaryOp::Add,
                Token::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.position();
            self.bump();
            let rhs = self.term()?;
            lhs = self.fold(Node::Binary(op, Box::new(lhs), Box::new(rhs)), pos)?;
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinaryOp::Mul,
                Token::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.position();
            self.bump();
            let rhs = self.unary()?;
            lhs = self.fold(Node::Binary(op, Box::new(lhs), Box::new(rhs)), pos)?;
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if *self.peek() == Token::Minus {
            let pos = self.position();
            self.bump();
            let inner = self.unary()?;
            return self.fold(Node::Neg(Box::new(inner)), pos);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Token::Caret {
            let pos = self.position();
            self.bump();
            let exponent = self.unary()?;
            return self.fold(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)), pos);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let pos = self.position();
        match self.bump() {
            Token::Number(v) => Ok(Node::Const(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => self.identifier(name, pos),
            Token::End => Err(ParseError {
                kind: ParseErrorKind::Syntax("unexpected end of input".into()),
                position: pos,
            }),
            other => Err(ParseError {
                kind: ParseErrorKind::Syntax(format!("unexpected token {other:?}")),
                position: pos,
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Token::RParen => {
                self.bump();
                Ok(())
            }
            _ => Err(self.syntax("expected `)`".into())),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Node, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            if *self.peek() != Token::LParen {
                return Err(self.syntax(format!("expected `(` after `{name}`")));
            }
            self.bump();
            let arg = self.expr()?;
            self.expect_rparen()?;
            let node = match func {
                Func::Neg => Node::Neg(Box::new(arg)),
                f => Node::Func(f, Box::new(arg)),
            };
            return self.fold(node, pos);
        }
        if name == "pi" {
            return Ok(Node::Const(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                    position: pos,
                })?;
                if index == 0 || index > self.n {
                    return Err(ParseError {
                        kind: ParseErrorKind::VariableOutOfRange { index, n: self.n },
                        position: pos,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        Err(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name),
            position: pos,
        })
    }
}
