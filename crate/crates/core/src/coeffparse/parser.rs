//! Recursive-descent parser for the coefficient language.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := primary ("^" unary)?
//! primary := number | ident | ident "(" args ")" | "(" sum ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x1^2` is `-(x1^2)`; it is right
//! associative through the `unary` exponent.

use super::expr::{BinOp, Expr, Func};
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit
                .parse()
                .map_err(|_| ParseError::syntax(start, format!("malformed number '{lit}'")))?;
            out.push(Token { tok: Tok::Num(v), pos: start });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), pos: start });
        } else if "+-*/^(),".contains(c) {
            out.push(Token { tok: Tok::Sym(c), pos: start });
            i += 1;
        } else {
            return Err(ParseError::syntax(start, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

pub(crate) struct Parser {
    tokens: Vec<Token>,
    cursor: usize,
    dim: usize,
    end: usize,
}

impl Parser {
    pub(crate) fn new(text: &str, dim: usize) -> Result<Parser, ParseError> {
        Ok(Parser { tokens: lex(text)?, cursor: 0, dim, end: text.len() })
    }

    pub(crate) fn parse_all(mut self) -> Result<Expr, ParseError> {
        if self.tokens.is_empty() {
            return Err(ParseError::syntax(0, "empty expression"));
        }
        let e = self.sum()?;
        if let Some(t) = self.tokens.get(self.cursor) {
            return Err(ParseError::syntax(t.pos, format!("unexpected trailing token {:?}", t.tok)));
        }
        Ok(e)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.cursor).map_or(self.end, |t| t.pos)
    }

    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.cursor) {
            Some(Token { tok: Tok::Sym(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_sym() == Some(c) {
            self.cursor += 1;
            Ok(())
        } else {
            Err(ParseError::syntax(self.pos(), format!("expected '{c}'")))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c) = self.peek_sym() {
            let op = match c {
                '+' => BinOp::Add,
                '-' => BinOp::Sub,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek_sym() {
            let op = match c {
                '*' => BinOp::Mul,
                '/' => BinOp::Div,
                _ => break,
            };
            self.cursor += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_sym() {
            Some('-') => {
                self.cursor += 1;
                Ok(Expr::neg(self.unary()?))
            }
            Some('+') => {
                self.cursor += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek_sym() == Some('^') {
            self.cursor += 1;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(token) = self.tokens.get(self.cursor).cloned() else {
            return Err(ParseError::syntax(self.end, "unexpected end of expression"));
        };
        self.cursor += 1;
        match token.tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.sum()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Sym(c) => Err(ParseError::syntax(token.pos, format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                if self.peek_sym() == Some('(') {
                    self.cursor += 1;
                    self.call(&name, token.pos)
                } else {
                    self.identifier(&name, token.pos)
                }
            }
        }
    }

    fn identifier(&self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        match name {
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "N" => return Ok(Expr::Num(self.dim as f64)),
            _ => {}
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits
                    .parse()
                    .map_err(|_| ParseError::unknown(pos, name))?;
                if index == 0 || index > self.dim {
                    return Err(ParseError::out_of_range(pos, index, self.dim));
                }
                return Ok(Expr::Var(index - 1));
            }
        }
        Err(ParseError::unknown(pos, name))
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        if self.peek_sym() == Some(')') {
            self.cursor += 1;
            return Ok(args);
        }
        loop {
            args.push(self.sum()?);
            match self.peek_sym() {
                Some(',') => self.cursor += 1,
                Some(')') => {
                    self.cursor += 1;
                    return Ok(args);
                }
                _ => return Err(ParseError::syntax(self.pos(), "expected ',' or ')'")),
            }
        }
    }

    fn literal_arg(arg: &Expr, pos: usize, what: &str) -> Result<f64, ParseError> {
        match arg {
            Expr::Num(v) => Ok(*v),
            _ => Err(ParseError::syntax(pos, format!("{what} must be a numeric literal"))),
        }
    }

    fn call(&mut self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        if name == "norm" {
            match self.tokens.get(self.cursor) {
                Some(Token { tok: Tok::Ident(v), .. }) if v == "x" => self.cursor += 1,
                _ => return Err(ParseError::syntax(self.pos(), "norm takes the point 'x'")),
            }
            self.expect_sym(')')?;
            return Ok(Expr::Norm);
        }
        let args = self.args()?;
        let arity_err = |want: usize| {
            Err(ParseError::syntax(
                pos,
                format!("{name} takes {want} argument(s), got {}", args.len()),
            ))
        };
        if let Some(func) = Func::from_name(name) {
            if args.len() != func.arity() {
                return arity_err(func.arity());
            }
            return Ok(Expr::Call(func, args));
        }
        match name {
            "cutoff" | "cutoff_gradnorm" => {
                if args.len() != 1 {
                    return arity_err(1);
                }
                let scale = Self::literal_arg(&args[0], pos, "cutoff scale")?;
                if scale <= 0.0 {
                    return Err(ParseError::syntax(pos, "cutoff scale must be positive"));
                }
                Ok(if name == "cutoff" {
                    Expr::Cutoff { scale }
                } else {
                    Expr::CutoffGradNorm { scale }
                })
            }
            "cutoff_grad" => {
                if args.len() != 2 {
                    return arity_err(2);
                }
                let scale = Self::literal_arg(&args[0], pos, "cutoff scale")?;
                let axis = Self::literal_arg(&args[1], pos, "cutoff axis")?;
                if scale <= 0.0 {
                    return Err(ParseError::syntax(pos, "cutoff scale must be positive"));
                }
                if axis.fract() != 0.0 || axis < 1.0 {
                    return Err(ParseError::syntax(pos, "cutoff axis must be a positive integer"));
                }
                let axis = axis as usize;
                if axis > self.dim {
                    return Err(ParseError::out_of_range(pos, axis, self.dim));
                }
                Ok(Expr::CutoffGrad { scale, axis: axis - 1 })
            }
            "div" => {
                if args.len() != self.dim {
                    return arity_err(self.dim);
                }
                Ok(Expr::Divergence(args))
            }
            _ => Err(ParseError::unknown(pos, name)),
        }
    }
}
