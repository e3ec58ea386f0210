//! Arithmetic grammar for data expressions:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'x' index | ('sin' | 'cos' | 'exp') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Coordinates are 1-based (`x1 .. xd`).

use super::expr::{Expr, ExprRef, Prim};
use super::FieldError;
use crate::scalar::Real;

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> FieldError {
        FieldError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), FieldError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn expr<T: Real>(&mut self) -> Result<ExprRef<T>, FieldError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = Expr::add(acc, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term<T: Real>(&mut self) -> Result<ExprRef<T>, FieldError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = Expr::product(acc, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let den = self.unary()?;
                    if den.as_const() == Some(T::zero()) {
                        self.pos = at;
                        return Err(self.err("division by literal zero"));
                    }
                    acc = Expr::quotient(acc, den);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary<T: Real>(&mut self) -> Result<ExprRef<T>, FieldError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::neg(self.unary()?));
        }
        if self.peek() == Some(b'+') {
            self.pos += 1;
            return self.unary();
        }
        self.primary()
    }

    fn primary<T: Real>(&mut self) -> Result<ExprRef<T>, FieldError> {
        let Some(c) = self.peek() else {
            return Err(self.err("unexpected end of input"));
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let word = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            let prim = match word {
                "sin" => Some(Prim::Sin),
                "cos" => Some(Prim::Cos),
                "exp" => Some(Prim::Exp),
                _ => None,
            };
            if let Some(prim) = prim {
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(Expr::apply(prim, arg));
            }
            if let Some(idx) = word.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                if idx == 0 || idx > self.dim {
                    self.pos = start;
                    return Err(self.err(format!("coordinate '{word}' outside x1..x{}", self.dim)));
                }
                return Ok(Expr::coord(idx - 1));
            }
            self.pos = start;
            return Err(self.err(format!("unknown symbol '{word}'")));
        }
        Err(self.err(format!("unexpected character '{}'", c as char)))
    }

    fn number<T: Real>(&mut self) -> Result<ExprRef<T>, FieldError> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| {
            let mut e = self.err(format!("malformed number '{text}'"));
            if let FieldError::Parse { position, .. } = &mut e {
                *position = start;
            }
            e
        })?;
        Ok(Expr::constant(T::lit(v)))
    }
}

/// Parses an expression in `d` coordinates; errors carry the byte offset.
pub fn parse_expr<T: Real>(src: &str, dim: usize) -> Result<ExprRef<T>, FieldError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = parse_expr::<f64>("1 + 2*x1 - x2/4 + sin(0)*3 - -1", 2).unwrap();
        assert_eq!(e.value(&[1.0, 2.0]), 1.0 + 2.0 - 0.5 + 1.0);
        let e = parse_expr::<f64>("exp(x1)*cos(x2)", 2).unwrap();
        assert!((e.value(&[0.5, 0.25]) - 0.5f64.exp() * 0.25f64.cos()).abs() < 1e-15);
        let e = parse_expr::<f64>("1.5e-1 * (x1 + 2)", 1).unwrap();
        assert!((e.value(&[1.0]) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn diagnostics_have_positions() {
        match parse_expr::<f64>("1 + foo(x1)", 2) {
            Err(FieldError::Parse { position, message }) => {
                assert_eq!(position, 4);
                assert!(message.contains("foo"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expr::<f64>("x3 + 1", 2) {
            Err(FieldError::Parse { position, .. }) => assert_eq!(position, 0),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr::<f64>("(x1 + 1", 2).is_err());
        assert!(parse_expr::<f64>("x1 2", 2).is_err());
        assert!(parse_expr::<f64>("x1 / 0", 2).is_err());
    }
}
