//! Recursive-descent parser for the expression grammar in the module docs.

use super::{BinOp, Expr, Func, ParseError, VarSet};

pub fn parse(text: &str, vars: &VarSet) -> Result<Expr, ParseError> {
    let mut p = Parser { text: text.as_bytes(), pos: 0, vars };
    p.skip_ws();
    if p.at_end() {
        return Err(p.syntax("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    vars: &'a VarSet,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.into() }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut node = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                node = Expr::Bin(BinOp::Add, Box::new(node), Box::new(self.term()?));
            } else if self.eat(b'-') {
                node = Expr::Bin(BinOp::Sub, Box::new(node), Box::new(self.term()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut node = self.unary()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                node = Expr::Bin(BinOp::Mul, Box::new(node), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                node = Expr::Bin(BinOp::Div, Box::new(node), Box::new(self.unary()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.eat(b'^') {
            // Right-associative; the exponent may carry a unary minus.
            let exp = self.unary()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.syntax(format!("unexpected character `{}`", c as char))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.eat(b'.') {
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            // Exponent only with an explicit digit sequence after it.
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        s.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("bad number `{s}`") })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.text[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let Some(func) = Func::from_name(&name) else {
                return Err(ParseError::UnknownIdentifier { offset: start, name });
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            loop {
                self.skip_ws();
                if self.eat(b',') {
                    args.push(self.expr()?);
                } else {
                    break;
                }
            }
            if !self.eat(b')') {
                return Err(self.syntax("expected `)` after function argument"));
            }
            if args.len() != 1 {
                return Err(ParseError::Arity {
                    offset: start,
                    name,
                    expected: 1,
                    got: args.len(),
                });
            }
            Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
        } else {
            match self.vars.index_of(&name) {
                Some(k) => Ok(Expr::Var(k)),
                None => Err(ParseError::UnknownIdentifier { offset: start, name }),
            }
        }
    }
}
