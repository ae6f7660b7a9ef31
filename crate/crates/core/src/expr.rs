//! Arithmetic expressions in the index variable `n`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | "n" | func "(" expr ")" | "(" expr ")"
//! func  := floor | sqrt | cbrt | log | cos | exp
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-2^2`
//! is `-4`. Numeric literals are read as exact rationals.

use rug::{Integer, Rational};

use crate::error::Error;
use crate::real::{Floor, LogReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Floor,
    Sqrt,
    Cbrt,
    Log,
    Cos,
    Exp,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "floor" => Func::Floor,
            "sqrt" => Func::Sqrt,
            "cbrt" => Func::Cbrt,
            "log" => Func::Log,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(Rational),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    Domain(String),
    /// A `floor` argument straddled an integer at this precision.
    AmbiguousFloor,
}

impl Expr {
    /// Parses `text`; positions in errors are offset by `base`.
    pub fn parse(text: &str, base: usize) -> Result<Expr, Error> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
            base,
        };
        p.skip_ws();
        if p.at_end() {
            return Err(p.error("empty expression"));
        }
        let e = p.expr()?;
        p.skip_ws();
        if !p.at_end() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn uses_n(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_n(),
            Expr::Bin(_, a, b) => a.uses_n() || b.uses_n(),
        }
    }

    /// Evaluates at `n` in ball arithmetic. With `lenient_floor`, an
    /// ambiguous floor yields the midpoint's floor widened by one instead of
    /// an error.
    pub fn eval(&self, n: u64, prec: u32, lenient_floor: bool) -> Result<LogReal, EvalError> {
        use EvalError::Domain;
        Ok(match self {
            Expr::Num(r) => LogReal::from_rational(prec, r),
            Expr::Var => LogReal::from_integer(prec, &Integer::from(n)),
            Expr::Neg(e) => -e.eval(n, prec, lenient_floor)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(n, prec, lenient_floor)?;
                let y = b.eval(n, prec, lenient_floor)?;
                match op {
                    BinOp::Add => &x + &y,
                    BinOp::Sub => &x - &y,
                    BinOp::Mul => &x * &y,
                    BinOp::Div => x.div(&y).map_err(Domain)?,
                    BinOp::Pow => x.pow(&y).map_err(Domain)?,
                }
            }
            Expr::Call(f, e) => {
                let x = e.eval(n, prec, lenient_floor)?;
                match f {
                    Func::Floor => match x.floor() {
                        Floor::Exact(k) => LogReal::from_integer(prec, &k),
                        Floor::Ambiguous(k) if lenient_floor => {
                            let center = LogReal::from_integer(prec, &k);
                            let one = rug::Float::with_val(64, 1);
                            LogReal::from_parts(center.mid().clone(), &one)
                        }
                        Floor::Ambiguous(_) => return Err(EvalError::AmbiguousFloor),
                    },
                    Func::Sqrt => x.sqrt().map_err(Domain)?,
                    Func::Cbrt => x.cbrt(),
                    Func::Log => x.ln().map_err(Domain)?,
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp().map_err(Domain)?,
                }
            }
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.base + self.pos,
            msg: msg.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, Error> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, Error> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, Error> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                if name == "n" {
                    return Ok(Expr::Var);
                }
                let Some(func) = Func::from_name(name) else {
                    self.pos = start;
                    return Err(self.error(&format!("unknown identifier '{name}'")));
                };
                if !self.eat(b'(') {
                    return Err(self.error(&format!("expected '(' after {name}")));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, Error> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
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
                // `2e` is not an exponent; let the caller complain about `e`.
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match parse_decimal(text) {
            Some(r) => Ok(Expr::Num(r)),
            None => {
                self.pos = start;
                Err(self.error(&format!("malformed number '{text}'")))
            }
        }
    }
}

/// Reads a decimal literal (`12`, `0.693147`, `1.5e-3`) as an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num = Integer::from_str_radix(if digits.is_empty() { "0" } else { &digits }, 10).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let mut r = Rational::from(num);
    if scale >= 0 {
        r *= Integer::from(Integer::u_pow_u(10, scale as u32));
    } else {
        r /= Integer::from(Integer::u_pow_u(10, (-scale) as u32));
    }
    if neg {
        r = -r;
    }
    Some(r)
}
