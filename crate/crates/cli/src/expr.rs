//! Small arithmetic expression parser for config files.
//!
//! Supports `+ - * / ^` (with the usual precedence, `^` right-associative),
//! unary minus, parentheses, the constants `pi` and `e`, named variables,
//! and the functions sin, cos, tan, sinh, cosh, tanh, exp, ln, log, sqrt,
//! abs, sign, floor, ceil, min, max, pow.
//!
//! An expression is parsed once against a fixed variable list and can then
//! be evaluated many times.

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    Ident(usize, usize), // byte range into the source
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                toks.push(Tok::Star);
                i += 1;
            }
            '/' => {
                toks.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                toks.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit() || bytes[i] == b'.' || bytes[i] == b'e'
                        || bytes[i] == b'E'
                        || ((bytes[i] == b'+' || bytes[i] == b'-')
                            && i > start
                            && (bytes[i - 1] == b'e' || bytes[i - 1] == b'E')))
                {
                    i += 1;
                }
                let text = &src[start..i];
                toks.push(Tok::Num(text.parse().map_err(|_| {
                    anyhow!("invalid number '{text}' at byte {start} in '{src}'")
                })?));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push(Tok::Ident(start, i));
            }
            _ => bail!("unexpected character '{c}' at byte {i} in '{src}'"),
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fn1 {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Floor,
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fn2 {
    Min,
    Max,
    Pow,
}

/// Parsed expression over a fixed list of variables.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call1(Fn1, Box<Expr>),
    Call2(Fn2, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, b) => a.eval(vars).powf(b.eval(vars)),
            Expr::Call1(f, a) => {
                let v = a.eval(vars);
                match f {
                    Fn1::Sin => v.sin(),
                    Fn1::Cos => v.cos(),
                    Fn1::Tan => v.tan(),
                    Fn1::Sinh => v.sinh(),
                    Fn1::Cosh => v.cosh(),
                    Fn1::Tanh => v.tanh(),
                    Fn1::Exp => v.exp(),
                    Fn1::Ln => v.ln(),
                    Fn1::Sqrt => v.sqrt(),
                    Fn1::Abs => v.abs(),
                    Fn1::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Fn1::Floor => v.floor(),
                    Fn1::Ceil => v.ceil(),
                }
            }
            Expr::Call2(f, a, b) => {
                let (x, y) = (a.eval(vars), b.eval(vars));
                match f {
                    Fn2::Min => x.min(y),
                    Fn2::Max => x.max(y),
                    Fn2::Pow => x.powf(y),
                }
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<Tok> {
        self.toks.get(self.pos).copied()
    }

    fn advance(&mut self) -> Option<Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        match self.advance() {
            Some(t) if t == tok => Ok(()),
            other => bail!("expected {what} in '{}', found {:?}", self.src, other),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.advance();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.advance();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.advance();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.advance();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(Tok::Minus) {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(Tok::Caret) {
            self.advance();
            // Right-associative; unary binds tighter on the exponent side.
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.advance() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "closing parenthesis")?;
                Ok(e)
            }
            Some(Tok::Ident(a, b)) => {
                let name = &self.src[a..b];
                if self.peek() == Some(Tok::LParen) {
                    self.advance();
                    self.call(name)
                } else {
                    match name {
                        "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                        "e" => Ok(Expr::Num(std::f64::consts::E)),
                        _ => self
                            .vars
                            .iter()
                            .position(|v| *v == name)
                            .map(Expr::Var)
                            .ok_or_else(|| {
                                anyhow!(
                                    "unknown identifier '{name}' in '{}' (variables: {:?})",
                                    self.src,
                                    self.vars
                                )
                            }),
                    }
                }
            }
            other => bail!("unexpected token {:?} in '{}'", other, self.src),
        }
    }

    fn call(&mut self, name: &str) -> Result<Expr> {
        let one = |f: Fn1, a: Expr| Expr::Call1(f, Box::new(a));
        let f1 = match name {
            "sin" => Some(Fn1::Sin),
            "cos" => Some(Fn1::Cos),
            "tan" => Some(Fn1::Tan),
            "sinh" => Some(Fn1::Sinh),
            "cosh" => Some(Fn1::Cosh),
            "tanh" => Some(Fn1::Tanh),
            "exp" => Some(Fn1::Exp),
            "ln" | "log" => Some(Fn1::Ln),
            "sqrt" => Some(Fn1::Sqrt),
            "abs" => Some(Fn1::Abs),
            "sign" => Some(Fn1::Sign),
            "floor" => Some(Fn1::Floor),
            "ceil" => Some(Fn1::Ceil),
            _ => None,
        };
        if let Some(f) = f1 {
            let a = self.expr()?;
            self.expect(Tok::RParen, "closing parenthesis")?;
            return Ok(one(f, a));
        }
        let f2 = match name {
            "min" => Fn2::Min,
            "max" => Fn2::Max,
            "pow" => Fn2::Pow,
            _ => bail!("unknown function '{name}' in '{}'", self.src),
        };
        let a = self.expr()?;
        self.expect(Tok::Comma, "comma between arguments")?;
        let b = self.expr()?;
        self.expect(Tok::RParen, "closing parenthesis")?;
        Ok(Expr::Call2(f2, Box::new(a), Box::new(b)))
    }
}

/// Parse `src` with the given variable names.
pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        bail!("trailing input after position {} in '{}'", p.pos, src);
    }
    Ok(e)
}

/// Parse an expression of the single variable x.
pub fn parse_x(src: &str) -> Result<Expr> {
    parse(src, &["x"])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        parse_x(src).unwrap().eval(&[x])
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2*3", 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0), 9.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0); // right-associative
        assert_eq!(ev("-x^2", 2.0), -4.0);
        assert_eq!(ev("2 - -3", 0.0), 5.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((ev("1 + cos(pi*x)", 1.0) - 0.0).abs() < 1e-12);
        assert!((ev("exp(ln(5))", 0.0) - 5.0).abs() < 1e-12);
        assert_eq!(ev("min(3, x)", 1.0), 1.0);
        assert_eq!(ev("max(3, x)", 1.0), 3.0);
        assert_eq!(ev("pow(x, 3)", 2.0), 8.0);
        assert_eq!(ev("abs(-2.5)", 0.0), 2.5);
    }

    #[test]
    fn scientific_numbers() {
        assert_eq!(ev("1e-3", 0.0), 1e-3);
        assert_eq!(ev("2.5E+2", 0.0), 250.0);
    }

    #[test]
    fn multi_variable() {
        let e = parse("c*u - u*abs(u)", &["t", "x", "u", "c"]).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0, 2.0, 0.5]), 1.0 - 4.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_x("1 +").is_err());
        assert!(parse_x("foo(2)").is_err());
        assert!(parse_x("y + 1").is_err());
        assert!(parse_x("(1").is_err());
        assert!(parse_x("1 2").is_err());
    }
}
