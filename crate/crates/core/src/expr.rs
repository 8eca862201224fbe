//! Closed-form scalar expressions used to define potentials and densities in
//! configuration files.
//!
//! The grammar is deliberately small: numbers, named parameters, the
//! coordinate variables of a model space, `+ - * /`, integer powers `^n`,
//! and the functions `sin`, `cos` and `exp`. Expressions can be
//! differentiated symbolically, which is how analytic gradients and Hessians
//! of a potential are obtained.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Parses `src` with the given variable names and parameter bindings.
    pub fn parse(src: &str, vars: &[&str], params: &HashMap<String, f64>) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
            params,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "unexpected trailing input in expression {src:?}"
            )));
        }
        Ok(e.simplify())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, n) => a.eval(x).powi(*n),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        use Expr::*;
        let d = match self {
            Const(_) => Const(0.0),
            Var(i) => Const(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(Box::new(a.diff(var))),
            Add(a, b) => Add(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Sub(a, b) => Sub(Box::new(a.diff(var)), Box::new(b.diff(var))),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.diff(var)), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.diff(var)))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.diff(var)), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.diff(var)))),
                )),
                Box::new(Pow(b.clone(), 2)),
            ),
            Pow(a, n) => Mul(
                Box::new(Mul(Box::new(Const(*n as f64)), Box::new(Pow(a.clone(), n - 1)))),
                Box::new(a.diff(var)),
            ),
            Sin(a) => Mul(Box::new(Cos(a.clone())), Box::new(a.diff(var))),
            Cos(a) => Neg(Box::new(Mul(Box::new(Sin(a.clone())), Box::new(a.diff(var))))),
            Exp(a) => Mul(Box::new(Exp(a.clone())), Box::new(a.diff(var))),
        };
        d.simplify()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn simplify(self) -> Expr {
        use Expr::*;
        match self {
            Neg(a) => match a.simplify() {
                Const(c) => Const(-c),
                Neg(b) => *b,
                a => Neg(Box::new(a)),
            },
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Const(x), Const(y)) => Const(x + y),
                (Const(z), e) | (e, Const(z)) if z == 0.0 => e,
                (a, b) => Add(Box::new(a), Box::new(b)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Const(x), Const(y)) => Const(x - y),
                (e, Const(z)) if z == 0.0 => e,
                (Const(z), e) if z == 0.0 => Neg(Box::new(e)).simplify(),
                (a, b) => Sub(Box::new(a), Box::new(b)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Const(x), Const(y)) => Const(x * y),
                (Const(z), _) | (_, Const(z)) if z == 0.0 => Const(0.0),
                (Const(o), e) | (e, Const(o)) if o == 1.0 => e,
                (a, b) => Mul(Box::new(a), Box::new(b)),
            },
            Div(a, b) => match (a.simplify(), b.simplify()) {
                (Const(x), Const(y)) => Const(x / y),
                (Const(z), _) if z == 0.0 => Const(0.0),
                (e, Const(o)) if o == 1.0 => e,
                (a, b) => Div(Box::new(a), Box::new(b)),
            },
            Pow(a, n) => match (a.simplify(), n) {
                (_, 0) => Const(1.0),
                (e, 1) => e,
                (Const(c), n) => Const(c.powi(n)),
                (e, n) => Pow(Box::new(e), n),
            },
            Sin(a) => match a.simplify() {
                Const(c) => Const(c.sin()),
                e => Sin(Box::new(e)),
            },
            Cos(a) => match a.simplify() {
                Const(c) => Const(c.cos()),
                e => Cos(Box::new(e)),
            },
            Exp(a) => match a.simplify() {
                Const(c) => Const(c.exp()),
                e => Exp(Box::new(e)),
            },
            e => e,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "v{i}"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/({b})"),
            Expr::Pow(a, n) => write!(f, "({a})^{n}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number {s:?} in expression")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Config(format!(
                "character {c:?} not allowed in expression {src:?}"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a [&'a str],
    params: &'a HashMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_op('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_op('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat_op('^') {
            let neg = self.eat_op('-');
            match self.tokens.get(self.pos).cloned() {
                Some(Token::Num(v)) if v.fract() == 0.0 && v.abs() < 64.0 => {
                    self.pos += 1;
                    let n = if neg { -(v as i32) } else { v as i32 };
                    Ok(Expr::Pow(Box::new(base), n))
                }
                _ => Err(Error::Config("exponent must be a small integer".into())),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tokens.get(self.pos).cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Token::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::Config("missing ')' in expression".into()));
                }
                Ok(e)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Token::Op('(')) {
                    self.pos += 1;
                    let arg = Box::new(self.expr()?);
                    if !self.eat_op(')') {
                        return Err(Error::Config(format!("missing ')' after {name}(")));
                    }
                    return match name.as_str() {
                        "sin" => Ok(Expr::Sin(arg)),
                        "cos" => Ok(Expr::Cos(arg)),
                        "exp" => Ok(Expr::Exp(arg)),
                        _ => Err(Error::Config(format!("function {name:?} is not allowed"))),
                    };
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                self.params
                    .get(&name)
                    .map(|v| Expr::Const(*v))
                    .ok_or_else(|| Error::Config(format!("unknown identifier {name:?}")))
            }
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Expr {
        let mut params = HashMap::new();
        params.insert("a".to_string(), 0.1);
        Expr::parse(src, &["theta"], &params).unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        let e = p("a*cos(theta)");
        assert!((e.eval(&[0.0]) - 0.1).abs() < 1e-15);
        let e = p("1 + 0.5*cos(theta)^2 - 2/4");
        assert!((e.eval(&[0.0]) - 1.0).abs() < 1e-15);
        let e = p("exp(-3e-1*theta)");
        assert!((e.eval(&[1.0]) - (-0.3f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_closed_form() {
        let e = p("a*cos(theta)");
        let d1 = e.diff(0);
        let d2 = d1.diff(0);
        for &t in &[0.0, 0.3, 1.7, 4.0] {
            assert!((d1.eval(&[t]) + 0.1 * t.sin()).abs() < 1e-15);
            assert!((d2.eval(&[t]) + 0.1 * t.cos()).abs() < 1e-15);
        }
        let e = p("sin(theta)*cos(theta)/(2+cos(theta))");
        let d = e.diff(0);
        let t = 0.4;
        let h = 1e-6;
        let fd = (e.eval(&[t + h]) - e.eval(&[t - h])) / (2.0 * h);
        assert!((d.eval(&[t]) - fd).abs() < 1e-8);
    }

    #[test]
    fn rejects_unknown_names() {
        let params = HashMap::new();
        assert!(Expr::parse("tan(theta)", &["theta"], &params).is_err());
        assert!(Expr::parse("b*theta", &["theta"], &params).is_err());
        assert!(Expr::parse("theta $ 2", &["theta"], &params).is_err());
        assert!(Expr::parse("(theta", &["theta"], &params).is_err());
    }

    #[test]
    fn constant_expression_is_zero() {
        assert!(p("0*cos(theta)").is_zero());
        assert!(p("a*cos(theta)").diff(0).diff(0).diff(0).diff(0).eval(&[0.0]) - 0.1 < 1e-15);
    }
}
