//! The immersion component DSL: parsing, printing, and jet evaluation.
//!
//! Grammar:
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?          // right-associative
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//! Identifiers are ASCII `[a-zA-Z][a-zA-Z0-9_]*`. The constants `pi` and `e`
//! are recognized. The exponent of `^` must be a constant; a general `f^g`
//! is rejected at parse time.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(&self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// Parsed abstract syntax tree of a scalar DSL expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Variable(String),
    Constant(f64),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Variable(name.to_string())
    }

    pub fn num(v: f64) -> Expr {
        Expr::Constant(v)
    }

    pub fn neg(self) -> Expr {
        Expr::Unary(UnaryOp::Neg, Box::new(self))
    }

    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Binary(BinaryOp::Add, Box::new(self), Box::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::Binary(BinaryOp::Sub, Box::new(self), Box::new(rhs))
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::Binary(BinaryOp::Mul, Box::new(self), Box::new(rhs))
    }

    pub fn div(self, rhs: Expr) -> Expr {
        Expr::Binary(BinaryOp::Div, Box::new(self), Box::new(rhs))
    }

    pub fn pow(self, e: f64) -> Expr {
        Expr::Binary(BinaryOp::Pow, Box::new(self), Box::new(Expr::Constant(e)))
    }

    pub fn apply(op: UnaryOp, arg: Expr) -> Expr {
        Expr::Unary(op, Box::new(arg))
    }

    /// Substitute variables by expressions (expression-level composition).
    /// Unmapped variables are left untouched.
    pub fn substitute(&self, map: &[(String, Expr)]) -> Expr {
        match self {
            Expr::Variable(name) => map
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| self.clone()),
            Expr::Constant(_) => self.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.substitute(map))),
            Expr::Binary(op, a, b) => Expr::Binary(
                *op,
                Box::new(a.substitute(map)),
                Box::new(b.substitute(map)),
            ),
        }
    }

    /// Evaluate as a truncated Taylor jet at `point`.
    pub fn eval_jet(&self, variables: &[String], point: &[f64], order: usize) -> Result<Jet> {
        if order > crate::jet::DEFAULT_MAX_ORDER {
            return Err(Error::OrderTooLarge {
                requested: order,
                max: crate::jet::DEFAULT_MAX_ORDER,
            });
        }
        if variables.len() != point.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} variables vs point of dimension {}",
                variables.len(),
                point.len()
            )));
        }
        let space = JetSpace::get(variables.len(), order);
        let env: Vec<Jet> = point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(&space, x, i))
            .collect();
        self.eval_in(variables, &env, &space)
    }

    fn eval_in(&self, variables: &[String], env: &[Jet], space: &Arc<JetSpace>) -> Result<Jet> {
        match self {
            Expr::Variable(name) => {
                let i = variables
                    .iter()
                    .position(|v| v == name)
                    .ok_or_else(|| Error::UnknownIdentifier(name.clone()))?;
                Ok(env[i].clone())
            }
            Expr::Constant(v) => Ok(Jet::constant(space, *v)),
            Expr::Unary(op, a) => {
                let a = a.eval_in(variables, env, space)?;
                Ok(match op {
                    UnaryOp::Neg => a.neg(),
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Tan => a.tan(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => a.ln()?,
                    UnaryOp::Sqrt => a.sqrt()?,
                    UnaryOp::Sinh => a.sinh(),
                    UnaryOp::Cosh => a.cosh(),
                    UnaryOp::Tanh => a.tanh(),
                })
            }
            Expr::Binary(op, a, b) => {
                let ja = a.eval_in(variables, env, space)?;
                match op {
                    BinaryOp::Add => ja.add(&b.eval_in(variables, env, space)?),
                    BinaryOp::Sub => ja.sub(&b.eval_in(variables, env, space)?),
                    BinaryOp::Mul => ja.mul(&b.eval_in(variables, env, space)?),
                    BinaryOp::Div => ja.div(&b.eval_in(variables, env, space)?),
                    BinaryOp::Pow => {
                        let e = constant_value(b).ok_or(Error::NonConstantExponent)?;
                        if e.fract() == 0.0 && e.abs() < 1e9 {
                            ja.powi(e as i64)
                        } else {
                            ja.powf(e)
                        }
                    }
                }
            }
        }
    }

    /// Plain numeric evaluation (order-0 jet).
    pub fn eval(&self, variables: &[String], point: &[f64]) -> Result<f64> {
        Ok(self.eval_jet(variables, point, 0)?.value())
    }

    /// All variable names referenced by the expression.
    pub fn free_variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Variable(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Constant(_) => {}
            Expr::Unary(_, a) => a.free_variables(out),
            Expr::Binary(_, a, b) => {
                a.free_variables(out);
                b.free_variables(out);
            }
        }
    }
}

fn constant_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Constant(v) => Some(*v),
        Expr::Unary(UnaryOp::Neg, a) => constant_value(a).map(|v| -v),
        Expr::Binary(op, a, b) => {
            let (a, b) = (constant_value(a)?, constant_value(b)?);
            Some(match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
                BinaryOp::Pow => a.powf(b),
            })
        }
        _ => None,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f, 0)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>, parent_prec: u8) -> fmt::Result {
    match e {
        Expr::Variable(name) => write!(f, "{name}"),
        Expr::Constant(v) => {
            if *v < 0.0 {
                // keep the printed tree re-parseable as Neg(Constant)
                if parent_prec >= 3 {
                    write!(f, "(-{})", -v)
                } else {
                    write!(f, "-{}", -v)
                }
            } else {
                write!(f, "{v}")
            }
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            if parent_prec >= 3 {
                write!(f, "(-")?;
                write_expr(a, f, 3)?;
                write!(f, ")")
            } else {
                write!(f, "-")?;
                write_expr(a, f, 3)
            }
        }
        Expr::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(a, f, 0)?;
            write!(f, ")")
        }
        Expr::Binary(op, a, b) => {
            let prec = op.precedence();
            let need_parens = prec < parent_prec
                || (prec == parent_prec && *op != BinaryOp::Pow)
                || (*op == BinaryOp::Pow && parent_prec == 4);
            if need_parens {
                write!(f, "(")?;
            }
            // right operand of -, / needs a higher effective precedence
            let (lp, rp) = match op {
                BinaryOp::Add => (1, 1),
                BinaryOp::Sub => (1, 2),
                BinaryOp::Mul => (2, 2),
                BinaryOp::Div => (2, 3),
                BinaryOp::Pow => (5, 4),
            };
            write_expr(a, f, lp)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(b, f, rp)?;
            if need_parens {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    variables: &'a [String],
}

/// Parse `text` into an [`Expr`]. Every identifier must be one of
/// `variables`, a function name, or `pi`/`e`.
pub fn parse(text: &str, variables: &[String]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        variables,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            message: format!("unexpected `{}`", p.bytes[p.pos] as char),
        });
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'+' => BinaryOp::Add,
                b'-' => BinaryOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                b'*' => BinaryOp::Mul,
                b'/' => BinaryOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        self.unary()
    }

    // `^` binds tighter than unary minus: `-u^2` parses as -(u^2).
    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.factor()?;
            let value = constant_value(&exponent).ok_or(Error::NonConstantExponent)?;
            return Ok(Expr::Binary(
                BinaryOp::Pow,
                Box::new(base),
                Box::new(Expr::Constant(value)),
            ));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let c = self.peek().ok_or(Error::Syntax {
            offset: self.pos,
            message: "unexpected end of input".into(),
        })?;
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
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
            if self.peek() == Some(b'(') {
                let op = UnaryOp::from_name(name)
                    .ok_or_else(|| Error::UnknownIdentifier(name.to_string()))?;
                self.pos += 1;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(Expr::Unary(op, Box::new(arg)));
            }
            return match name {
                "pi" => Ok(Expr::Constant(std::f64::consts::PI)),
                "e" => Ok(Expr::Constant(std::f64::consts::E)),
                _ if self.variables.iter().any(|v| v == name) => {
                    Ok(Expr::Variable(name.to_string()))
                }
                _ => Err(Error::UnknownIdentifier(name.to_string())),
            };
        }
        Err(Error::Syntax {
            offset: self.pos,
            message: format!("unexpected `{}`", c as char),
        })
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // exponent part
        if self.pos < self.bytes.len() && (self.bytes[self.pos] | 0x20) == b'e' {
            let mut p = self.pos + 1;
            if p < self.bytes.len() && (self.bytes[p] == b'+' || self.bytes[p] == b'-') {
                p += 1;
            }
            if p < self.bytes.len() && self.bytes[p].is_ascii_digit() {
                self.pos = p;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Constant)
            .map_err(|_| Error::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.pos,
                message: format!("expected `{}`", c as char),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vars(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_difference_of_squares() {
        let v = vars(&["u", "v"]);
        let e = parse("u^2 - v^2", &v).unwrap();
        assert_eq!(
            e,
            Expr::var("u").pow(2.0).sub(Expr::var("v").pow(2.0))
        );
    }

    #[test]
    fn parse_left_associative_product() {
        let v = vars(&["u", "v"]);
        let e = parse("2*u*v", &v).unwrap();
        assert_eq!(e, Expr::num(2.0).mul(Expr::var("u")).mul(Expr::var("v")));
    }

    #[test]
    fn incomplete_input_reports_offset() {
        let v = vars(&["u"]);
        match parse("u +", &v) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn pow_is_right_associative() {
        let v = vars(&["u"]);
        // 2^3^2 = 2^(9)
        let e = parse("2^3^2", &v).unwrap();
        assert_relative_eq!(e.eval(&v, &[0.0]).unwrap(), 512.0);
    }

    #[test]
    fn nonconstant_exponent_rejected() {
        let v = vars(&["u", "v"]);
        assert_eq!(parse("u^v", &v), Err(Error::NonConstantExponent));
        // negated constant exponent is fine
        let e = parse("u^-2", &v).unwrap();
        assert_relative_eq!(e.eval(&v, &[2.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn unknown_identifier() {
        let v = vars(&["u"]);
        assert_eq!(
            parse("u + w", &v),
            Err(Error::UnknownIdentifier("w".into()))
        );
        assert_eq!(
            parse("foo(u)", &v),
            Err(Error::UnknownIdentifier("foo".into()))
        );
    }

    #[test]
    fn constants_recognized() {
        let v = vars(&[]);
        assert_relative_eq!(
            parse("cos(pi)", &v).unwrap().eval(&v, &[]).unwrap(),
            -1.0
        );
        assert_relative_eq!(
            parse("log(e)", &v).unwrap().eval(&v, &[]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn eval_jet_polynomial_plus_sin() {
        let v = vars(&["u", "v"]);
        let e = parse("u^2 + sin(v)", &v).unwrap();
        let j = e.eval_jet(&v, &[1.0, 0.0], 2).unwrap();
        assert_relative_eq!(j.value(), 1.0);
        assert_relative_eq!(j.d(0), 2.0);
        assert_relative_eq!(j.d(1), 1.0);
        assert_relative_eq!(j.d2(0, 0), 2.0);
        assert_relative_eq!(j.d2(1, 1), 0.0);
        assert_relative_eq!(j.d2(0, 1), 0.0);
    }

    #[test]
    fn jet_extract_examples() {
        let v = vars(&["u", "v"]);
        let e = parse("u*v", &v).unwrap();
        let j = e.eval_jet(&v, &[2.0, 3.0], 2).unwrap();
        assert_relative_eq!(j.partial(&[1, 1]).unwrap(), 1.0);
        assert_relative_eq!(j.partial(&[1, 0]).unwrap(), 3.0);
        assert!(j.partial(&[0, 3]).is_err());
    }

    #[test]
    fn order_too_large() {
        let v = vars(&["u"]);
        let e = parse("u", &v).unwrap();
        assert!(matches!(
            e.eval_jet(&v, &[0.0], 7),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn print_parse_print_fixed_point() {
        let v = vars(&["u", "v", "w"]);
        let samples = [
            "u^2 - v^2",
            "2*u*v",
            "-(u + v) * w",
            "sin(u) / (1 + cos(v)^2)",
            "u^-2 + sqrt(w)",
            "-u^2",
            "u - (v - w)",
            "u / (v * w)",
            "exp(-(u^2))",
        ];
        for s in samples {
            let e1 = parse(s, &v).unwrap();
            let p1 = e1.to_string();
            let e2 = parse(&p1, &v).unwrap();
            let p2 = e2.to_string();
            assert_eq!(p1, p2, "print not stable for `{s}`");
            // printed form must evaluate identically
            let x = [0.3, 0.4, 0.5];
            assert_relative_eq!(
                e1.eval(&v, &x).unwrap(),
                e2.eval(&v, &x).unwrap(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn substitution_composes() {
        let v = vars(&["u", "v"]);
        let e = parse("u^2 + v", &v).unwrap();
        let sub = e.substitute(&[
            ("u".to_string(), parse("v + 1", &v).unwrap()),
            ("v".to_string(), parse("2*v", &v).unwrap()),
        ]);
        assert_relative_eq!(sub.eval(&v, &[0.0, 3.0]).unwrap(), 22.0);
    }
}
