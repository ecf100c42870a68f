//! Arithmetic expressions over the point variables `x`, `y`, `r`, `theta`,
//! used to specify problem data in configuration files.
//!
//! Grammar: `+ - * / ^` (`^` binds tightest and associates to the right, unary
//! minus binds looser than `^`), parentheses, numbers, the constant `pi` and
//! the functions `sin cos exp log sqrt`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    X,
    Y,
    R,
    Theta,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source,
            chars: source.char_indices().collect(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected input"));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    /// Value at the Cartesian point `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        eval(&self.root, x, y)
    }

    /// Value at the boundary point `e^{i theta}`.
    pub fn eval_boundary(&self, theta: f64) -> f64 {
        self.eval(theta.cos(), theta.sin())
    }
}

fn eval(node: &Node, x: f64, y: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(Var::X) => x,
        Node::Var(Var::Y) => y,
        Node::Var(Var::R) => x.hypot(y),
        Node::Var(Var::Theta) => y.atan2(x),
        Node::Neg(a) => -eval(a, x, y),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y), eval(b, x, y));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x, y);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        let column = self.pos + 1;
        Error::Config(format!("{what} at column {column} of expression `{}`", self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut end = self.pos;
        while end < self.chars.len() {
            let c = self.chars[end].1;
            let exp_sign = (c == '+' || c == '-')
                && end > start
                && matches!(self.chars[end - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..end].iter().map(|c| c.1).collect();
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = end;
                Ok(Node::Num(v))
            }
            Err(_) => Err(self.error(&format!("malformed number `{text}`"))),
        }
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().map(|c| c.1).collect();
        let func = match name.as_str() {
            "x" => return Ok(Node::Var(Var::X)),
            "y" => return Ok(Node::Var(Var::Y)),
            "r" => return Ok(Node::Var(Var::R)),
            "theta" => return Ok(Node::Var(Var::Theta)),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => {
                self.pos = start;
                return Err(self.error(&format!("unknown name `{name}`")));
            }
        };
        if self.peek() != Some('(') {
            return Err(self.error(&format!("expected `(` after `{name}`")));
        }
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() != Some(')') {
            return Err(self.error("expected `)`"));
        }
        self.pos += 1;
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0, 0.0), 512.0);
        assert_eq!(ev("-2 ^ 2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2 ^ -1", 0.0, 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("1 + 0.3*x", 0.5, 0.0), 1.15);
        assert_eq!(ev("r", 3.0, 4.0), 5.0);
        assert!((ev("theta", 0.0, 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((ev("sqrt(1+x^2) - exp(log(2))*cos(0)*y + sin(pi)", 0.0, 1.0) + 1.0).abs() < 1e-15);
        assert_eq!(ev("1.5e-1 + 2E+1", 0.0, 0.0), 20.15);
        let e = Expr::parse("cos(theta)").unwrap();
        assert!((e.eval_boundary(0.3) - 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn reports_position() {
        for (s, col) in [("1 +", 4), ("foo(1)", 1), ("2 * (x", 7), ("sin x", 5), ("1 2", 3)] {
            let msg = Expr::parse(s).unwrap_err().to_string();
            assert!(msg.contains(&format!("column {col}")), "{s}: {msg}");
        }
    }

    proptest! {
        #[test]
        fn linear_forms_evaluate_exactly(a in -10i32..10, b in -10i32..10, c in -10i32..10, x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let s = format!("{a} + {b}*x - ({c})*y");
            let v = ev(&s, x, y);
            prop_assert!((v - (a as f64 + b as f64 * x - c as f64 * y)).abs() < 1e-12);
        }
    }
}
