//! Coefficient expression language.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-'? base ('^' integer)?
//! base   := number | 'x' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp' | 'sqrt'
//! ```
//!
//! Only smooth primitives are admitted, so every accepted expression is
//! infinitely differentiable wherever it is finite. Poles and negative
//! square-root arguments are caught by [`CoeffExpr::check_domain`].

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => x,
            Node::Neg(a) => -a.eval(x),
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, n) => a.eval(x).powi(*n),
            Node::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Node::Num(_) => true,
            Node::X => false,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.is_constant(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Collects every sub-expression whose sign must not change on the
    /// interval: denominators, square-root arguments and bases raised to a
    /// negative power.
    fn guarded<'a>(&'a self, out: &mut Vec<(&'a Node, Guard)>) {
        match self {
            Node::Num(_) | Node::X => {}
            Node::Neg(a) => a.guarded(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => {
                a.guarded(out);
                b.guarded(out);
            }
            Node::Div(a, b) => {
                out.push((b, Guard::NonZero));
                a.guarded(out);
                b.guarded(out);
            }
            Node::Pow(a, n) => {
                if *n < 0 {
                    out.push((a, Guard::NonZero));
                }
                a.guarded(out);
            }
            Node::Call(f, a) => {
                if *f == Func::Sqrt {
                    out.push((a, Guard::NonNegative));
                }
                a.guarded(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(..) => 3,
            Node::Pow(..) => 4,
            Node::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Guard {
    NonZero,
    NonNegative,
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Node, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

// Printing emits the minimal parentheses needed for the printed text to
// re-parse into the same tree. Numbers use the shortest round-trip form.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => {
                if *v < 0.0 {
                    write!(f, "-{:?}", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Node::X => write!(f, "x"),
            Node::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 4)
            }
            Node::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Node::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Node::Pow(a, n) => {
                write_child(f, a, 5)?;
                write!(f, "^{n}")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed coefficient: the source text plus its evaluable tree.
#[derive(Debug, Clone)]
pub struct CoeffExpr {
    source: String,
    root: Node,
}

impl PartialEq for CoeffExpr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl CoeffExpr {
    pub fn constant(value: f64) -> Self {
        CoeffExpr {
            source: format!("{value:?}"),
            root: Node::Num(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tree(&self) -> &Node {
        &self.root
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    /// Canonical text; parsing it gives back an identical tree.
    pub fn to_canonical(&self) -> String {
        self.root.to_string()
    }

    /// Samples `samples + 1` equispaced points of `[lo, hi]` and rejects
    /// the expression if any value is non-finite, any denominator changes
    /// sign or vanishes, or a square-root argument goes negative.
    pub fn check_domain(&self, lo: f64, hi: f64, samples: usize) -> Result<()> {
        let mut guards = Vec::new();
        self.root.guarded(&mut guards);
        let xs: Vec<f64> = (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .collect();
        for &x in &xs {
            let v = self.eval(x);
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "'{}' is not finite at x = {x}",
                    self.source
                )));
            }
        }
        for (node, guard) in guards {
            let mut prev: Option<f64> = None;
            for &x in &xs {
                let v = node.eval(x);
                match guard {
                    Guard::NonNegative if v < 0.0 => {
                        return Err(Error::Domain(format!(
                            "square root of negative value in '{}' at x = {x}",
                            self.source
                        )));
                    }
                    Guard::NonZero if v == 0.0 => {
                        return Err(Error::Domain(format!(
                            "division by zero in '{}' at x = {x}",
                            self.source
                        )));
                    }
                    Guard::NonZero => {
                        if let Some(p) = prev {
                            if p.signum() != v.signum() {
                                return Err(Error::Domain(format!(
                                    "pole of '{}' between x = {} and x = {x}",
                                    self.source,
                                    x - (hi - lo) / samples as f64
                                )));
                            }
                        }
                        prev = Some(v);
                    }
                    Guard::NonNegative => {}
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for CoeffExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

impl std::str::FromStr for CoeffExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_coeff(s)
    }
}

/// Parses a coefficient expression.
pub fn parse_coeff(source: &str) -> Result<CoeffExpr> {
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
    };
    let root = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(CoeffExpr {
        source: source.trim().to_string(),
        root,
    })
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Node::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.integer()?;
            return Ok(Node::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<i32>().map_err(|_| {
            self.pos = start;
            self.error("expected integer exponent")
        })
    }

    fn base(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let func = match ident {
                    "x" => return Ok(Node::X),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    other => {
                        return Err(Error::UnknownIdentifier {
                            pos: start,
                            name: other.to_string(),
                        })
                    }
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            // Only an exponent if digits follow; otherwise leave 'e' alone
            // so that "2e" is reported rather than silently misread.
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}
