//! Coefficient expression language.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' factor)?
//! base   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')' | '-' factor
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. Identifiers are the variables `x t u p p1..pI`, the constant
//! `pi`, and the functions `exp ln sin cos cosh sinh tanh abs sqrt min max`.
//! Which variables are legal depends on the [`CoefficientKind`].

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    T,
    U,
    P,
    /// Component `p_i` of the vertex derivative vector, 1-based as written.
    Component(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X => f.write_str("x"),
            Var::T => f.write_str("t"),
            Var::U => f.write_str("u"),
            Var::P => f.write_str("p"),
            Var::Component(i) => write!(f, "p{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Cosh,
    Sinh,
    Tanh,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Cosh => "cosh",
            Func::Sinh => "sinh",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
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

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Composite nodes print inside parentheses so that printing and
/// re-parsing reproduces the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Which slot a coefficient fills; decides the legal variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// `sigma_i(x, p)`
    Sigma,
    /// `H_i(x, u, p)`
    Hamiltonian,
    /// `F(u, p1, ..., pI)`
    VertexCondition { edges: usize },
    /// `g_i(x)`
    Initial,
    /// `phi_i(t)`
    OuterBoundary,
    /// `f_i(t, x)`, subtracted from the Hamiltonian.
    Forcing,
    /// Reference solution `u_i(t, x)` for convergence studies.
    Solution,
    /// Growth bound of one variable, `mu(u)`, `gamma(u)`, `epsilon(u)`.
    GrowthBound,
    /// Two-variable bound `P(u, p)`.
    DecayBound,
}

impl CoefficientKind {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientKind::Sigma => "sigma",
            CoefficientKind::Hamiltonian => "hamiltonian",
            CoefficientKind::VertexCondition { .. } => "vertex_condition",
            CoefficientKind::Initial => "initial",
            CoefficientKind::OuterBoundary => "outer_boundary",
            CoefficientKind::Forcing => "forcing",
            CoefficientKind::Solution => "solution",
            CoefficientKind::GrowthBound => "growth_bound",
            CoefficientKind::DecayBound => "decay_bound",
        }
    }

    pub fn allows(self, var: Var) -> bool {
        use CoefficientKind as K;
        match (self, var) {
            (K::VertexCondition { edges }, Var::Component(i)) => i >= 1 && i <= edges,
            (K::VertexCondition { .. }, v) => v == Var::U,
            (_, Var::Component(_)) => false,
            (K::Sigma, v) => matches!(v, Var::X | Var::P),
            (K::Hamiltonian, v) => matches!(v, Var::X | Var::U | Var::P),
            (K::Initial, v) => v == Var::X,
            (K::OuterBoundary, v) => v == Var::T,
            (K::Forcing | K::Solution, v) => matches!(v, Var::T | Var::X),
            (K::GrowthBound, v) => v == Var::U,
            (K::DecayBound, v) => matches!(v, Var::U | Var::P),
        }
    }
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected `{0}`")]
    UnexpectedToken(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable `{name}` is not allowed in a {kind} coefficient")]
    IllegalVariable { name: String, kind: &'static str },
    #[error("function `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: &'static str,
        expected: &'static str,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogDomain(f64),
    #[error("square root of negative value {0}")]
    SqrtDomain(f64),
    #[error("non-finite result in `{0}`")]
    NonFinite(&'static str),
    #[error("vertex derivative component p{0} is not available")]
    MissingComponent(usize),
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let lexeme = &text[start..i];
            let value: f64 = lexeme.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::BadNumber(lexeme.to_string()),
                position: start,
            })?;
            out.push((Token::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Token::Ident(text[start..i].to_string()), start));
        } else if "+-*/^(),".contains(c) {
            out.push((Token::Sym(c), i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(c);
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedChar(ch),
                position: i,
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    kind: CoefficientKind,
    _src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            position: self.offset(),
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            None => self.error(ParseErrorKind::UnexpectedEnd),
            Some(Token::Num(v)) => self.error(ParseErrorKind::UnexpectedToken(v.to_string())),
            Some(Token::Ident(s)) => self.error(ParseErrorKind::UnexpectedToken(s.clone())),
            Some(Token::Sym(c)) => self.error(ParseErrorKind::UnexpectedToken(c.to_string())),
        }
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek() == Some(&Token::Sym(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.eat('^') {
            let exponent = self.factor()?;
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().cloned() {
            Some(Token::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Token::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(Token::Sym('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                        position: start,
                    })?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    let ok = if func.variadic() {
                        args.len() >= 2
                    } else {
                        args.len() == 1
                    };
                    if !ok {
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity {
                                name: func.name(),
                                expected: if func.variadic() { "at least 2" } else { "1" },
                                got: args.len(),
                            },
                            position: start,
                        });
                    }
                    Ok(Expr::Call(func, args))
                } else {
                    self.identifier(&name, start)
                }
            }
            _ => Err(self.unexpected()),
        }
    }

    fn identifier(&self, name: &str, position: usize) -> Result<Expr, ParseError> {
        if name == "pi" {
            return Ok(Expr::Pi);
        }
        let var = match name {
            "x" => Some(Var::X),
            "t" => Some(Var::T),
            "u" => Some(Var::U),
            "p" => Some(Var::P),
            _ => name
                .strip_prefix('p')
                .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()) && !d.starts_with('0'))
                .and_then(|d| d.parse().ok())
                .map(Var::Component),
        };
        let var = var.ok_or(ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
            position,
        })?;
        if !self.kind.allows(var) {
            return Err(ParseError {
                kind: ParseErrorKind::IllegalVariable {
                    name: name.to_string(),
                    kind: self.kind.name(),
                },
                position,
            });
        }
        Ok(Expr::Var(var))
    }
}

/// Parses `text` as an expression whose variables must be legal for `kind`.
pub fn parse_expr(text: &str, kind: CoefficientKind) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        kind,
        _src: text,
    };
    let e = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.unexpected());
    }
    Ok(e)
}

/// Variable bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Vars<'a, T> {
    pub x: T,
    pub t: T,
    pub u: T,
    pub p: T,
    pub components: &'a [T],
}

impl<T: Real> Default for Vars<'_, T> {
    fn default() -> Self {
        Self {
            x: T::zero(),
            t: T::zero(),
            u: T::zero(),
            p: T::zero(),
            components: &[],
        }
    }
}

impl<'a, T: Real> Vars<'a, T> {
    fn get(&self, v: Var) -> Result<T, EvalError> {
        Ok(match v {
            Var::X => self.x,
            Var::T => self.t,
            Var::U => self.u,
            Var::P => self.p,
            Var::Component(i) => *self
                .components
                .get(i - 1)
                .ok_or(EvalError::MissingComponent(i))?,
        })
    }
}

fn checked<T: Real>(v: T, what: &'static str) -> Result<T, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(what))
    }
}

fn apply<T: Real>(func: Func, a: T) -> Result<T, EvalError> {
    match func {
        Func::Exp => checked(a.exp(), "exp"),
        Func::Ln => {
            if a <= T::zero() {
                Err(EvalError::LogDomain(a.as_f64()))
            } else {
                Ok(a.ln())
            }
        }
        Func::Sin => Ok(a.sin()),
        Func::Cos => Ok(a.cos()),
        Func::Cosh => checked(a.cosh(), "cosh"),
        Func::Sinh => checked(a.sinh(), "sinh"),
        Func::Tanh => Ok(a.tanh()),
        Func::Abs => Ok(a.abs()),
        Func::Sqrt => {
            if a < T::zero() {
                Err(EvalError::SqrtDomain(a.as_f64()))
            } else {
                Ok(a.sqrt())
            }
        }
        Func::Min | Func::Max => unreachable!("variadic functions are folded by the caller"),
    }
}

/// Value together with its partial derivatives in `u` and `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials<T> {
    pub value: T,
    pub du: T,
    pub dp: T,
}

impl<T: Real> Partials<T> {
    fn constant(value: T) -> Self {
        Self {
            value,
            du: T::zero(),
            dp: T::zero(),
        }
    }

    fn scale(self, k: T, value: T) -> Self {
        Self {
            value,
            du: self.du * k,
            dp: self.dp * k,
        }
    }

    fn is_constant(&self) -> bool {
        self.du == T::zero() && self.dp == T::zero()
    }
}

impl Expr {
    pub fn eval<T: Real>(&self, vars: &Vars<'_, T>) -> Result<T, EvalError> {
        match self {
            Expr::Num(v) => Ok(T::lit(*v)),
            Expr::Pi => Ok(T::PI()),
            Expr::Var(v) => vars.get(*v),
            Expr::Neg(e) => Ok(-e.eval(vars)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval(vars)?;
                let b = b.eval(vars)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == T::zero() {
                            Err(EvalError::DivisionByZero)
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => checked(a.powf(b), "^"),
                }
            }
            Expr::Call(func, args) => match func {
                Func::Min | Func::Max => {
                    let mut acc = args[0].eval(vars)?;
                    for a in &args[1..] {
                        let v = a.eval(vars)?;
                        acc = if *func == Func::Min { acc.min(v) } else { acc.max(v) };
                    }
                    Ok(acc)
                }
                _ => apply(*func, args[0].eval(vars)?),
            },
        }
    }

    /// Forward-mode evaluation of the value and its `u`, `p` partials.
    /// At kinks (`abs` at 0, ties in `min`/`max`) a one-sided branch is taken;
    /// an infinite slope surfaces as a non-finite partial.
    pub fn eval_partials<T: Real>(&self, vars: &Vars<'_, T>) -> Result<Partials<T>, EvalError> {
        let zero = T::zero();
        let one = T::one();
        match self {
            Expr::Num(_) | Expr::Pi => Ok(Partials::constant(self.eval(vars)?)),
            Expr::Var(v) => {
                let value = vars.get(*v)?;
                Ok(match v {
                    Var::U => Partials { value, du: one, dp: zero },
                    Var::P => Partials { value, du: zero, dp: one },
                    _ => Partials::constant(value),
                })
            }
            Expr::Neg(e) => {
                let a = e.eval_partials(vars)?;
                Ok(Partials {
                    value: -a.value,
                    du: -a.du,
                    dp: -a.dp,
                })
            }
            Expr::Bin(op, a, b) => {
                let a = a.eval_partials(vars)?;
                let b = b.eval_partials(vars)?;
                match op {
                    BinOp::Add => Ok(Partials {
                        value: a.value + b.value,
                        du: a.du + b.du,
                        dp: a.dp + b.dp,
                    }),
                    BinOp::Sub => Ok(Partials {
                        value: a.value - b.value,
                        du: a.du - b.du,
                        dp: a.dp - b.dp,
                    }),
                    BinOp::Mul => Ok(Partials {
                        value: a.value * b.value,
                        du: a.du * b.value + a.value * b.du,
                        dp: a.dp * b.value + a.value * b.dp,
                    }),
                    BinOp::Div => {
                        if b.value == zero {
                            return Err(EvalError::DivisionByZero);
                        }
                        let q = a.value / b.value;
                        Ok(Partials {
                            value: q,
                            du: (a.du - q * b.du) / b.value,
                            dp: (a.dp - q * b.dp) / b.value,
                        })
                    }
                    BinOp::Pow => {
                        let value = checked(a.value.powf(b.value), "^")?;
                        if b.is_constant() {
                            let k = if a.is_constant() {
                                zero
                            } else {
                                b.value * a.value.powf(b.value - one)
                            };
                            Ok(a.scale(k, value))
                        } else {
                            if a.value <= zero {
                                return Err(EvalError::LogDomain(a.value.as_f64()));
                            }
                            let ln_a = a.value.ln();
                            let ka = b.value * a.value.powf(b.value - one);
                            Ok(Partials {
                                value,
                                du: ka * a.du + value * ln_a * b.du,
                                dp: ka * a.dp + value * ln_a * b.dp,
                            })
                        }
                    }
                }
            }
            Expr::Call(func, args) => match func {
                Func::Min | Func::Max => {
                    let mut acc = args[0].eval_partials(vars)?;
                    for a in &args[1..] {
                        let v = a.eval_partials(vars)?;
                        let take = if *func == Func::Min {
                            v.value < acc.value
                        } else {
                            v.value > acc.value
                        };
                        if take {
                            acc = v;
                        }
                    }
                    Ok(acc)
                }
                _ => {
                    let a = args[0].eval_partials(vars)?;
                    let value = apply(*func, a.value)?;
                    let slope = match func {
                        Func::Exp => value,
                        Func::Ln => one / a.value,
                        Func::Sin => a.value.cos(),
                        Func::Cos => -a.value.sin(),
                        Func::Cosh => a.value.sinh(),
                        Func::Sinh => a.value.cosh(),
                        Func::Tanh => one - value * value,
                        Func::Abs => {
                            if a.value > zero {
                                one
                            } else if a.value < zero {
                                -one
                            } else {
                                zero
                            }
                        }
                        Func::Sqrt => {
                            if a.is_constant() {
                                zero
                            } else {
                                one / (T::lit(2.0) * value)
                            }
                        }
                        Func::Min | Func::Max => unreachable!(),
                    };
                    Ok(a.scale(slope, value))
                }
            },
        }
    }

    /// True if the tree mentions `var`.
    pub fn mentions(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.mentions(var),
            Expr::Bin(_, a, b) => a.mentions(var) || b.mentions(var),
            Expr::Call(_, args) => args.iter().any(|a| a.mentions(var)),
        }
    }
}
