//! A small arithmetic expression language for vector fields, domain
//! predicates and closed-form flow families.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | variable | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | log | sqrt | abs | tanh
//! ```
//!
//! Field expressions use the variables `t` and `x1`..`xn`. Family
//! expressions (closed-form `F(tau, sigma, a)`) use `tau`, `sigma` and
//! `a1`..`an`; which set is legal is decided by [`validate`] and
//! [`validate_family`], not by the parser.

mod eval;
mod parser;

pub use eval::{evaluate_expr, evaluate_family, Bindings, EvalError};
pub use parser::{parse, ParseError};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// `t`
    Time,
    /// `xk`, stored zero-based.
    State(usize),
    /// `tau`
    Tau,
    /// `sigma`
    Sigma,
    /// `ak`, stored zero-based.
    Init(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Literal(f64),
    Variable(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

impl Expression {
    pub fn binary(op: BinOp, lhs: Expression, rhs: Expression) -> Self {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Func, arg: Expression) -> Self {
        Expression::Call(func, Box::new(arg))
    }

    pub fn neg(inner: Expression) -> Self {
        Expression::Neg(Box::new(inner))
    }

    /// Visits every variable occurrence, left to right.
    pub fn for_each_var(&self, visit: &mut impl FnMut(Var)) {
        match self {
            Expression::Literal(_) => {}
            Expression::Variable(v) => visit(*v),
            Expression::Neg(e) | Expression::Call(_, e) => e.for_each_var(visit),
            Expression::Binary(_, l, r) => {
                l.for_each_var(visit);
                r.for_each_var(visit);
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Time => write!(f, "t"),
            Var::State(k) => write!(f, "x{}", k + 1),
            Var::Tau => write!(f, "tau"),
            Var::Sigma => write!(f, "sigma"),
            Var::Init(k) => write!(f, "a{}", k + 1),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Literal(v) => write!(f, "{v}"),
            Expression::Variable(v) => write!(f, "{v}"),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expression::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// Canonical fully parenthesized rendering; `parse(&pretty_print(e))`
/// gives back `e` for every parsed expression.
pub fn pretty_print(e: &Expression) -> String {
    e.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("variable `{variable}` is not allowed here")]
pub struct ValidationError {
    pub variable: String,
}

/// Accepts field expressions: only `t` and `x1`..`xn`.
pub fn validate(e: &Expression, n: usize) -> Result<(), ValidationError> {
    check_vars(e, |v| matches!(v, Var::Time) || matches!(v, Var::State(k) if k < n))
}

/// Accepts family expressions: only `tau`, `sigma` and `a1`..`an`.
pub fn validate_family(e: &Expression, n: usize) -> Result<(), ValidationError> {
    check_vars(e, |v| {
        matches!(v, Var::Tau | Var::Sigma) || matches!(v, Var::Init(k) if k < n)
    })
}

fn check_vars(e: &Expression, allowed: impl Fn(Var) -> bool) -> Result<(), ValidationError> {
    let mut bad = None;
    e.for_each_var(&mut |v| {
        if bad.is_none() && !allowed(v) {
            bad = Some(v);
        }
    });
    match bad {
        Some(v) => Err(ValidationError {
            variable: v.to_string(),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pretty_print_examples() {
        let cases = [
            ("x1^2", "(x1 ^ 2)"),
            ("t*x1+sin(t)", "((t * x1) + sin(t))"),
            ("-x1", "(-x1)"),
        ];
        for (src, want) in cases {
            assert_eq!(pretty_print(&parse(src).unwrap()), want);
        }
    }

    #[test]
    fn validation() {
        let x2 = parse("x2").unwrap();
        assert_eq!(
            validate(&x2, 1),
            Err(ValidationError {
                variable: "x2".into()
            })
        );
        assert!(validate(&parse("x1").unwrap(), 1).is_ok());
        assert!(validate(&parse("t").unwrap(), 3).is_ok());
        assert!(validate(&parse("tau").unwrap(), 1).is_err());
        assert!(validate_family(&parse("a1/(1+(sigma-tau)*a1)").unwrap(), 1).is_ok());
        assert!(validate_family(&parse("x1").unwrap(), 1).is_err());
    }
}
