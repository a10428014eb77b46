use super::{BinOp, Expression, Func, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("argument outside the function's domain")]
    Domain,
    #[error("non-finite result")]
    NonFinite,
    #[error("variable `{0}` has no binding")]
    Unbound(Var),
}

/// Values for every variable an expression may reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub t: Option<f64>,
    pub x: &'a [f64],
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub a: &'a [f64],
}

impl Bindings<'_> {
    fn lookup(&self, v: Var) -> Result<f64, EvalError> {
        let val = match v {
            Var::Time => self.t,
            Var::State(k) => self.x.get(k).copied(),
            Var::Tau => self.tau,
            Var::Sigma => self.sigma,
            Var::Init(k) => self.a.get(k).copied(),
        };
        val.ok_or(EvalError::Unbound(v))
    }
}

/// Evaluates a field expression at `(t, x)`.
pub fn evaluate_expr(e: &Expression, t: f64, x: &[f64]) -> Result<f64, EvalError> {
    eval(
        e,
        &Bindings {
            t: Some(t),
            x,
            ..Default::default()
        },
    )
}

/// Evaluates a family expression at `(tau, sigma, a)`.
pub fn evaluate_family(e: &Expression, tau: f64, sigma: f64, a: &[f64]) -> Result<f64, EvalError> {
    eval(
        e,
        &Bindings {
            tau: Some(tau),
            sigma: Some(sigma),
            a,
            ..Default::default()
        },
    )
}

pub(crate) fn eval(e: &Expression, env: &Bindings<'_>) -> Result<f64, EvalError> {
    let v = match e {
        Expression::Literal(v) => *v,
        Expression::Variable(var) => env.lookup(*var)?,
        Expression::Neg(inner) => -eval(inner, env)?,
        Expression::Binary(op, l, r) => {
            let (l, r) = (eval(l, env)?, eval(r, env)?);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    l / r
                }
                BinOp::Pow => power(l, r)?,
            }
        }
        Expression::Call(func, arg) => {
            let x = eval(arg, env)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log if x <= 0.0 => return Err(EvalError::Domain),
                Func::Log => x.ln(),
                Func::Sqrt if x < 0.0 => return Err(EvalError::Domain),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Tanh => x.tanh(),
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(EvalError::Domain);
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return Ok(base.powi(exponent as i32));
    }
    Ok(base.powf(exponent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ev(src: &str, t: f64, x: &[f64]) -> Result<f64, EvalError> {
        evaluate_expr(&parse(src).unwrap(), t, x)
    }

    #[test]
    fn examples() {
        assert_eq!(ev("x1^2", 0.0, &[0.5]), Ok(0.25));
        assert_eq!(ev("1/x1", 0.0, &[0.0]), Err(EvalError::DivisionByZero));
        let v = ev("exp(t)*(x1+1)-1", 0.6931471805599453, &[0.0]).unwrap();
        assert!((v - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(ev("log(x1)", 0.0, &[0.0]), Err(EvalError::Domain));
        assert_eq!(ev("log(x1)", 0.0, &[-1.0]), Err(EvalError::Domain));
        assert_eq!(ev("sqrt(x1)", 0.0, &[-1.0]), Err(EvalError::Domain));
        assert_eq!(ev("x1^0.5", 0.0, &[-4.0]), Err(EvalError::Domain));
        assert_eq!(ev("x1^3", 0.0, &[-2.0]), Ok(-8.0));
        assert_eq!(ev("x1^-1", 0.0, &[0.0]), Err(EvalError::DivisionByZero));
        assert_eq!(ev("exp(x1)", 0.0, &[1000.0]), Err(EvalError::NonFinite));
        assert_eq!(ev("x2", 0.0, &[1.0]), Err(EvalError::Unbound(Var::State(1))));
    }

    #[test]
    fn family_bindings() {
        let e = parse("a1/(1+(sigma-tau)*a1)").unwrap();
        assert_eq!(evaluate_family(&e, 1.0, 0.0, &[0.5]), Ok(1.0));
        assert_eq!(
            evaluate_family(&e, 2.0, 0.0, &[0.5]),
            Err(EvalError::DivisionByZero)
        );
    }
}
