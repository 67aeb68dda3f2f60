use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

/// Variable bindings for evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Env<'a> {
    pub t: f64,
    pub theta: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalErrorKind {
    LogDomain,
    SqrtDomain,
    DivisionByZero,
    PowDomain,
    NonFinite,
    MissingVariable,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind:?}: {detail}")]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub detail: String,
}

fn fail(kind: EvalErrorKind, detail: String) -> Result<f64, EvalError> {
    Err(EvalError { kind, detail })
}

pub(super) fn eval(e: &Expr, env: &Env<'_>) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Var(var) => {
            let got = match var {
                Var::T => Some(env.t),
                Var::Theta => Some(env.theta),
                Var::X(i) => env.x.get(*i).copied(),
                Var::Y(i) => env.y.get(*i).copied(),
            };
            match got {
                Some(v) => v,
                None => return fail(EvalErrorKind::MissingVariable, format!("{var:?} is not bound")),
            }
        }
        Expr::Neg(a) => -eval(a, env)?,
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval(a, env)?, eval(b, env)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return fail(EvalErrorKind::DivisionByZero, format!("{a} / 0"));
                    }
                    a / b
                }
                BinOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        return fail(EvalErrorKind::PowDomain, format!("{a} ^ {b}"));
                    }
                    if a == 0.0 && b < 0.0 {
                        return fail(EvalErrorKind::DivisionByZero, format!("0 ^ {b}"));
                    }
                    a.powf(b)
                }
            }
        }
        Expr::Call(f, args) => {
            let a = eval(&args[0], env)?;
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return fail(EvalErrorKind::LogDomain, format!("log({a})"));
                    }
                    a.ln()
                }
                Func::Tanh => a.tanh(),
                Func::Sqrt => {
                    if a < 0.0 {
                        return fail(EvalErrorKind::SqrtDomain, format!("sqrt({a})"));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
                Func::Sgn => {
                    if a > 0.0 {
                        1.0
                    } else if a < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Func::Min => a.min(eval(&args[1], env)?),
                Func::Max => a.max(eval(&args[1], env)?),
            }
        }
    };
    if !v.is_finite() {
        return fail(EvalErrorKind::NonFinite, format!("{v} from {e}"));
    }
    Ok(v)
}
