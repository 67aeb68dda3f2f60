//! A small expression language for right-hand sides, delays and histories.
//!
//! ```
//! use rfde::dsl::parse;
//!
//! let e = parse("-y[0] + 0.5*sin(t)", 1).unwrap();
//! assert_eq!(e.eval_txy(0.0, &[0.0], &[2.0]).unwrap(), -2.0);
//! assert_eq!(e.to_string(), "-y[0] + 0.5 * sin(t)");
//! ```

mod eval;
mod parse;
mod print;

use std::sync::Arc;

use thiserror::Error;

use crate::functional::{DelayFunctional, FunctionalError, OdeField, VectorField};
use crate::history::{HistoryError, InitialHistory, PastInterval};

pub use eval::{Env, EvalError, EvalErrorKind};
pub use parse::parse_in;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    Theta,
    X(usize),
    Y(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Sqrt,
    Abs,
    Sgn,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 10] =
        [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Tanh, Func::Sqrt, Func::Abs, Func::Sgn, Func::Min, Func::Max];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Scope {
    pub n: usize,
    pub t: bool,
    pub theta: bool,
    pub x: bool,
    pub y: bool,
}

impl Scope {
    /// `f(t, x, y)`.
    pub fn field(n: usize) -> Self {
        Scope { n, t: true, theta: false, x: true, y: true }
    }

    /// `τ(t, x)`.
    pub fn delay(n: usize) -> Self {
        Scope { n, t: true, theta: false, x: true, y: false }
    }

    /// `φ(θ)`.
    pub fn history() -> Self {
        Scope { n: 0, t: false, theta: true, x: false, y: false }
    }

    /// Closed-form solutions `x(t)`.
    pub fn time() -> Self {
        Scope { n: 0, t: true, theta: false, x: false, y: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

/// Parses a right-hand side `f(t, x, y)` over `n` state components.
pub fn parse(src: &str, n: usize) -> Result<Expr, ParseError> {
    parse_in(src, Scope::field(n))
}

impl Expr {
    pub fn eval(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        eval::eval(self, env)
    }

    pub fn eval_txy(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        self.eval(&Env { t, theta: 0.0, x, y })
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(e) => 1 + e.size(),
            Expr::Bin(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }
}

fn eval_err(e: EvalError) -> FunctionalError {
    FunctionalError::Eval(e.to_string())
}

/// `f(t, x, y)` with one expression per component.
pub fn vector_field(exprs: Vec<Expr>) -> VectorField {
    Arc::new(move |t, x, y, out| {
        let env = Env { t, theta: 0.0, x, y };
        for (o, e) in out.iter_mut().zip(&exprs) {
            *o = e.eval(&env).map_err(eval_err)?;
        }
        Ok(())
    })
}

/// `f(t, x)` with one expression per component.
pub fn ode_field(exprs: Vec<Expr>) -> OdeField {
    Arc::new(move |t, x, out| {
        let env = Env { t, theta: 0.0, x, y: &[] };
        for (o, e) in out.iter_mut().zip(&exprs) {
            *o = e.eval(&env).map_err(eval_err)?;
        }
        Ok(())
    })
}

/// `τ(t, φ(0))`.
pub fn delay(expr: Expr) -> DelayFunctional {
    DelayFunctional::of_state(Arc::new(move |t, x| expr.eval(&Env { t, theta: 0.0, x, y: &[] }).map_err(eval_err)))
}

/// A closed-form history `θ ↦ (e_1(θ), …, e_n(θ))`.
pub fn history(interval: PastInterval, exprs: Vec<Expr>) -> Result<InitialHistory, HistoryError> {
    let dim = exprs.len();
    InitialHistory::closed_form(
        interval,
        dim,
        Arc::new(move |theta, out| {
            let env = Env { t: 0.0, theta, x: &[], y: &[] };
            for (o, e) in out.iter_mut().zip(&exprs) {
                *o = e.eval(&env).map_err(|e| HistoryError::Eval(e.to_string()))?;
            }
            Ok(())
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(src: &str, t: f64, x: &[f64], y: &[f64]) -> f64 {
        parse(src, x.len().max(1)).unwrap().eval_txy(t, x, y).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(parse("-y[0]", 1).unwrap(), Expr::Neg(Box::new(Expr::Var(Var::Y(0)))));
        let err = parse("a*x[0] + sin(t)", 1).unwrap_err();
        assert_eq!(err.pos, 0);
        assert!(err.message.contains('a'));
        assert_eq!(ev("2^3^2", 0.0, &[0.0], &[0.0]), 512.0);
        assert_eq!(ev("x[0]*x[0]", 0.0, &[3.0], &[0.0]), 9.0);
        assert_eq!(ev("sgn(y[0])", 0.0, &[0.0], &[-2.0]), -1.0);
        assert_eq!(ev("min(t, 1)", 0.3, &[0.0], &[0.0]), 0.3);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("-2^2", 0.0, &[0.0], &[0.0]), -4.0);
        assert_eq!(ev("2^-1", 0.0, &[0.0], &[0.0]), 0.5);
        assert_eq!(ev("1 - 2 - 3", 0.0, &[0.0], &[0.0]), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, &[0.0], &[0.0]), 1.0);
        assert_eq!(ev("1 + 2 * 3", 0.0, &[0.0], &[0.0]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, &[0.0], &[0.0]), 9.0);
        assert_eq!(ev("-x[0]*2", 0.0, &[3.0], &[0.0]), -6.0);
    }

    #[test]
    fn scope_and_arity_errors() {
        assert!(parse("x[1]", 1).is_err());
        assert!(parse_in("y[0]", Scope::delay(1)).is_err());
        assert!(parse_in("t", Scope::history()).is_err());
        assert!(parse_in("theta + θ", Scope::history()).is_ok());
        assert!(parse("min(1)", 1).is_err());
        assert!(parse("sin(1, 2)", 1).is_err());
        assert!(parse("", 1).is_err());
        assert!(parse("1 +", 1).is_err());
        assert!(parse("(1", 1).is_err());
        assert!(parse("1 2", 1).is_err());
        let e = parse("x[0] + foo(1)", 1).unwrap_err();
        assert_eq!(e.pos, 7);
    }

    #[test]
    fn eval_errors() {
        let check = |src: &str, kind: EvalErrorKind| {
            let e = parse(src, 1).unwrap().eval_txy(0.0, &[-1.0], &[0.0]).unwrap_err();
            assert_eq!(e.kind, kind, "{src}");
        };
        check("log(0)", EvalErrorKind::LogDomain);
        check("sqrt(x[0])", EvalErrorKind::SqrtDomain);
        check("1 / y[0]", EvalErrorKind::DivisionByZero);
        check("x[0]^0.5", EvalErrorKind::PowDomain);
        check("exp(1000)", EvalErrorKind::NonFinite);
        assert_eq!(ev("x[0]^3", 0.0, &[-2.0], &[0.0]), -8.0);
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
        if depth == 0 || rng.gen_bool(0.25) {
            return match rng.gen_range(0..4) {
                0 => Expr::Num((rng.gen_range(0.0..100.0f64) * 1000.0).round() / 1000.0),
                1 => Expr::Var(Var::T),
                2 => Expr::Var(Var::X(rng.gen_range(0..2))),
                _ => Expr::Var(Var::Y(rng.gen_range(0..2))),
            };
        }
        match rng.gen_range(0..3) {
            0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
            1 => {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][rng.gen_range(0..5)];
                Expr::Bin(op, Box::new(random_expr(rng, depth - 1)), Box::new(random_expr(rng, depth - 1)))
            }
            _ => {
                let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
                Expr::Call(f, (0..f.arity()).map(|_| random_expr(rng, depth - 1)).collect())
            }
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let e = random_expr(&mut rng, 5);
            let printed = e.to_string();
            let back = parse(&printed, 2).unwrap_or_else(|err| panic!("{printed}: {err}"));
            assert_eq!(back, e, "{printed}");
            assert_eq!(back.to_string(), printed);
        }
    }

    #[test]
    fn adapters() {
        let f = vector_field(vec![parse("-y[0]", 2).unwrap(), parse("x[0] * t", 2).unwrap()]);
        let mut out = [0.0; 2];
        f(2.0, &[3.0, 0.0], &[1.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [-1.0, 6.0]);
        let tau = delay(parse_in("1 + 0.25 * tanh(x[0])", Scope::delay(1)).unwrap());
        let phi = InitialHistory::constant(PastInterval::Compact(1.25), vec![0.0]);
        assert_eq!(tau.eval(0.0, &phi).unwrap(), 1.0);
        let h = history(PastInterval::Compact(1.0), vec![parse_in("cos(theta)", Scope::history()).unwrap()]).unwrap();
        assert_eq!(crate::history::History::eval(&h, -1.0).unwrap(), vec![1f64.cos()]);
    }
}
