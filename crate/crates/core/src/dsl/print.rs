use std::fmt;

use super::{BinOp, Expr, Var};

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => ADD,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => MUL,
        Expr::Neg(_) => NEG,
        Expr::Bin(BinOp::Pow, ..) => POW,
        Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => NEG,
        _ => ATOM,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::Theta => f.write_str("theta"),
            Var::X(i) => write!(f, "x[{i}]"),
            Var::Y(i) => write!(f, "y[{i}]"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{}", *v as i64),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                child(f, a, prec(a) < NEG)
            }
            Expr::Bin(op, a, b) => {
                let (p, sym) = match op {
                    BinOp::Add => (ADD, " + "),
                    BinOp::Sub => (ADD, " - "),
                    BinOp::Mul => (MUL, " * "),
                    BinOp::Div => (MUL, " / "),
                    BinOp::Pow => (POW, "^"),
                };
                if p == POW {
                    // right-associative; the exponent is parsed as a unary
                    child(f, a, prec(a) <= POW)?;
                    f.write_str(sym)?;
                    child(f, b, prec(b) < NEG)
                } else {
                    child(f, a, prec(a) < p)?;
                    f.write_str(sym)?;
                    child(f, b, prec(b) <= p)
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
