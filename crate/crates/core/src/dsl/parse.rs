use super::{BinOp, Expr, Func, ParseError, Scope, Var};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn err<T>(pos: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, message: message.into() })
}

impl Lexer {
    fn new(src: &str) -> Result<Self, ParseError> {
        let chars: Vec<(usize, char)> = src.char_indices().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
                match text.parse::<f64>() {
                    Ok(v) => toks.push((Tok::Num(v), pos)),
                    Err(_) => return err(pos, format!("malformed number '{text}'")),
                }
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().map(|(_, c)| c).collect()), pos));
            } else if "+-*/^()[],".contains(c) {
                toks.push((Tok::Sym(c), pos));
                i += 1;
            } else {
                return err(pos, format!("unexpected character '{c}'"));
            }
        }
        toks.push((Tok::End, src.len()));
        Ok(Lexer { toks })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    scope: Scope,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            err(self.pos(), format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn index(&mut self, name: &str, pos: usize) -> Result<usize, ParseError> {
        self.expect('[')?;
        let ipos = self.pos();
        let idx = match self.bump().0 {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => v as usize,
            _ => return err(ipos, "expected a nonnegative integer index"),
        };
        self.expect(']')?;
        if idx >= self.scope.n {
            return err(pos, format!("{name}[{idx}] is out of range for dimension {}", self.scope.n));
        }
        Ok(idx)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, pos),
            Tok::End => err(pos, "unexpected end of input"),
            Tok::Sym(c) => err(pos, format!("unexpected '{c}'")),
        }
    }

    fn ident(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        let scope = self.scope;
        let var = |allowed: bool, v: Var| if allowed { Ok(Expr::Var(v)) } else { err(pos, format!("'{name}' is not available here")) };
        match name.as_str() {
            "t" => var(scope.t, Var::T),
            "theta" | "θ" => var(scope.theta, Var::Theta),
            "x" | "y" => {
                let allowed = if name == "x" { scope.x } else { scope.y };
                if !allowed {
                    return err(pos, format!("'{name}' is not available here"));
                }
                let i = self.index(&name, pos)?;
                Ok(Expr::Var(if name == "x" { Var::X(i) } else { Var::Y(i) }))
            }
            _ => {
                let Some(f) = Func::from_name(&name) else {
                    return err(pos, format!("unknown identifier '{name}'"));
                };
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                if args.len() != f.arity() {
                    return err(pos, format!("{name} takes {} argument(s), got {}", f.arity(), args.len()));
                }
                Ok(Expr::Call(f, args))
            }
        }
    }
}

/// Parses `src` with the variables allowed by `scope`.
pub fn parse_in(src: &str, scope: Scope) -> Result<Expr, ParseError> {
    let lexer = Lexer::new(src)?;
    let mut p = Parser { toks: lexer.toks, at: 0, scope };
    if *p.peek() == Tok::End {
        return err(0, "empty expression");
    }
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return err(p.pos(), "unexpected trailing input");
    }
    Ok(e)
}
