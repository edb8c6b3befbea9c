//! Small closed-form expression language for obstacles, densities, and
//! defining functions.
//!
//! Grammar (infix, case-sensitive identifiers):
//!
//! ```text
//! expr    := sum
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            // right associative
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables address a point z = (z_1, …, z_n) ∈ ℂⁿ through its real
//! coordinates: `re1`, `im1`, `re2`, `im2` (with `x`, `y` as aliases for
//! `re1`, `im1`), plus the radial shorthands `absz` = |z| and `absz1`,
//! `absz2` = |z_k|. `pi` is a constant. Functions: `abs`, `sqrt`, `exp`,
//! `log` (natural), `min`, `max`.
//!
//! Expressions are parsed once into an AST and evaluated many times over a
//! lattice, so evaluation is allocation-free. Integer exponents with |k| ≤ 64
//! are dispatched to `powi` — `(x - a)^2` stays bit-exact on dyadic data.

use crate::error::{Error, Result};
use std::fmt;

/// Coordinate variable of a point in ℂⁿ, in the flat layout
/// (re z_1, im z_1, re z_2, im z_2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    /// re z_k (k is 0-based).
    Re(usize),
    /// im z_k (k is 0-based).
    Im(usize),
    /// |z| = (Σ_k |z_k|²)^{1/2}.
    AbsZ,
    /// |z_k| (k is 0-based).
    AbsZk(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Exp,
    Log,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call1(Func, Box<Expr>),
    Call2(Func, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Parse an expression from text.
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let e = p.parse_bp(0)?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input at token {:?} in `{}`",
                p.tokens[p.pos], src
            )));
        }
        Ok(e)
    }

    /// Evaluate at a point given by flat real coordinates (length 2n).
    /// Out-of-range variables and domain errors surface as non-finite values;
    /// callers that sample over a grid check `is_finite` and attach the node.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(v) => match *v {
                Var::Re(k) => p.get(2 * k).copied().unwrap_or(f64::NAN),
                Var::Im(k) => p.get(2 * k + 1).copied().unwrap_or(f64::NAN),
                Var::AbsZ => p.iter().map(|c| c * c).sum::<f64>().sqrt(),
                Var::AbsZk(k) => {
                    let (x, y) = (
                        p.get(2 * k).copied().unwrap_or(f64::NAN),
                        p.get(2 * k + 1).copied().unwrap_or(f64::NAN),
                    );
                    (x * x + y * y).sqrt()
                }
            },
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, b) => {
                let base = a.eval(p);
                let e = b.eval(p);
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Call1(f, a) => {
                let x = a.eval(p);
                match f {
                    Func::Abs => x.abs(),
                    Func::Sqrt => x.sqrt(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    _ => f64::NAN,
                }
            }
            Expr::Call2(f, a, b) => {
                let (x, y) = (a.eval(p), b.eval(p));
                match f {
                    Func::Min => x.min(y),
                    Func::Max => x.max(y),
                    _ => f64::NAN,
                }
            }
        }
    }

    /// Largest 1-based coordinate index the expression mentions
    /// (0 when it only uses constants).
    pub fn max_coord(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(v) => match *v {
                Var::Re(k) | Var::Im(k) | Var::AbsZk(k) => k + 1,
                Var::AbsZ => 1,
            },
            Expr::Neg(a) | Expr::Call1(_, a) => a.max_coord(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Call2(_, a, b) => a.max_coord().max(b.max_coord()),
        }
    }

    /// Rewrite the expression for the translated argument z ↦ z − a, i.e.
    /// returns e' with e'(z) = e(z − a). Radial shorthands are expanded into
    /// coordinates first so the shift applies to every occurrence. `a` has
    /// flat layout of length 2n.
    pub fn shift(&self, a: &[f64], n: usize) -> Expr {
        fn coord(k: usize, im: bool, a: &[f64]) -> Expr {
            let idx = 2 * k + usize::from(im);
            let var = if im { Var::Im(k) } else { Var::Re(k) };
            let off = a.get(idx).copied().unwrap_or(0.0);
            if off == 0.0 {
                Expr::Var(var)
            } else {
                Expr::Sub(Box::new(Expr::Var(var)), Box::new(Expr::Num(off)))
            }
        }
        fn abs2k(k: usize, a: &[f64]) -> Expr {
            let sq = |e: Expr| Expr::Pow(Box::new(e), Box::new(Expr::Num(2.0)));
            Expr::Add(
                Box::new(sq(coord(k, false, a))),
                Box::new(sq(coord(k, true, a))),
            )
        }
        match self {
            Expr::Num(c) => Expr::Num(*c),
            Expr::Var(v) => match *v {
                Var::Re(k) => coord(k, false, a),
                Var::Im(k) => coord(k, true, a),
                Var::AbsZk(k) => Expr::Call1(Func::Sqrt, Box::new(abs2k(k, a))),
                Var::AbsZ => {
                    let mut sum = abs2k(0, a);
                    for k in 1..n {
                        sum = Expr::Add(Box::new(sum), Box::new(abs2k(k, a)));
                    }
                    Expr::Call1(Func::Sqrt, Box::new(sum))
                }
            },
            Expr::Neg(x) => Expr::Neg(Box::new(x.shift(a, n))),
            Expr::Add(x, y) => Expr::Add(Box::new(x.shift(a, n)), Box::new(y.shift(a, n))),
            Expr::Sub(x, y) => Expr::Sub(Box::new(x.shift(a, n)), Box::new(y.shift(a, n))),
            Expr::Mul(x, y) => Expr::Mul(Box::new(x.shift(a, n)), Box::new(y.shift(a, n))),
            Expr::Div(x, y) => Expr::Div(Box::new(x.shift(a, n)), Box::new(y.shift(a, n))),
            Expr::Pow(x, y) => Expr::Pow(Box::new(x.shift(a, n)), Box::new(y.shift(a, n))),
            Expr::Call1(f, x) => Expr::Call1(*f, Box::new(x.shift(a, n))),
            Expr::Call2(f, x, y) => {
                Expr::Call2(*f, Box::new(x.shift(a, n)), Box::new(y.shift(a, n)))
            }
        }
    }

    /// Expression plus a constant.
    pub fn plus_const(&self, c: f64) -> Expr {
        if c == 0.0 {
            self.clone()
        } else {
            Expr::Add(Box::new(self.clone()), Box::new(Expr::Num(c)))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(w, "{c}"),
            Expr::Var(v) => match *v {
                Var::Re(k) => write!(w, "re{}", k + 1),
                Var::Im(k) => write!(w, "im{}", k + 1),
                Var::AbsZ => write!(w, "absz"),
                Var::AbsZk(k) => write!(w, "absz{}", k + 1),
            },
            Expr::Neg(a) => write!(w, "(-{a})"),
            Expr::Add(a, b) => write!(w, "({a} + {b})"),
            Expr::Sub(a, b) => write!(w, "({a} - {b})"),
            Expr::Mul(a, b) => write!(w, "({a} * {b})"),
            Expr::Div(a, b) => write!(w, "({a} / {b})"),
            Expr::Pow(a, b) => write!(w, "({a} ^ {b})"),
            Expr::Call1(f, a) => write!(w, "{}({a})", func_name(*f)),
            Expr::Call2(f, a, b) => write!(w, "{}({a}, {b})", func_name(*f)),
        }
    }
}

fn func_name(f: Func) -> &'static str {
    match f {
        Func::Abs => "abs",
        Func::Sqrt => "sqrt",
        Func::Exp => "exp",
        Func::Log => "log",
        Func::Min => "min",
        Func::Max => "max",
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // scientific notation: 1e-3, 2.5E+4
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad numeric literal `{text}`")))?;
                out.push(Tok::Num(v));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(src[start..i].to_string()));
            }
            _ => return Err(Error::Parse(format!("unexpected character `{c}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("unexpected end of input in `{}`", self.src)))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        let got = self.next()?;
        if got == want {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "expected {want:?}, found {got:?} in `{}`",
                self.src
            )))
        }
    }

    // Pratt loop; binding powers: +,- = 10; *,/ = 20; unary - = 25; ^ = 30
    // (right associative, so its right operand parses at 29).
    fn parse_bp(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = match self.next()? {
            Tok::Num(v) => Expr::Num(v),
            Tok::Ident(name) => self.finish_ident(name)?,
            Tok::Minus => Expr::Neg(Box::new(self.parse_bp(25)?)),
            Tok::LParen => {
                let e = self.parse_bp(0)?;
                self.expect(Tok::RParen)?;
                e
            }
            t => {
                return Err(Error::Parse(format!(
                    "unexpected token {t:?} in `{}`",
                    self.src
                )))
            }
        };
        loop {
            let (bp, rbp, op) = match self.peek() {
                Some(Tok::Plus) => (10, 11, '+'),
                Some(Tok::Minus) => (10, 11, '-'),
                Some(Tok::Star) => (20, 21, '*'),
                Some(Tok::Slash) => (20, 21, '/'),
                Some(Tok::Caret) => (30, 29, '^'),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_bp(rbp)?;
            lhs = match op {
                '+' => Expr::Add(Box::new(lhs), Box::new(rhs)),
                '-' => Expr::Sub(Box::new(lhs), Box::new(rhs)),
                '*' => Expr::Mul(Box::new(lhs), Box::new(rhs)),
                '/' => Expr::Div(Box::new(lhs), Box::new(rhs)),
                _ => Expr::Pow(Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn finish_ident(&mut self, name: String) -> Result<Expr> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut args = vec![self.parse_bp(0)?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                args.push(self.parse_bp(0)?);
            }
            self.expect(Tok::RParen)?;
            let (f, arity) = match name.as_str() {
                "abs" => (Func::Abs, 1),
                "sqrt" => (Func::Sqrt, 1),
                "exp" => (Func::Exp, 1),
                "log" => (Func::Log, 1),
                "min" => (Func::Min, 2),
                "max" => (Func::Max, 2),
                _ => {
                    return Err(Error::Parse(format!(
                        "unknown function `{name}` (expected abs, sqrt, exp, log, min, max)"
                    )))
                }
            };
            if args.len() != arity {
                return Err(Error::Parse(format!(
                    "function `{name}` takes {arity} argument(s), got {}",
                    args.len()
                )));
            }
            let mut it = args.into_iter();
            Ok(if arity == 1 {
                Expr::Call1(f, Box::new(it.next().unwrap()))
            } else {
                Expr::Call2(f, Box::new(it.next().unwrap()), Box::new(it.next().unwrap()))
            })
        } else {
            let var = match name.as_str() {
                "x" | "re1" => Expr::Var(Var::Re(0)),
                "y" | "im1" => Expr::Var(Var::Im(0)),
                "re2" => Expr::Var(Var::Re(1)),
                "im2" => Expr::Var(Var::Im(1)),
                "absz" => Expr::Var(Var::AbsZ),
                "absz1" => Expr::Var(Var::AbsZk(0)),
                "absz2" => Expr::Var(Var::AbsZk(1)),
                "pi" => Expr::Num(std::f64::consts::PI),
                _ => {
                    return Err(Error::Parse(format!(
                        "unknown identifier `{name}` (expected re1, im1, re2, im2, x, y, absz, absz1, absz2, pi)"
                    )))
                }
            };
            Ok(var)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, p: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(p)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0); // right associative
        assert_eq!(ev("-2 ^ 2", &[]), -4.0); // ^ binds tighter than unary -
        assert_eq!(ev("6 / 3 / 2", &[]), 1.0); // left associative
        assert_eq!(ev("1 - 2 - 3", &[]), -4.0);
        assert_eq!(ev("2 * -3", &[]), -6.0);
        assert_eq!(ev("1e-2 + 2.5E+1", &[]), 25.01);
    }

    #[test]
    fn variables_and_builtins() {
        let p = [0.3, -0.4, 1.0, 2.0];
        assert_eq!(ev("re1", &p), 0.3);
        assert_eq!(ev("im1", &p), -0.4);
        assert_eq!(ev("re2 + im2", &p), 3.0);
        assert!((ev("absz1", &p) - 0.5).abs() < 1e-15);
        assert!((ev("absz", &p) - (0.25f64 + 5.0).sqrt()).abs() < 1e-15);
        assert_eq!(ev("x + y", &[2.0, 5.0]), 7.0);
        assert!((ev("pi", &[]) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(ev("max(1, min(2, 3))", &[]), 2.0);
        assert_eq!(ev("abs(-2.5)", &[]), 2.5);
        assert!((ev("log(exp(2))", &[]) - 2.0).abs() < 1e-15);
        assert_eq!(ev("sqrt(9)", &[]), 3.0);
    }

    #[test]
    fn integer_powers_are_exact_on_dyadics() {
        // (x - 0.25)^2 must use powi and stay exact on dyadic inputs
        let e = Expr::parse("(x - 0.25) ^ 2").unwrap();
        assert_eq!(e.eval(&[0.75, 0.0]), 0.25);
        assert_eq!(e.eval(&[-0.25, 0.0]), 0.25);
    }

    #[test]
    fn parse_errors() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo").is_err());
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("sin(1)").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
    }

    #[test]
    fn nonfinite_values_surface() {
        assert!(ev("log(0 - 1)", &[]).is_nan());
        assert!(ev("1 / 0", &[]).is_infinite());
        assert!(ev("sqrt(0 - 4)", &[]).is_nan());
    }

    #[test]
    fn max_coord_detects_dimension() {
        assert_eq!(Expr::parse("1 + pi").unwrap().max_coord(), 0);
        assert_eq!(Expr::parse("x * y").unwrap().max_coord(), 1);
        assert_eq!(Expr::parse("absz").unwrap().max_coord(), 1);
        assert_eq!(Expr::parse("re2 - im1").unwrap().max_coord(), 2);
        assert_eq!(Expr::parse("absz2").unwrap().max_coord(), 2);
    }

    #[test]
    fn shift_translates_argument() {
        // e'(z) = e(z - a)
        let e = Expr::parse("absz ^ 2").unwrap();
        let a = [0.5, 0.25];
        let shifted = e.shift(&a, 1);
        let z = [0.875, -0.125];
        let moved = [z[0] - a[0], z[1] - a[1]];
        assert_eq!(shifted.eval(&z), e.eval(&moved));
        // |z - a|² = (0.875 - 0.5)² + (-0.125 - 0.25)², up to the sqrt round trip
        assert!((shifted.eval(&z) - 2.0 * 0.375 * 0.375).abs() < 1e-15);

        // polynomial radial forms shift bit-exactly on dyadics
        let e_poly = Expr::parse("x ^ 2 + y ^ 2").unwrap();
        let s_poly = e_poly.shift(&a, 1);
        assert_eq!(s_poly.eval(&z), 2.0 * 0.375 * 0.375);

        let e2 = Expr::parse("max(re1, 0) + absz2").unwrap();
        let a2 = [0.5, 0.0, -0.25, 0.125];
        let s2 = e2.shift(&a2, 2);
        let z2 = [0.3, 0.7, 0.4, -0.9];
        let m2: Vec<f64> = z2.iter().zip(&a2).map(|(c, o)| c - o).collect();
        assert!((s2.eval(&z2) - e2.eval(&m2)).abs() < 1e-15);
    }

    #[test]
    fn display_round_trips() {
        for src in ["1 + 2 * x", "max(absz, 0.5)", "-(x ^ 2) / 3", "exp(re2)"] {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            let re = Expr::parse(&printed).unwrap();
            let p = [0.33, -0.4, 0.8, 0.2];
            assert_eq!(e.eval(&p), re.eval(&p), "round trip failed for `{src}` -> `{printed}`");
        }
    }
}
