//! Closed-form field expressions for run configurations.
//!
//! Grammar: numeric literals, the coordinates `x` and `y`, the constant `pi`,
//! the functions `sin`, `cos`, `exp`, `tanh`, the operators `+ - * / ^`
//! (with integer or fractional powers), unary minus, and parentheses.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_digit() || d == '.' {
                        i += 1;
                    } else if (d == 'e' || d == 'E')
                        && i + 1 < bytes.len()
                        && ((bytes[i + 1] as char).is_ascii_digit()
                            || bytes[i + 1] == b'+'
                            || bytes[i + 1] == b'-')
                    {
                        i += 2;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| {
                    Error::Config(format!("invalid number '{text}' at offset {start} in '{src}'"))
                })?;
                out.push(Token::Num(value));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Token::Ident(src[start..i].to_string()));
            }
            other => {
                return Err(Error::Config(format!(
                    "unexpected character '{other}' at offset {i} in expression '{src}'"
                )))
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Ast {
    Num(f64),
    X,
    Y,
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>),
    Neg(Box<Ast>),
    Sin(Box<Ast>),
    Cos(Box<Ast>),
    Exp(Box<Ast>),
    Tanh(Box<Ast>),
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.bump() {
            Some(found) if found == t => Ok(()),
            other => Err(Error::Config(format!(
                "expected {t:?}, found {other:?} in expression '{}'",
                self.src
            ))),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut node = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    node = Ast::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.bump();
                    node = Ast::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => return Ok(node),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut node = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    node = Ast::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.bump();
                    node = Ast::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => return Ok(node),
            }
        }
    }

    // power binds tighter than unary minus: -x^2 means -(x^2)
    fn factor(&mut self) -> Result<Ast> {
        if let Some(Token::Minus) = self.peek() {
            self.bump();
            return Ok(Ast::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.bump();
            let exp = self.factor()?; // right associative, allows 2^-3
            return Ok(Ast::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Ast::Num(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Ast::X),
                "y" => Ok(Ast::Y),
                "pi" => Ok(Ast::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" | "tanh" => {
                    self.expect(Token::LParen)?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Token::RParen)?;
                    Ok(match name.as_str() {
                        "sin" => Ast::Sin(arg),
                        "cos" => Ast::Cos(arg),
                        "exp" => Ast::Exp(arg),
                        _ => Ast::Tanh(arg),
                    })
                }
                other => Err(Error::Config(format!(
                    "unknown identifier '{other}' in expression '{}'; allowed: x, y, pi, sin, cos, exp, tanh",
                    self.src
                ))),
            },
            other => Err(Error::Config(format!(
                "unexpected token {other:?} in expression '{}'",
                self.src
            ))),
        }
    }
}

/// A parsed, evaluable field expression over (x[, y]).
#[derive(Debug, Clone)]
pub struct FieldExpr {
    ast: Ast,
    source: String,
}

impl FieldExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        if tokens.is_empty() {
            return Err(Error::Config("empty field expression".into()));
        }
        let mut p = Parser {
            tokens: &tokens,
            pos: 0,
            src,
        };
        let ast = p.expr()?;
        if p.pos != tokens.len() {
            return Err(Error::Config(format!(
                "trailing input after position {} in expression '{src}'",
                p.pos
            )));
        }
        Ok(FieldExpr {
            ast,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Whether the expression mentions the second coordinate.
    pub fn uses_y(&self) -> bool {
        fn walk(a: &Ast) -> bool {
            match a {
                Ast::Y => true,
                Ast::Num(_) | Ast::X => false,
                Ast::Add(l, r) | Ast::Sub(l, r) | Ast::Mul(l, r) | Ast::Div(l, r) | Ast::Pow(l, r) => {
                    walk(l) || walk(r)
                }
                Ast::Neg(i) | Ast::Sin(i) | Ast::Cos(i) | Ast::Exp(i) | Ast::Tanh(i) => walk(i),
            }
        }
        walk(&self.ast)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        fn ev(a: &Ast, x: f64, y: f64) -> f64 {
            match a {
                Ast::Num(v) => *v,
                Ast::X => x,
                Ast::Y => y,
                Ast::Add(l, r) => ev(l, x, y) + ev(r, x, y),
                Ast::Sub(l, r) => ev(l, x, y) - ev(r, x, y),
                Ast::Mul(l, r) => ev(l, x, y) * ev(r, x, y),
                Ast::Div(l, r) => ev(l, x, y) / ev(r, x, y),
                Ast::Pow(l, r) => ev(l, x, y).powf(ev(r, x, y)),
                Ast::Neg(i) => -ev(i, x, y),
                Ast::Sin(i) => ev(i, x, y).sin(),
                Ast::Cos(i) => ev(i, x, y).cos(),
                Ast::Exp(i) => ev(i, x, y).exp(),
                Ast::Tanh(i) => ev(i, x, y).tanh(),
            }
        }
        ev(&self.ast, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_functions() {
        let e = FieldExpr::parse("0.5*cos(pi*x) + 0.1").unwrap();
        assert!((e.eval(0.0, 0.0) - 0.6).abs() < 1e-15);
        assert!((e.eval(1.0, 0.0) - (-0.4)).abs() < 1e-15);

        let e = FieldExpr::parse("x^2 - 2*x + 1").unwrap();
        assert!((e.eval(3.0, 0.0) - 4.0).abs() < 1e-15);

        let e = FieldExpr::parse("tanh(2*(x-0.5))*exp(-y)").unwrap();
        assert!(e.uses_y());
        assert!((e.eval(0.5, 1.0)).abs() < 1e-15);

        let e = FieldExpr::parse("-x + sin(0)").unwrap();
        assert!((e.eval(0.25, 0.0) + 0.25).abs() < 1e-15);

        let e = FieldExpr::parse("2^2^2").unwrap(); // right associative
        assert_eq!(e.eval(0.0, 0.0), 16.0);

        let e = FieldExpr::parse("-x^2").unwrap(); // power binds tighter
        assert_eq!(e.eval(3.0, 0.0), -9.0);
        let e = FieldExpr::parse("2^-2").unwrap();
        assert_eq!(e.eval(0.0, 0.0), 0.25);
    }

    #[test]
    fn rejects_outside_grammar() {
        assert!(FieldExpr::parse("sqrt(x)").is_err());
        assert!(FieldExpr::parse("x + ").is_err());
        assert!(FieldExpr::parse("foo").is_err());
        assert!(FieldExpr::parse("x @ 2").is_err());
        assert!(FieldExpr::parse("").is_err());
        assert!(FieldExpr::parse("sin x").is_err());
        assert!(FieldExpr::parse("(x").is_err());
    }

    #[test]
    fn scientific_literals() {
        let e = FieldExpr::parse("1e-3 + 2.5E+2").unwrap();
        assert!((e.eval(0.0, 0.0) - 250.001).abs() < 1e-12);
    }
}
