//! Recursive descent parser for coordinate expressions.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := NUMBER | VAR | '(' expr ')' | '-' factor | call
//! call    := ('min'|'max') '(' expr (',' expr)+ ')'
//!          | ('log'|'exp'|'h') '(' expr ')'
//! VAR     := 'x' [1-9][0-9]*
//! NUMBER  := digits ('.' digits)? (('e'|'E') ('+'|'-')? digits)?
//! ```
//!
//! Unary minus binds tighter than `*`, which binds tighter than `+`/`-`.
//! Products fold constants; a product of two non-constant factors has no AST
//! form and is rejected where it appears.

use super::Expr;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Var(i) => write!(f, "variable x{i}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err_at(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1usize;
    let mut col = 1usize;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => advance(&mut i, &mut line, &mut col),
            '+' => {
                out.push(Spanned {
                    tok: Tok::Plus,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            '-' => {
                out.push(Spanned {
                    tok: Tok::Minus,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            '*' => {
                out.push(Spanned {
                    tok: Tok::Star,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            '(' => {
                out.push(Spanned {
                    tok: Tok::LParen,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            ')' => {
                out.push(Spanned {
                    tok: Tok::RParen,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            ',' => {
                out.push(Spanned {
                    tok: Tok::Comma,
                    line: tl,
                    col: tc,
                });
                advance(&mut i, &mut line, &mut col);
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut col);
                }
                if i < chars.len() && chars[i] == '.' {
                    advance(&mut i, &mut line, &mut col);
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(err_at(line, col, "expected digit after decimal point"));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    advance(&mut i, &mut line, &mut col);
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        advance(&mut i, &mut line, &mut col);
                    }
                    if i >= chars.len() || !chars[i].is_ascii_digit() {
                        return Err(err_at(line, col, "expected digit in exponent"));
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| err_at(tl, tc, format!("invalid number '{text}'")))?;
                if !v.is_finite() {
                    return Err(err_at(tl, tc, format!("number '{text}' out of range")));
                }
                out.push(Spanned {
                    tok: Tok::Num(v),
                    line: tl,
                    col: tc,
                });
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    advance(&mut i, &mut line, &mut col);
                }
                let word: String = chars[start..i].iter().collect();
                let tok = if word.len() > 1
                    && word.starts_with('x')
                    && word[1..].chars().all(|d| d.is_ascii_digit())
                {
                    if word[1..].starts_with('0') {
                        return Err(err_at(
                            tl,
                            tc,
                            format!(
                            "invalid variable '{word}': indices start at x1 without leading zeros"
                        ),
                        ));
                    }
                    let idx: usize = word[1..].parse().map_err(|_| {
                        err_at(tl, tc, format!("variable index in '{word}' too large"))
                    })?;
                    Tok::Var(idx)
                } else {
                    Tok::Ident(word)
                };
                out.push(Spanned {
                    tok,
                    line: tl,
                    col: tc,
                });
            }
            other => return Err(err_at(tl, tc, format!("unexpected character '{other}'"))),
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    max_var: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        let t = self.bump();
        if t.tok == tok {
            Ok(())
        } else {
            Err(err_at(
                t.line,
                t.col,
                format!("expected {tok}, found {}", t.tok),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let first = self.term()?;
        let mut items = vec![first];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    items.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    items.push(negate(self.term()?));
                }
                _ => break,
            }
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Sum(items)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while self.peek().tok == Tok::Star {
            let star = self.bump();
            let rhs = self.factor()?;
            acc = match (acc, rhs) {
                (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
                (Expr::Const(a), e) => Expr::Scale(a, Box::new(e)),
                (e, Expr::Const(b)) => Expr::Scale(b, Box::new(e)),
                _ => {
                    return Err(err_at(
                        star.line,
                        star.col,
                        "nonlinear product: one factor of '*' must be a constant",
                    ))
                }
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Var(i) => {
                if let Some(n) = self.max_var {
                    if i > n {
                        return Err(err_at(
                            t.line,
                            t.col,
                            format!("variable x{i} out of range: operator has {n} coordinate(s)"),
                        ));
                    }
                }
                Ok(Expr::Var(i))
            }
            Tok::Minus => Ok(negate(self.factor()?)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "min" | "max" => {
                    self.expect(Tok::LParen)?;
                    let mut items = vec![self.expr()?];
                    while self.peek().tok == Tok::Comma {
                        self.bump();
                        items.push(self.expr()?);
                    }
                    if items.len() < 2 {
                        return Err(err_at(
                            t.line,
                            t.col,
                            format!("'{name}' needs at least two arguments"),
                        ));
                    }
                    self.expect(Tok::RParen)?;
                    Ok(if name == "min" {
                        Expr::Min(items)
                    } else {
                        Expr::Max(items)
                    })
                }
                "log" | "exp" | "h" => {
                    self.expect(Tok::LParen)?;
                    let e = self.expr()?;
                    if self.peek().tok == Tok::Comma {
                        let c = self.peek().clone();
                        return Err(err_at(
                            c.line,
                            c.col,
                            format!("'{name}' takes exactly one argument"),
                        ));
                    }
                    self.expect(Tok::RParen)?;
                    let boxed = Box::new(e);
                    Ok(match name.as_str() {
                        "log" => Expr::Log(boxed),
                        "exp" => Expr::Exp(boxed),
                        _ => Expr::Hfun(boxed),
                    })
                }
                _ => Err(err_at(
                    t.line,
                    t.col,
                    format!("unknown identifier '{name}'"),
                )),
            },
            other => Err(err_at(
                t.line,
                t.col,
                format!("expected an expression, found {other}"),
            )),
        }
    }
}

/// Sum-level negation: constants and scales fold their sign, everything else
/// is wrapped in `Scale(-1, _)`.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Scale(c, inner) => Expr::Scale(-c, inner),
        other => Expr::Scale(-1.0, Box::new(other)),
    }
}

/// Parses one coordinate expression. `max_var` bounds the variable indices
/// accepted; pass `None` to accept any index.
pub fn parse_expr(text: &str, max_var: Option<usize>) -> Result<Expr> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        max_var,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::Eof {
        return Err(err_at(
            t.line,
            t.col,
            format!("unexpected {} after expression", t.tok),
        ));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sum_of_var_and_const() {
        let e = parse_expr("x1 + 2", Some(1)).unwrap();
        assert_eq!(e, Expr::Sum(vec![Expr::Var(1), Expr::Const(2.0)]));
    }

    #[test]
    fn parses_reference_coordinate() {
        let e = parse_expr("x1 + h(min(x2, x3) - x1)", Some(3)).unwrap();
        let expected = Expr::Sum(vec![
            Expr::Var(1),
            Expr::Hfun(Box::new(Expr::Sum(vec![
                Expr::Min(vec![Expr::Var(2), Expr::Var(3)]),
                Expr::Scale(-1.0, Box::new(Expr::Var(1))),
            ]))),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_log_sum_exp_row() {
        let e = parse_expr("log(1*exp(x1) + 2*exp(x2))", Some(2)).unwrap();
        let expected = Expr::Log(Box::new(Expr::Sum(vec![
            Expr::Scale(1.0, Box::new(Expr::Exp(Box::new(Expr::Var(1))))),
            Expr::Scale(2.0, Box::new(Expr::Exp(Box::new(Expr::Var(2))))),
        ])));
        assert_eq!(e, expected);
    }

    #[test]
    fn precedence_minus_star_plus() {
        // -2 * x1 + 3: unary minus binds to the number, '*' before '+'.
        let e = parse_expr("-2 * x1 + 3", Some(1)).unwrap();
        assert_eq!(
            e,
            Expr::Sum(vec![
                Expr::Scale(-2.0, Box::new(Expr::Var(1))),
                Expr::Const(3.0)
            ])
        );
    }

    #[test]
    fn reports_position_of_unknown_identifier() {
        let err = parse_expr("x1 +\n foo(x1)", Some(1)).unwrap_err();
        match err {
            Error::Parse { line, col, msg } => {
                assert_eq!((line, col), (2, 2));
                assert!(msg.contains("foo"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_variable() {
        let err = parse_expr("x1 + x4", Some(3)).unwrap_err();
        assert!(matches!(err, Error::Parse { col: 6, .. }));
    }

    #[test]
    fn rejects_min_with_one_argument() {
        assert!(parse_expr("min(x1)", Some(1)).is_err());
    }

    #[test]
    fn rejects_nonlinear_product() {
        assert!(parse_expr("x1 * x1", Some(1)).is_err());
    }

    #[test]
    fn rejects_trailing_tokens() {
        assert!(parse_expr("x1 )", Some(1)).is_err());
        assert!(parse_expr("", Some(1)).is_err());
    }

    #[test]
    fn rejects_leading_zero_variable() {
        assert!(parse_expr("x01", Some(3)).is_err());
    }
}
