//! Recursive descent parser for component maps.
//!
//! ```text
//! map       ::= component (sep component)*        sep is ';' or a newline
//! component ::= 'g' INDEX '=' expr
//! expr      ::= term (('+' | '-') term)*
//! term      ::= unary (('*' | '/') unary)*
//! unary     ::= '-' unary | power
//! power     ::= atom ('^' '-'? INTEGER)?
//! atom      ::= NUMBER | 'x' INDEX | '(' expr ')'
//!             | ('min' | 'max') '(' expr ',' expr ')'
//! ```

use super::expr::{BinOp, Expr};
use super::MapError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Newline,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> MapError {
    MapError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>, MapError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            out.push(Token {
                tok: Tok::Newline,
                line,
                col,
            });
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| syntax(l0, c0, format!("malformed number '{s}'")))?;
            out.push(Token {
                tok: Tok::Num(v),
                line: l0,
                col: c0,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
        } else if "+-*/^(),=;".contains(c) {
            i += 1;
            out.push(Token {
                tok: Tok::Sym(c),
                line: l0,
                col: c0,
            });
        } else {
            return Err(syntax(l0, c0, format!("unexpected character '{c}'")));
        }
        col += i - start;
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> MapError {
        let t = self.peek();
        syntax(t.line, t.col, message)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), MapError> {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(format!("expected '{c}'")))
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek().tok, Tok::Sym(';') | Tok::Newline) {
            self.bump();
        }
    }

    fn components(&mut self) -> Result<Vec<(usize, Expr)>, MapError> {
        let mut out = Vec::new();
        self.skip_separators();
        while self.peek().tok != Tok::End {
            let t = self.bump();
            let index = match &t.tok {
                Tok::Ident(name) => indexed(name, 'g'),
                _ => None,
            }
            .ok_or_else(|| syntax(t.line, t.col, "expected a component such as 'g0'"))?;
            if index > self.n {
                return Err(syntax(
                    t.line,
                    t.col,
                    format!("component g{index} exceeds dimension {}", self.n),
                ));
            }
            if out.iter().any(|(i, _)| *i == index) {
                return Err(syntax(t.line, t.col, format!("component g{index} defined twice")));
            }
            self.expect_sym('=')?;
            let e = self.expr()?;
            out.push((index, e));
            match self.peek().tok {
                Tok::Sym(';') | Tok::Newline => self.skip_separators(),
                Tok::End => {}
                _ => return Err(self.err_here("expected ';' or end of component")),
            }
        }
        Ok(out)
    }

    fn expr(&mut self) -> Result<Expr, MapError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, MapError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, MapError> {
        if self.peek().tok == Tok::Sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, MapError> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let negative = if self.peek().tok == Tok::Sym('-') {
            self.bump();
            true
        } else {
            false
        };
        let t = self.bump();
        match t.tok {
            Tok::Num(v) if v.fract() == 0.0 && v <= i32::MAX as f64 => {
                let k = v as i32;
                Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
            }
            _ => Err(syntax(t.line, t.col, "exponent must be an integer literal")),
        }
    }

    fn atom(&mut self) -> Result<Expr, MapError> {
        let t = self.bump();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Tok::Ident(name) if name == "min" || name == "max" => {
                self.expect_sym('(')?;
                let a = self.expr()?;
                self.expect_sym(',')?;
                let b = self.expr()?;
                self.expect_sym(')')?;
                Ok(if name == "min" {
                    Expr::Min(Box::new(a), Box::new(b))
                } else {
                    Expr::Max(Box::new(a), Box::new(b))
                })
            }
            Tok::Ident(name) => match indexed(name, 'x') {
                Some(i) if i <= self.n => Ok(Expr::Var(i)),
                Some(i) => Err(syntax(
                    t.line,
                    t.col,
                    format!("variable x{i} exceeds dimension {}", self.n),
                )),
                None => Err(syntax(t.line, t.col, format!("unknown name '{name}'"))),
            },
            Tok::End => Err(syntax(t.line, t.col, "unexpected end of input")),
            _ => Err(syntax(t.line, t.col, "expected a number, variable or '('")),
        }
    }
}

/// Parses names like `g12` / `x3` into their index.
fn indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

/// Whether `text` looks like a component list rather than a builtin.
pub(super) fn is_component_list(text: &str) -> bool {
    let first = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let head: String = first
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
        .collect();
    indexed(&head, 'g').is_some()
}

/// Parses a component list into `n + 1` expressions ordered by index.
pub(super) fn parse_components(text: &str, n: usize) -> Result<Vec<Expr>, MapError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        n,
    };
    let mut comps = p.components()?;
    if comps.len() != n + 1 {
        return Err(MapError::Arity {
            expected: n + 1,
            got: comps.len(),
        });
    }
    comps.sort_by_key(|(i, _)| *i);
    Ok(comps.into_iter().map(|(_, e)| e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Expr {
        parse_components(&format!("g0 = {text}; g1 = 0"), 1).unwrap().remove(0)
    }

    #[test]
    fn precedence_and_associativity() {
        let x = [2.0, 3.0];
        assert_eq!(one("1 + 2 * 3").eval(&x), 7.0);
        assert_eq!(one("8 - 3 - 2").eval(&x), 3.0);
        assert_eq!(one("8 / 4 / 2").eval(&x), 1.0);
        assert_eq!(one("-x0^2").eval(&x), -4.0);
        assert_eq!(one("(-x0)^2").eval(&x), 4.0);
        assert_eq!(one("x1^-1").eval(&x), 1.0 / 3.0);
        assert_eq!(one("min(x0, x1) + max(x0, 1e1)").eval(&x), 12.0);
        assert_eq!(one(".5 * x0").eval(&x), 1.0);
    }

    #[test]
    fn error_positions() {
        let err = parse_components("g0 = x0\ng1 = (x1", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { line: 2, .. }), "{err:?}");
        let err = parse_components("g0 = x0 $ 1; g1 = 0", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { line: 1, col: 9, .. }), "{err:?}");
        let err = parse_components("g0 = x0^0.5; g1 = 0", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { .. }));
        let err = parse_components("g0 = x7; g1 = 0", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { .. }));
        let err = parse_components("g0 = x0; g0 = 0", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { .. }));
        let err = parse_components("g0 = sin(x0); g1 = 0", 1).unwrap_err();
        assert!(matches!(err, MapError::Syntax { .. }));
    }

    #[test]
    fn newlines_and_comments_separate_components() {
        let comps = parse_components("# rotation\ng1 = x0\n\ng0 = x1;\n", 1).unwrap();
        assert_eq!(comps, vec![Expr::Var(1), Expr::Var(0)]);
    }

    #[test]
    fn leading_comments_still_mark_a_component_list() {
        assert!(is_component_list("# note\n\n  g0 = x1"));
        assert!(!is_component_list("# note\nrotate k=1"));
    }

    #[test]
    fn arity() {
        assert_eq!(
            parse_components("g0=x0", 2).unwrap_err(),
            MapError::Arity { expected: 3, got: 1 }
        );
    }
}
