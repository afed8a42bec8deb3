use thiserror::Error;

use super::{Estimand, ProbAtom, Term, VarRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at offset {offset}: {message}")]
pub struct ParseError {
    /// Character offset into the input.
    pub offset: usize,
    pub message: String,
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_value_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+')
}

impl Parser {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n
            && self.chars[self.pos..self.pos + n]
                .iter()
                .copied()
                .eq(s.chars())
        {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_name_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a variable name");
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn sum_binders(&mut self) -> Result<Option<Vec<String>>, ParseError> {
        if !(self.eat("Σ_") || self.eat("sum_")) {
            return Ok(None);
        }
        if self.eat("{") {
            let mut vars = vec![self.name()?];
            while self.eat(",") {
                vars.push(self.name()?);
            }
            self.expect("}")?;
            Ok(Some(vars))
        } else {
            Ok(Some(vec![self.name()?]))
        }
    }

    fn expr(&mut self) -> Result<Estimand, ParseError> {
        if let Some(vars) = self.sum_binders()? {
            let body = self.expr()?;
            return Ok(Estimand::sum_over_all(&vars, body));
        }
        let mut left = self.quot()?;
        while self.eat("-") {
            let right = if let Some(vars) = self.sum_binders()? {
                let body = self.expr()?;
                Estimand::sum_over_all(&vars, body)
            } else {
                self.quot()?
            };
            left = Estimand::difference(left, right);
        }
        Ok(left)
    }

    fn quot(&mut self) -> Result<Estimand, ParseError> {
        let mut left = self.prod()?;
        while self.eat("/") {
            let right = self.prod()?;
            left = Estimand::quotient(left, right);
        }
        Ok(left)
    }

    fn prod(&mut self) -> Result<Estimand, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.eat("·") {
            factors.push(self.factor()?);
        }
        Ok(Estimand::product(factors))
    }

    fn factor(&mut self) -> Result<Estimand, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some('P') => self.atom().map(Estimand::Atom),
            _ => self.err("expected `P(` or `(`"),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let name = self.name()?;
        let proxy = self.chars.get(self.pos) == Some(&'*');
        if proxy {
            self.pos += 1;
        }
        let value = if self.eat("=") {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.chars.len() && is_value_char(self.chars[self.pos]) {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("expected a value after `=`");
            }
            Some(self.chars[start..self.pos].iter().collect())
        } else {
            None
        };
        Ok(Term {
            var: VarRef { name, proxy },
            value,
        })
    }

    fn atom(&mut self) -> Result<ProbAtom, ParseError> {
        self.expect("P")?;
        self.expect("(")?;
        let mut targets = vec![self.term()?];
        while self.eat(",") {
            targets.push(self.term()?);
        }
        let mut atom = ProbAtom::new(targets, Vec::new());
        if self.eat("|") {
            loop {
                if self.eat("do(") {
                    atom.do_vars.push(self.term()?);
                    while self.eat(",") {
                        atom.do_vars.push(self.term()?);
                    }
                    self.expect(")")?;
                } else {
                    atom.conditions.push(self.term()?);
                }
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(atom)
    }
}

/// Parses canonical estimand text (and a few looser spellings: `sum_{..}`
/// for `Σ_{..}`, arbitrary whitespace).
pub fn parse_estimand(text: &str) -> Result<Estimand, ParseError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return p.err("trailing input");
    }
    for a in e.atoms() {
        a.validate().map_err(|err| ParseError {
            offset: 0,
            message: err.to_string(),
        })?;
    }
    Ok(e)
}
