//! Parser for the specification DSL used for pre- and postconditions.
//!
//! Grammar: `true | false | forall x. φ | exists x. φ | φ and φ | φ or φ |
//! not φ | x < y | x = y | label(x) == 'c' | contains_factor("..") |
//! starts_with("..") | ends_with("..")`, plus parentheses.
//!
//! The factor/prefix/suffix sugar expands through a derived successor
//! predicate `succ(x,y) := x < y and not exists z. (x < z and z < y)`.

use crate::diag::{Category, Diagnostic, Error, Result, Span};
use crate::fo::{Formula, Sort};

struct P<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
    fresh: u32,
    bound: Vec<String>,
}

fn serr(msg: impl Into<String>, line: u32, col: u32) -> Error {
    Error::Parse(Diagnostic::new(Category::Syntax, msg, Span::new(line, col)))
}

impl<'a> P<'a> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        match c {
            Some('\n') => {
                self.line += 1;
                self.col = 1;
            }
            Some(_) => self.col += 1,
            None => {}
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        serr(msg, self.line, self.col)
    }

    fn word(&mut self) -> String {
        let mut s = String::new();
        while matches!(self.chars.peek(), Some(c) if c.is_alphanumeric() || *c == '_') {
            s.push(self.bump().unwrap());
        }
        s
    }

    fn peek_word(&mut self) -> String {
        // cheap lookahead: clone the iterator
        let saved = self.chars.clone();
        let w = self.word();
        self.chars = saved;
        w
    }

    fn eat(&mut self, tok: char) -> Result<()> {
        self.skip_ws();
        if self.chars.peek() == Some(&tok) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", tok)))
        }
    }

    fn fresh_var(&mut self) -> String {
        self.fresh += 1;
        format!("_s{}", self.fresh)
    }

    fn parse_formula(&mut self) -> Result<Formula> {
        self.skip_ws();
        let w = self.peek_word();
        if w == "forall" || w == "exists" {
            self.word();
            self.skip_ws();
            let v = self.word();
            if v.is_empty() || v.starts_with('_') {
                return Err(self.err("expected a variable name"));
            }
            self.eat('.')?;
            self.bound.push(v.clone());
            let body = self.parse_formula()?;
            self.bound.pop();
            return Ok(if w == "forall" {
                Formula::Forall(v, Sort::Pos, Box::new(body))
            } else {
                Formula::Exists(v, Sort::Pos, Box::new(body))
            });
        }
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Formula> {
        let mut lhs = self.parse_and()?;
        loop {
            self.skip_ws();
            if self.peek_word() == "or" {
                self.word();
                let rhs = self.parse_and()?;
                lhs = Formula::Or(vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_and(&mut self) -> Result<Formula> {
        let mut lhs = self.parse_unary()?;
        loop {
            self.skip_ws();
            if self.peek_word() == "and" {
                self.word();
                let rhs = self.parse_unary()?;
                lhs = Formula::And(vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Formula> {
        self.skip_ws();
        if self.peek_word() == "not" {
            self.word();
            let inner = self.parse_unary()?;
            return Ok(Formula::Not(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn quoted_string(&mut self) -> Result<String> {
        self.skip_ws();
        if self.bump() != Some('"') {
            return Err(self.err("expected a string literal"));
        }
        let mut s = String::new();
        loop {
            match self.bump() {
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => s.push(c),
                    None => return Err(self.err("unterminated string")),
                },
                Some(c) => s.push(c),
                None => return Err(self.err("unterminated string")),
            }
        }
    }

    fn quoted_char(&mut self) -> Result<char> {
        self.skip_ws();
        if self.bump() != Some('\'') {
            return Err(self.err("expected a character literal"));
        }
        let c = match self.bump() {
            Some('\\') => match self.bump() {
                Some('n') => '\n',
                Some('t') => '\t',
                Some(c) => c,
                None => return Err(self.err("unterminated character")),
            },
            Some(c) => c,
            None => return Err(self.err("unterminated character")),
        };
        if self.bump() != Some('\'') {
            return Err(self.err("unterminated character"));
        }
        Ok(c)
    }

    fn check_bound(&self, v: &str) -> Result<()> {
        if self.bound.iter().any(|b| b == v) {
            Ok(())
        } else {
            Err(serr(format!("unbound variable `{}`", v), self.line, self.col))
        }
    }

    fn parse_atom(&mut self) -> Result<Formula> {
        self.skip_ws();
        if self.chars.peek() == Some(&'(') {
            self.bump();
            let inner = self.parse_formula()?;
            self.eat(')')?;
            return Ok(inner);
        }
        let w = self.word();
        match w.as_str() {
            "true" => return Ok(Formula::True),
            "false" => return Ok(Formula::False),
            "label" => {
                self.eat('(')?;
                self.skip_ws();
                let v = self.word();
                self.check_bound(&v)?;
                self.eat(')')?;
                self.skip_ws();
                if self.bump() != Some('=') || self.bump() != Some('=') {
                    return Err(self.err("expected `==`"));
                }
                let c = self.quoted_char()?;
                return Ok(Formula::LetterAt(v, c));
            }
            "contains_factor" => {
                self.eat('(')?;
                let s = self.quoted_string()?;
                self.eat(')')?;
                return Ok(self.factor_formula(&s, false, false));
            }
            "starts_with" => {
                self.eat('(')?;
                let s = self.quoted_string()?;
                self.eat(')')?;
                return Ok(self.factor_formula(&s, true, false));
            }
            "ends_with" => {
                self.eat('(')?;
                let s = self.quoted_string()?;
                self.eat(')')?;
                return Ok(self.factor_formula(&s, false, true));
            }
            "" => return Err(self.err("expected a formula")),
            _ => {}
        }
        // variable comparison: v < u or v = u
        let v = w;
        self.check_bound(&v)?;
        self.skip_ws();
        match self.bump() {
            Some('<') => {
                self.skip_ws();
                let u = self.word();
                self.check_bound(&u)?;
                Ok(Formula::PosLt(v, u))
            }
            Some('=') => {
                self.skip_ws();
                let u = self.word();
                self.check_bound(&u)?;
                Ok(Formula::PosEq(v, u))
            }
            _ => Err(self.err("expected `<` or `=` after variable")),
        }
    }

    /// Derived successor: `x < y and not exists z. (x < z and z < y)`.
    fn succ(&mut self, x: &str, y: &str) -> Formula {
        let z = self.fresh_var();
        Formula::and2(
            Formula::PosLt(x.into(), y.into()),
            Formula::not(Formula::exists(
                z.clone(),
                Sort::Pos,
                Formula::and2(Formula::PosLt(x.into(), z.clone()), Formula::PosLt(z, y.into())),
            )),
        )
    }

    /// `contains_factor` / `starts_with` / `ends_with` expansion: a chain of
    /// successor positions carrying the given letters, anchored as requested.
    fn factor_formula(&mut self, s: &str, anchor_start: bool, anchor_end: bool) -> Formula {
        let letters: Vec<char> = s.chars().collect();
        if letters.is_empty() {
            return Formula::True;
        }
        let vars: Vec<String> = letters.iter().map(|_| self.fresh_var()).collect();
        let mut conjuncts = Vec::new();
        for (v, c) in vars.iter().zip(&letters) {
            conjuncts.push(Formula::LetterAt(v.clone(), *c));
        }
        for pair in vars.windows(2) {
            conjuncts.push(self.succ(&pair[0], &pair[1]));
        }
        if anchor_start {
            let z = self.fresh_var();
            conjuncts.push(Formula::not(Formula::exists(
                z.clone(),
                Sort::Pos,
                Formula::PosLt(z, vars[0].clone()),
            )));
        }
        if anchor_end {
            let z = self.fresh_var();
            conjuncts.push(Formula::not(Formula::exists(
                z.clone(),
                Sort::Pos,
                Formula::PosLt(vars[vars.len() - 1].clone(), z),
            )));
        }
        let mut body = Formula::and(conjuncts);
        for v in vars.into_iter().rev() {
            body = Formula::exists(v, Sort::Pos, body);
        }
        body
    }
}

/// Parse a closed specification formula.
pub fn parse_spec(text: &str) -> Result<Formula> {
    let mut p = P {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
        fresh: 0,
        bound: Vec::new(),
    };
    let f = p.parse_formula()?;
    p.skip_ws();
    if p.chars.peek().is_some() {
        return Err(p.err("trailing input after formula"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fo::{eval_formula, WordModel};

    fn holds(spec: &str, word: &str) -> bool {
        let f = parse_spec(spec).unwrap();
        let w: Vec<char> = word.chars().collect();
        eval_formula(&f, &WordModel::closed(&w, &[]))
    }

    #[test]
    fn contains_factor_is_the_factor_language() {
        for (w, expect) in [("cab", true), ("ab", true), ("ba", false), ("a", false), ("", false), ("axb", false)] {
            assert_eq!(holds("contains_factor(\"ab\")", w), expect, "word {:?}", w);
        }
    }

    #[test]
    fn true_has_qrank_zero() {
        let f = parse_spec("true").unwrap();
        assert_eq!(f.qrank(), 0);
        assert!(holds("true", ""));
    }

    #[test]
    fn ends_with_and_starts_with() {
        for (w, expect) in [("ba", true), ("a", true), ("ab", false), ("", false)] {
            assert_eq!(holds("ends_with(\"a\")", w), expect, "word {:?}", w);
        }
        for (w, expect) in [("ab", true), ("a", true), ("ba", false), ("", false)] {
            assert_eq!(holds("starts_with(\"a\")", w), expect, "word {:?}", w);
        }
    }

    #[test]
    fn quantifiers_and_comparisons() {
        // some position carries 'a' and everything before it carries 'a' too
        let spec = "exists x. (label(x) == 'a' and (forall y. (label(y) == 'a' or not y < x)))";
        assert!(holds(spec, "ab"));
        assert!(!holds(spec, "ba"));
        let simple = "forall x. label(x) == 'a'";
        assert!(holds(simple, "aaa"));
        assert!(!holds(simple, "ab"));
        assert!(holds(simple, ""));
    }

    #[test]
    fn unbound_variable_rejected() {
        assert!(parse_spec("x < y").is_err());
        assert!(parse_spec("exists x. x < y").is_err());
    }
}
