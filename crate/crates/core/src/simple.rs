//! Simple for-programs: the single-input-word program model the rewriter
//! targets. Loops range only over input positions, booleans are declared at
//! the program top or at a loop-body head and are never reset, labels are
//! compared only against constant characters.

use crate::ast::{CmpOp, Dir, Name};
use crate::diag::{Category, Diagnostic, Error, Result, Span};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SCond {
    True,
    False,
    Bool(Name),
    Not(Box<SCond>),
    And(Box<SCond>, Box<SCond>),
    Or(Box<SCond>, Box<SCond>),
    /// `label(i) == 'c'` (eq) or `label(i) != 'c'`.
    Label(Name, bool, char),
    Cmp(Name, CmpOp, Name),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SStmt {
    For { dir: Dir, var: Name, bools: Vec<Name>, body: Vec<SStmt> },
    If(SCond, Vec<SStmt>, Vec<SStmt>),
    SetTrue(Name),
    PrintLabel(Name),
    PrintChar(char),
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleProgram {
    pub bools: Vec<Name>,
    pub body: Vec<SStmt>,
}

/// Size, loop depth and boolean depth of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Metrics {
    pub size: usize,
    pub loop_depth: usize,
    pub bool_depth: usize,
}

// ---------------------------------------------------------------------------
// Interpreter
// ---------------------------------------------------------------------------

struct SEval<'w> {
    word: &'w [char],
    out: Vec<char>,
    bools: std::collections::HashMap<Name, bool>,
    poss: std::collections::HashMap<Name, usize>,
}

impl<'w> SEval<'w> {
    fn run(&mut self, stmts: &[SStmt]) -> Result<()> {
        for s in stmts {
            self.step(s)?;
        }
        Ok(())
    }

    fn step(&mut self, s: &SStmt) -> Result<()> {
        match s {
            SStmt::For { dir, var, bools, body } => {
                let order: Vec<usize> = match dir {
                    Dir::Fwd => (0..self.word.len()).collect(),
                    Dir::Bwd => (0..self.word.len()).rev().collect(),
                };
                for i in order {
                    self.poss.insert(var.clone(), i);
                    for b in bools {
                        if self.bools.insert(b.clone(), false).is_some() {
                            return Err(Error::Internal(format!("boolean `{}` redeclared", b)));
                        }
                    }
                    self.run(body)?;
                    for b in bools {
                        self.bools.remove(b);
                    }
                    self.poss.remove(var);
                }
                Ok(())
            }
            SStmt::If(c, t, e) => {
                if self.cond(c)? {
                    self.run(t)
                } else {
                    self.run(e)
                }
            }
            SStmt::SetTrue(b) => match self.bools.get_mut(b) {
                Some(cell) => {
                    *cell = true;
                    Ok(())
                }
                None => Err(Error::Internal(format!("boolean `{}` not in scope", b))),
            },
            SStmt::PrintLabel(i) => {
                let idx = *self
                    .poss
                    .get(i)
                    .ok_or_else(|| Error::Internal(format!("position `{}` not in scope", i)))?;
                self.out.push(self.word[idx]);
                Ok(())
            }
            SStmt::PrintChar(c) => {
                self.out.push(*c);
                Ok(())
            }
            SStmt::Skip => Ok(()),
        }
    }

    fn cond(&self, c: &SCond) -> Result<bool> {
        Ok(match c {
            SCond::True => true,
            SCond::False => false,
            SCond::Bool(b) => *self
                .bools
                .get(b)
                .ok_or_else(|| Error::Internal(format!("boolean `{}` not in scope", b)))?,
            SCond::Not(e) => !self.cond(e)?,
            SCond::And(l, r) => self.cond(l)? && self.cond(r)?,
            SCond::Or(l, r) => self.cond(l)? || self.cond(r)?,
            SCond::Label(i, eq, ch) => {
                let idx = *self
                    .poss
                    .get(i)
                    .ok_or_else(|| Error::Internal(format!("position `{}` not in scope", i)))?;
                (self.word[idx] == *ch) == *eq
            }
            SCond::Cmp(i, op, j) => {
                let a = *self
                    .poss
                    .get(i)
                    .ok_or_else(|| Error::Internal(format!("position `{}` not in scope", i)))?;
                let b = *self
                    .poss
                    .get(j)
                    .ok_or_else(|| Error::Internal(format!("position `{}` not in scope", j)))?;
                match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                }
            }
        })
    }
}

/// Run a simple program on a word.
pub fn eval_simple(sp: &SimpleProgram, word: &str) -> Result<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut ev = SEval {
        word: &chars,
        out: Vec::new(),
        bools: std::collections::HashMap::new(),
        poss: std::collections::HashMap::new(),
    };
    for b in &sp.bools {
        if ev.bools.insert(b.clone(), false).is_some() {
            return Err(Error::Internal(format!("boolean `{}` redeclared", b)));
        }
    }
    ev.run(&sp.body)?;
    Ok(ev.out.into_iter().collect())
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Metrics of a simple program. Size counts If/For/SetTrue/Print/Skip nodes;
/// boolean depth is the maximum number of booleans visible at any point.
pub fn metrics_simple(sp: &SimpleProgram) -> Metrics {
    let mut m = Metrics::default();
    walk_metrics(&sp.body, 0, sp.bools.len(), &mut m);
    m.bool_depth = m.bool_depth.max(sp.bools.len());
    m
}

fn walk_metrics(stmts: &[SStmt], loops: usize, visible: usize, m: &mut Metrics) {
    for s in stmts {
        match s {
            SStmt::For { bools, body, .. } => {
                m.size += 1;
                m.loop_depth = m.loop_depth.max(loops + 1);
                let inner = visible + bools.len();
                m.bool_depth = m.bool_depth.max(inner);
                walk_metrics(body, loops + 1, inner, m);
            }
            SStmt::If(_, t, e) => {
                m.size += 1;
                walk_metrics(t, loops, visible, m);
                walk_metrics(e, loops, visible, m);
            }
            SStmt::SetTrue(_) | SStmt::PrintLabel(_) | SStmt::PrintChar(_) | SStmt::Skip => {
                m.size += 1;
            }
        }
    }
}

/// Metrics of a high-level program: size counts If/For/Yield/Return/SetTrue/
/// Skip statements across all functions, Seq and lets are transparent, a
/// let-bool adds one to the boolean depth for its scope.
pub fn metrics_hl(p: &crate::ast::Program) -> Metrics {
    use crate::ast::{Stmt, StmtKind};
    let mut m = Metrics::default();
    fn walk(s: &Stmt, loops: usize, visible: usize, m: &mut Metrics) {
        m.bool_depth = m.bool_depth.max(visible);
        match &s.kind {
            StmtKind::If(_, t, e) => {
                m.size += 1;
                walk(t, loops, visible, m);
                walk(e, loops, visible, m);
            }
            StmtKind::Yield(_) | StmtKind::Return(_) => m.size += 1,
            StmtKind::SetTrue(_) | StmtKind::SetFalse(_) | StmtKind::Assign(..) => m.size += 1,
            StmtKind::Skip => m.size += 1,
            StmtKind::LetOut(_, _, body) => walk(body, loops, visible, m),
            StmtKind::LetBool(_, body) => walk(body, loops, visible + 1, m),
            StmtKind::For { body, .. } => {
                m.size += 1;
                m.loop_depth = m.loop_depth.max(loops + 1);
                walk(body, loops + 1, visible, m);
            }
            StmtKind::Seq(ss) => ss.iter().for_each(|s| walk(s, loops, visible, m)),
        }
    }
    for f in &p.functions {
        walk(&f.body, 0, 0, &mut m);
    }
    m
}

// ---------------------------------------------------------------------------
// Printer (the textual format of the compiler's `--emit simple` output)
// ---------------------------------------------------------------------------

pub fn print_simple(sp: &SimpleProgram) -> String {
    let mut out = String::new();
    if !sp.bools.is_empty() {
        let _ = writeln!(out, "let {} := false in", sp.bools.join(", "));
    }
    write_stmts(&mut out, &sp.body, 0);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_stmts(out: &mut String, stmts: &[SStmt], level: usize) {
    for s in stmts {
        write_sstmt(out, s, level);
    }
}

fn escape_char(c: char) -> String {
    match c {
        '\'' => "\\'".to_string(),
        '\\' => "\\\\".to_string(),
        '\n' => "\\n".to_string(),
        '\t' => "\\t".to_string(),
        c => c.to_string(),
    }
}

fn write_sstmt(out: &mut String, s: &SStmt, level: usize) {
    match s {
        SStmt::For { dir, var, bools, body } => {
            indent(out, level);
            let iter = match dir {
                Dir::Fwd => "input".to_string(),
                Dir::Bwd => "reversed(input)".to_string(),
            };
            let _ = writeln!(out, "for {} in {} do", var, iter);
            if !bools.is_empty() {
                indent(out, level + 1);
                let _ = writeln!(out, "let {} := false in", bools.join(", "));
            }
            write_stmts(out, body, level + 1);
            indent(out, level);
            out.push_str("done\n");
        }
        SStmt::If(c, t, e) => {
            indent(out, level);
            let _ = writeln!(out, "if {} then", print_cond(c));
            write_stmts(out, t, level + 1);
            if !e.is_empty() {
                indent(out, level);
                out.push_str("else\n");
                write_stmts(out, e, level + 1);
            }
            indent(out, level);
            out.push_str("endif\n");
        }
        SStmt::SetTrue(b) => {
            indent(out, level);
            let _ = writeln!(out, "{} := true", b);
        }
        SStmt::PrintLabel(i) => {
            indent(out, level);
            let _ = writeln!(out, "print label({})", i);
        }
        SStmt::PrintChar(c) => {
            indent(out, level);
            let _ = writeln!(out, "print '{}'", escape_char(*c));
        }
        SStmt::Skip => {
            indent(out, level);
            out.push_str("skip\n");
        }
    }
}

fn cmp_op_str(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        CmpOp::Ne => "!=",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

fn print_cond(c: &SCond) -> String {
    match c {
        SCond::True => "true".to_string(),
        SCond::False => "false".to_string(),
        SCond::Bool(b) => b.clone(),
        SCond::Not(e) => format!("not ({})", print_cond(e)),
        SCond::And(l, r) => format!("({}) and ({})", print_cond(l), print_cond(r)),
        SCond::Or(l, r) => format!("({}) or ({})", print_cond(l), print_cond(r)),
        SCond::Label(i, true, ch) => format!("label({}) == '{}'", i, escape_char(*ch)),
        SCond::Label(i, false, ch) => format!("label({}) != '{}'", i, escape_char(*ch)),
        SCond::Cmp(i, op, j) => format!("{} {} {}", i, cmp_op_str(*op), j),
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct SParser {
    toks: Vec<(STok, Span)>,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum STok {
    Ident(String),
    CharLit(char),
    LParen,
    RParen,
    Comma,
    Assign,
    EqEq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
    Eof,
}

fn serr(msg: impl Into<String>, span: Span) -> Error {
    Error::Parse(Diagnostic::new(Category::Syntax, msg, span))
}

fn slex(src: &str) -> Result<Vec<(STok, Span)>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let bump = |i: &mut usize, line: &mut u32, col: &mut u32| {
        if chars.get(*i) == Some(&'\n') {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let span = Span::new(line, col);
        let c = chars[i];
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' && chars.get(i + 1) != Some(&'\'') {
            // line comment (but a quoted '#' is a literal)
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        let tok = match c {
            '(' => {
                bump(&mut i, &mut line, &mut col);
                STok::LParen
            }
            ')' => {
                bump(&mut i, &mut line, &mut col);
                STok::RParen
            }
            ',' => {
                bump(&mut i, &mut line, &mut col);
                STok::Comma
            }
            ':' => {
                bump(&mut i, &mut line, &mut col);
                if chars.get(i) == Some(&'=') {
                    bump(&mut i, &mut line, &mut col);
                    STok::Assign
                } else {
                    return Err(serr("expected `:=`", span));
                }
            }
            '=' => {
                bump(&mut i, &mut line, &mut col);
                if chars.get(i) == Some(&'=') {
                    bump(&mut i, &mut line, &mut col);
                    STok::EqEq
                } else {
                    return Err(serr("expected `==`", span));
                }
            }
            '!' => {
                bump(&mut i, &mut line, &mut col);
                if chars.get(i) == Some(&'=') {
                    bump(&mut i, &mut line, &mut col);
                    STok::Ne
                } else {
                    return Err(serr("expected `!=`", span));
                }
            }
            '<' => {
                bump(&mut i, &mut line, &mut col);
                if chars.get(i) == Some(&'=') {
                    bump(&mut i, &mut line, &mut col);
                    STok::Le
                } else {
                    STok::Lt
                }
            }
            '>' => {
                bump(&mut i, &mut line, &mut col);
                if chars.get(i) == Some(&'=') {
                    bump(&mut i, &mut line, &mut col);
                    STok::Ge
                } else {
                    STok::Gt
                }
            }
            '\'' => {
                bump(&mut i, &mut line, &mut col);
                let ch = match chars.get(i) {
                    Some('\\') => {
                        bump(&mut i, &mut line, &mut col);
                        let e = chars.get(i).copied().ok_or_else(|| serr("unterminated literal", span))?;
                        bump(&mut i, &mut line, &mut col);
                        match e {
                            'n' => '\n',
                            't' => '\t',
                            '\\' => '\\',
                            '\'' => '\'',
                            '"' => '"',
                            _ => return Err(serr("invalid escape", span)),
                        }
                    }
                    Some(&c) => {
                        bump(&mut i, &mut line, &mut col);
                        c
                    }
                    None => return Err(serr("unterminated literal", span)),
                };
                if chars.get(i) != Some(&'\'') {
                    return Err(serr("unterminated character literal", span));
                }
                bump(&mut i, &mut line, &mut col);
                STok::CharLit(ch)
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut s = String::new();
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    s.push(chars[i]);
                    bump(&mut i, &mut line, &mut col);
                }
                STok::Ident(s)
            }
            other => return Err(serr(format!("unexpected character `{}`", other), span)),
        };
        out.push((tok, span));
    }
    out.push((STok::Eof, Span::new(line, col)));
    Ok(out)
}

impl SParser {
    fn peek(&self) -> &STok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> STok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), STok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(serr(format!("expected `{}`", kw), self.span()))
        }
    }

    fn expect(&mut self, t: STok) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(serr(format!("unexpected token (wanted {:?})", t), self.span()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            STok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(serr("expected identifier", self.span())),
        }
    }

    fn parse_decls(&mut self) -> Result<Vec<Name>> {
        let mut names = Vec::new();
        if self.at_kw("let") {
            self.bump();
            loop {
                names.push(self.ident()?);
                if *self.peek() == STok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(STok::Assign)?;
            self.expect_kw("false")?;
            self.expect_kw("in")?;
        }
        Ok(names)
    }

    fn at_stmt(&self) -> bool {
        match self.peek() {
            STok::Ident(s) => matches!(s.as_str(), "for" | "if" | "print" | "skip") || !is_skw(s),
            _ => false,
        }
    }

    fn parse_stmts(&mut self) -> Result<Vec<SStmt>> {
        let mut out = Vec::new();
        while self.at_stmt() {
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    fn parse_stmt(&mut self) -> Result<SStmt> {
        if self.at_kw("for") {
            self.bump();
            let var = self.ident()?;
            self.expect_kw("in")?;
            let dir = if self.at_kw("reversed") {
                self.bump();
                self.expect(STok::LParen)?;
                self.expect_kw("input")?;
                self.expect(STok::RParen)?;
                Dir::Bwd
            } else {
                self.expect_kw("input")?;
                Dir::Fwd
            };
            self.expect_kw("do")?;
            let bools = self.parse_decls()?;
            let body = self.parse_stmts()?;
            self.expect_kw("done")?;
            return Ok(SStmt::For { dir, var, bools, body });
        }
        if self.at_kw("if") {
            self.bump();
            let c = self.parse_cond()?;
            self.expect_kw("then")?;
            let t = self.parse_stmts()?;
            let e = if self.at_kw("else") {
                self.bump();
                self.parse_stmts()?
            } else {
                Vec::new()
            };
            self.expect_kw("endif")?;
            return Ok(SStmt::If(c, t, e));
        }
        if self.at_kw("print") {
            self.bump();
            if self.at_kw("label") {
                self.bump();
                self.expect(STok::LParen)?;
                let v = self.ident()?;
                self.expect(STok::RParen)?;
                return Ok(SStmt::PrintLabel(v));
            }
            match self.bump() {
                STok::CharLit(c) => return Ok(SStmt::PrintChar(c)),
                _ => return Err(serr("expected `label(..)` or a character", self.span())),
            }
        }
        if self.at_kw("skip") {
            self.bump();
            return Ok(SStmt::Skip);
        }
        let name = self.ident()?;
        self.expect(STok::Assign)?;
        self.expect_kw("true")?;
        Ok(SStmt::SetTrue(name))
    }

    fn parse_cond(&mut self) -> Result<SCond> {
        let mut lhs = self.parse_cond_and()?;
        while self.at_kw("or") {
            self.bump();
            let rhs = self.parse_cond_and()?;
            lhs = SCond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_cond_and(&mut self) -> Result<SCond> {
        let mut lhs = self.parse_cond_atom()?;
        while self.at_kw("and") {
            self.bump();
            let rhs = self.parse_cond_atom()?;
            lhs = SCond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_cond_atom(&mut self) -> Result<SCond> {
        if self.at_kw("not") {
            self.bump();
            let inner = self.parse_cond_atom()?;
            return Ok(SCond::Not(Box::new(inner)));
        }
        if *self.peek() == STok::LParen {
            self.bump();
            let inner = self.parse_cond()?;
            self.expect(STok::RParen)?;
            return Ok(inner);
        }
        if self.at_kw("true") {
            self.bump();
            return Ok(SCond::True);
        }
        if self.at_kw("false") {
            self.bump();
            return Ok(SCond::False);
        }
        if self.at_kw("label") {
            self.bump();
            self.expect(STok::LParen)?;
            let v = self.ident()?;
            self.expect(STok::RParen)?;
            let eq = match self.bump() {
                STok::EqEq => true,
                STok::Ne => false,
                _ => return Err(serr("expected `==` or `!=` after label(..)", self.span())),
            };
            match self.bump() {
                STok::CharLit(c) => return Ok(SCond::Label(v, eq, c)),
                _ => return Err(serr("labels compare only to constant characters", self.span())),
            }
        }
        let name = self.ident()?;
        let op = match self.peek() {
            STok::EqEq => Some(CmpOp::Eq),
            STok::Ne => Some(CmpOp::Ne),
            STok::Lt => Some(CmpOp::Lt),
            STok::Le => Some(CmpOp::Le),
            STok::Gt => Some(CmpOp::Gt),
            STok::Ge => Some(CmpOp::Ge),
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let rhs = self.ident()?;
                Ok(SCond::Cmp(name, op, rhs))
            }
            None => Ok(SCond::Bool(name)),
        }
    }
}

fn is_skw(s: &str) -> bool {
    matches!(
        s,
        "for" | "in" | "input" | "do" | "done" | "reversed" | "let" | "false" | "true" | "if"
            | "then" | "else" | "endif" | "skip" | "print" | "label" | "not" | "and" | "or"
    )
}

/// Parse the textual simple-program format.
pub fn parse_simple(text: &str) -> Result<SimpleProgram> {
    let toks = slex(text)?;
    let mut p = SParser { toks, pos: 0 };
    let bools = p.parse_decls()?;
    let body = p.parse_stmts()?;
    if *p.peek() != STok::Eof {
        return Err(serr("trailing input after program", p.span()));
    }
    Ok(SimpleProgram { bools, body })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The word-reversal program: reverses every space-separated word.
    pub const REVERSE_WORDS: &str = r#"
let seen_space_top := false in
for i in input do
    let seen_space := false in
    if label(i) == ' ' then
        for j in reversed(input) do
            if j < i then
                if label(j) == ' ' then
                    seen_space := true
                endif
                if not (seen_space) then
                    print label(j)
                endif
            endif
        done
        print ' '
    endif
done
for j in reversed(input) do
    if label(j) == ' ' then
        seen_space_top := true
    endif
    if not (seen_space_top) then
        print label(j)
    endif
done
"#;

    #[test]
    fn reverse_words_example() {
        let sp = parse_simple(REVERSE_WORDS).unwrap();
        assert_eq!(eval_simple(&sp, "hello world").unwrap(), "olleh dlrow");
        assert_eq!(eval_simple(&sp, "").unwrap(), "");
        assert_eq!(eval_simple(&sp, "ab").unwrap(), "ba");
    }

    #[test]
    fn identity_on_empty_word() {
        let sp = parse_simple("for i in input do\n print label(i)\ndone\n").unwrap();
        assert_eq!(eval_simple(&sp, "").unwrap(), "");
        assert_eq!(eval_simple(&sp, "xyz").unwrap(), "xyz");
    }

    #[test]
    fn print_parse_round_trip() {
        let sp = parse_simple(REVERSE_WORDS).unwrap();
        let text = print_simple(&sp);
        let sp2 = parse_simple(&text).unwrap();
        assert_eq!(sp, sp2);
    }

    #[test]
    fn metrics_of_empty_program() {
        let sp = SimpleProgram { bools: vec![], body: vec![] };
        let m = metrics_simple(&sp);
        assert_eq!((m.size, m.loop_depth, m.bool_depth), (0, 0, 0));
    }

    #[test]
    fn metrics_counts_and_depths() {
        let sp = parse_simple(REVERSE_WORDS).unwrap();
        let m = metrics_simple(&sp);
        assert_eq!(m.loop_depth, 2);
        assert_eq!(m.bool_depth, 2); // seen_space_top + seen_space
        assert!(m.size > 10);
    }
}
