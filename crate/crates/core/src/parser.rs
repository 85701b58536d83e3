//! Parser for the `.pr` surface syntax.
//!
//! The concrete grammar follows the listing style used throughout the sample
//! programs: `def f(x : [Char] with (i,j)) : [Char] :=`, `for (i,c) in
//! enumerate(e) do ... done`, `let mut b := False in`, `if .. then .. else ..
//! endif`. Character literals use single quotes, string literals (sugar for
//! constant lists of characters) double quotes. Position comparisons use
//! `== != < <= > >=`; literal equality between words uses `===`.

use crate::ast::*;
use crate::diag::{Category, Diagnostic, Error, Result, Span};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    CharLit(char),
    StrLit(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Assign, // :=
    TripleEq,
    EqEq,
    Ne,
    Le,
    Ge,
    Lt,
    Gt,
    Implies, // =>
    Iff,     // <=>
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{}`", s),
            Tok::CharLit(c) => write!(f, "'{}'", c),
            Tok::StrLit(s) => write!(f, "\"{}\"", s),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Assign => write!(f, "`:=`"),
            Tok::TripleEq => write!(f, "`===`"),
            Tok::EqEq => write!(f, "`==`"),
            Tok::Ne => write!(f, "`!=`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Implies => write!(f, "`=>`"),
            Tok::Iff => write!(f, "`<=>`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

struct Lexer<'a> {
    src: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

fn err(msg: impl Into<String>, span: Span) -> Error {
    Error::Parse(Diagnostic::new(Category::Syntax, msg, span))
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.next();
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

    fn read_escaped(&mut self, span: Span) -> Result<char> {
        match self.bump() {
            Some('\\') => match self.bump() {
                Some('n') => Ok('\n'),
                Some('t') => Ok('\t'),
                Some('\\') => Ok('\\'),
                Some('\'') => Ok('\''),
                Some('"') => Ok('"'),
                _ => Err(err("invalid escape sequence", span)),
            },
            Some(c) => Ok(c),
            None => Err(err("unterminated literal", span)),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, Span)>> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.src.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    // line comment
                    while let Some(&c) = self.src.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let span = Span::new(self.line, self.col);
            let c = match self.src.peek() {
                Some(&c) => c,
                None => {
                    out.push((Tok::Eof, span));
                    return Ok(out);
                }
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                ':' => {
                    self.bump();
                    if self.src.peek() == Some(&'=') {
                        self.bump();
                        Tok::Assign
                    } else {
                        Tok::Colon
                    }
                }
                '=' => {
                    self.bump();
                    match self.src.peek() {
                        Some('=') => {
                            self.bump();
                            if self.src.peek() == Some(&'=') {
                                self.bump();
                                Tok::TripleEq
                            } else {
                                Tok::EqEq
                            }
                        }
                        Some('>') => {
                            self.bump();
                            Tok::Implies
                        }
                        _ => return Err(err("expected `==`, `===` or `=>`", span)),
                    }
                }
                '!' => {
                    self.bump();
                    if self.src.peek() == Some(&'=') {
                        self.bump();
                        Tok::Ne
                    } else {
                        return Err(err("expected `!=`", span));
                    }
                }
                '<' => {
                    self.bump();
                    if self.src.peek() == Some(&'=') {
                        self.bump();
                        if self.src.peek() == Some(&'>') {
                            self.bump();
                            Tok::Iff
                        } else {
                            Tok::Le
                        }
                    } else {
                        Tok::Lt
                    }
                }
                '>' => {
                    self.bump();
                    if self.src.peek() == Some(&'=') {
                        self.bump();
                        Tok::Ge
                    } else {
                        Tok::Gt
                    }
                }
                '\'' => {
                    self.bump();
                    let ch = self.read_escaped(span)?;
                    if self.bump() != Some('\'') {
                        return Err(err("unterminated character literal", span));
                    }
                    Tok::CharLit(ch)
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.src.peek() {
                            Some('"') => {
                                self.bump();
                                break;
                            }
                            Some(_) => s.push(self.read_escaped(span)?),
                            None => return Err(err("unterminated string literal", span)),
                        }
                    }
                    Tok::StrLit(s)
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let mut s = String::new();
                    while let Some(&c) = self.src.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                other => return Err(err(format!("unexpected character `{}`", other), span)),
            };
            out.push((tok, span));
        }
    }
}

const KEYWORDS: &[&str] = &[
    "def", "for", "in", "do", "done", "if", "then", "else", "endif", "let", "mut", "yield",
    "return", "True", "False", "and", "or", "not", "enumerate", "reversed", "skip", "with",
    "Bool", "Char", "input", "print", "label",
];

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        if self.pos + 1 < self.toks.len() {
            &self.toks[self.pos + 1].0
        } else {
            &self.toks[self.toks.len() - 1].0
        }
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<Span> {
        let span = self.span();
        if *self.peek() == t {
            self.bump();
            Ok(span)
        } else {
            Err(err(format!("expected {}, found {}", t, self.peek()), span))
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Span> {
        let span = self.span();
        if self.at_kw(kw) {
            self.bump();
            Ok(span)
        } else {
            Err(err(format!("expected `{}`, found {}", kw, self.peek()), span))
        }
    }

    fn ident(&mut self) -> Result<(Name, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                if KEYWORDS.contains(&s.as_str()) {
                    return Err(err(format!("`{}` is a keyword", s), span));
                }
                if s.starts_with("__") {
                    return Err(err("identifiers starting with `__` are reserved", span));
                }
                self.bump();
                Ok((s, span))
            }
            other => Err(err(format!("expected identifier, found {}", other), span)),
        }
    }

    fn parse_type(&mut self) -> Result<TypeAnn> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) if s == "Bool" => {
                self.bump();
                Ok(TypeAnn::Bool)
            }
            Tok::Ident(s) if s == "Char" => {
                self.bump();
                Ok(TypeAnn::Out(0))
            }
            Tok::LBracket => {
                self.bump();
                let inner = self.parse_type()?;
                self.expect(Tok::RBracket)?;
                match inner {
                    TypeAnn::Out(n) => Ok(TypeAnn::Out(n + 1)),
                    TypeAnn::Bool => Err(err("lists of booleans are not a type", span)),
                }
            }
            other => Err(err(format!("expected a type, found {}", other), span)),
        }
    }

    fn parse_program(&mut self) -> Result<Program> {
        let mut functions = Vec::new();
        if !self.at_kw("def") {
            return Err(err("expected function definition", self.span()));
        }
        while self.at_kw("def") {
            functions.push(self.parse_fundef()?);
        }
        if *self.peek() != Tok::Eof {
            return Err(err(format!("expected `def` or end of input, found {}", self.peek()), self.span()));
        }
        let main = if functions.iter().any(|f| f.name == "main") {
            "main".to_string()
        } else {
            functions.last().unwrap().name.clone()
        };
        Ok(Program { functions, main })
    }

    fn parse_fundef(&mut self) -> Result<FunDef> {
        let span = self.expect_kw("def")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (pname, pspan) = self.ident()?;
                self.expect(Tok::Colon)?;
                let ty = self.parse_type()?;
                let mut positions = Vec::new();
                if self.at_kw("with") {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    loop {
                        positions.push(self.ident()?.0);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                params.push(Param { name: pname, ty, positions, span: pspan });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Colon)?;
        let ret = self.parse_type()?;
        self.expect(Tok::Assign)?;
        let body = self.parse_block()?;
        Ok(FunDef { name, params, ret, body, span })
    }

    /// True when the current token can start a statement.
    fn at_stmt_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                matches!(s.as_str(), "for" | "if" | "yield" | "return" | "let" | "skip")
                    || (!KEYWORDS.contains(&s.as_str()) && *self.peek2() == Tok::Assign)
            }
            _ => false,
        }
    }

    /// A block is a maximal sequence of statements; `let` scopes over the rest
    /// of its block.
    fn parse_block(&mut self) -> Result<Stmt> {
        let mut items: Vec<Stmt> = Vec::new();
        while self.at_stmt_start() {
            let span = self.span();
            if self.at_kw("let") {
                self.bump();
                let stmt = if self.at_kw("mut") {
                    self.bump();
                    let (name, _) = self.ident()?;
                    self.expect(Tok::Assign)?;
                    self.expect_kw("False")?;
                    self.expect_kw("in")?;
                    let body = self.parse_block()?;
                    Stmt::at(StmtKind::LetBool(name, Box::new(body)), span)
                } else {
                    let (name, _) = self.ident()?;
                    self.expect(Tok::Assign)?;
                    let value = self.parse_oexpr()?;
                    self.expect_kw("in")?;
                    let body = self.parse_block()?;
                    Stmt::at(StmtKind::LetOut(name, value, Box::new(body)), span)
                };
                items.push(stmt);
                break; // the let consumed the rest of the block
            }
            items.push(self.parse_stmt()?);
        }
        match items.len() {
            0 => Err(err(format!("expected a statement, found {}", self.peek()), self.span())),
            1 => Ok(items.pop().unwrap()),
            _ => Ok(Stmt::new(StmtKind::Seq(items))),
        }
    }

    fn parse_stmt(&mut self) -> Result<Stmt> {
        let span = self.span();
        if self.at_kw("for") {
            self.bump();
            self.expect(Tok::LParen)?;
            let (pos, _) = self.ident()?;
            self.expect(Tok::Comma)?;
            let (elem, _) = self.ident()?;
            self.expect(Tok::RParen)?;
            self.expect_kw("in")?;
            let (dir, subject) = if self.at_kw("reversed") {
                self.bump();
                self.expect(Tok::LParen)?;
                self.expect_kw("enumerate")?;
                self.expect(Tok::LParen)?;
                let e = self.parse_oexpr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::RParen)?;
                (Dir::Bwd, e)
            } else {
                self.expect_kw("enumerate")?;
                self.expect(Tok::LParen)?;
                let e = self.parse_oexpr()?;
                self.expect(Tok::RParen)?;
                (Dir::Fwd, e)
            };
            self.expect_kw("do")?;
            let body = self.parse_block()?;
            self.expect_kw("done")?;
            return Ok(Stmt::at(StmtKind::For { dir, pos, elem, subject, body: Box::new(body) }, span));
        }
        if self.at_kw("if") {
            self.bump();
            let cond = self.parse_bexpr()?;
            self.expect_kw("then")?;
            let then = self.parse_block()?;
            let els = if self.at_kw("else") {
                self.bump();
                self.parse_block()?
            } else {
                Stmt::skip()
            };
            self.expect_kw("endif")?;
            return Ok(Stmt::at(StmtKind::If(cond, Box::new(then), Box::new(els)), span));
        }
        if self.at_kw("yield") {
            self.bump();
            let e = self.parse_oexpr()?;
            return Ok(Stmt::at(StmtKind::Yield(e), span));
        }
        if self.at_kw("return") {
            self.bump();
            let v = match self.parse_unified()? {
                Unified::Bool(b) => RetVal::Bool(b),
                Unified::Out(e) => RetVal::Out(e),
            };
            return Ok(Stmt::at(StmtKind::Return(v), span));
        }
        if self.at_kw("skip") {
            self.bump();
            return Ok(Stmt::at(StmtKind::Skip, span));
        }
        // assignment: NAME := True | False | oexpr
        let (name, _) = self.ident()?;
        self.expect(Tok::Assign)?;
        if self.at_kw("True") {
            self.bump();
            return Ok(Stmt::at(StmtKind::SetTrue(name), span));
        }
        if self.at_kw("False") {
            self.bump();
            return Ok(Stmt::at(StmtKind::SetFalse(name), span));
        }
        let e = self.parse_oexpr()?;
        Ok(Stmt::at(StmtKind::Assign(name, e), span))
    }

    // -- expressions ---------------------------------------------------------

    fn parse_oexpr(&mut self) -> Result<OExpr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::CharLit(c) => {
                self.bump();
                Ok(OExpr::at(OExprKind::Const(CExpr::Char(c)), span))
            }
            Tok::StrLit(s) => {
                self.bump();
                Ok(OExpr::at(OExprKind::Const(CExpr::from_str_literal(&s)), span))
            }
            Tok::LBracket => {
                self.bump();
                let mut es = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        es.push(self.parse_oexpr()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                // a list of constants is itself a constant expression
                if es.iter().all(|e| matches!(e.kind, OExprKind::Const(_))) {
                    let cs: Vec<CExpr> = es
                        .into_iter()
                        .map(|e| match e.kind {
                            OExprKind::Const(c) => c,
                            _ => unreachable!(),
                        })
                        .collect();
                    Ok(OExpr::at(OExprKind::Const(CExpr::List(cs)), span))
                } else {
                    Ok(OExpr::at(OExprKind::List(es), span))
                }
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident()?;
                if *self.peek() == Tok::LParen {
                    let args = self.parse_call_args()?;
                    Ok(OExpr::at(OExprKind::Call(name, args), span))
                } else {
                    Ok(OExpr::at(OExprKind::Var(name), span))
                }
            }
            other => Err(err(format!("expected an expression, found {}", other), span)),
        }
    }

    fn parse_call_args(&mut self) -> Result<Vec<Arg>> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let value = self.parse_oexpr()?;
                let mut positions = Vec::new();
                if self.at_kw("with") {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    loop {
                        positions.push(self.ident()?.0);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                args.push(Arg { value, positions });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn parse_bexpr(&mut self) -> Result<BExpr> {
        match self.parse_unified()? {
            Unified::Bool(b) => Ok(b),
            Unified::Out(e) => match e.kind {
                OExprKind::Var(n) => Ok(BExpr::at(BExprKind::Var(n), e.span)),
                OExprKind::Call(f, args) => Ok(BExpr::at(BExprKind::Call(f, args), e.span)),
                _ => Err(err("expected a boolean expression", e.span)),
            },
        }
    }

    fn parse_unified(&mut self) -> Result<Unified> {
        self.parse_iff()
    }

    fn parse_iff(&mut self) -> Result<Unified> {
        let mut lhs = self.parse_implies()?;
        while *self.peek() == Tok::Iff {
            let span = self.span();
            self.bump();
            let rhs = self.parse_implies()?;
            lhs = Unified::Bool(BExpr::at(
                BExprKind::Bin(Box::new(lhs.into_bool()?), BoolOp::Iff, Box::new(rhs.into_bool()?)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn parse_implies(&mut self) -> Result<Unified> {
        let lhs = self.parse_or()?;
        if *self.peek() == Tok::Implies {
            let span = self.span();
            self.bump();
            let rhs = self.parse_implies()?; // right-associative
            return Ok(Unified::Bool(BExpr::at(
                BExprKind::Bin(Box::new(lhs.into_bool()?), BoolOp::Implies, Box::new(rhs.into_bool()?)),
                span,
            )));
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Unified> {
        let mut lhs = self.parse_and()?;
        while self.at_kw("or") {
            let span = self.span();
            self.bump();
            let rhs = self.parse_and()?;
            lhs = Unified::Bool(BExpr::at(
                BExprKind::Bin(Box::new(lhs.into_bool()?), BoolOp::Or, Box::new(rhs.into_bool()?)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Unified> {
        let mut lhs = self.parse_unary()?;
        while self.at_kw("and") {
            let span = self.span();
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Unified::Bool(BExpr::at(
                BExprKind::Bin(Box::new(lhs.into_bool()?), BoolOp::And, Box::new(rhs.into_bool()?)),
                span,
            ));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Unified> {
        if self.at_kw("not") {
            let span = self.span();
            self.bump();
            let e = self.parse_unary()?;
            return Ok(Unified::Bool(BExpr::at(BExprKind::Not(Box::new(e.into_bool()?)), span)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<Unified> {
        let span = self.span();
        if self.at_kw("True") {
            self.bump();
            return self.maybe_cmp(Unified::Bool(BExpr::at(BExprKind::True, span)));
        }
        if self.at_kw("False") {
            self.bump();
            return self.maybe_cmp(Unified::Bool(BExpr::at(BExprKind::False, span)));
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let inner = self.parse_unified()?;
            self.expect(Tok::RParen)?;
            return self.maybe_cmp(inner);
        }
        let e = self.parse_oexpr()?;
        self.maybe_cmp(Unified::Out(e))
    }

    /// After an atom, check for a comparison or literal-equality operator.
    fn maybe_cmp(&mut self, lhs: Unified) -> Result<Unified> {
        let span = self.span();
        let op = match self.peek() {
            Tok::TripleEq => {
                self.bump();
                let l = lhs.into_out(span)?;
                let r_atom = self.parse_atom_operand()?;
                return Ok(Unified::Bool(BExpr::at(
                    BExprKind::LitEq(Box::new(l), Box::new(r_atom)),
                    span,
                )));
            }
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let l = lhs.into_out(span)?;
        let r = self.parse_atom_operand()?;
        Ok(Unified::Bool(BExpr::at(
            BExprKind::Cmp(oexpr_to_operand(l), op, oexpr_to_operand(r)),
            span,
        )))
    }

    fn parse_atom_operand(&mut self) -> Result<OExpr> {
        self.parse_oexpr()
    }
}

fn oexpr_to_operand(e: OExpr) -> CmpOperand {
    match e.kind {
        OExprKind::Var(n) => CmpOperand::Var(n),
        _ => CmpOperand::Expr(Box::new(e)),
    }
}

enum Unified {
    Bool(BExpr),
    Out(OExpr),
}

impl Unified {
    fn into_bool(self) -> Result<BExpr> {
        match self {
            Unified::Bool(b) => Ok(b),
            Unified::Out(e) => match e.kind {
                OExprKind::Var(n) => Ok(BExpr::at(BExprKind::Var(n), e.span)),
                OExprKind::Call(f, args) => Ok(BExpr::at(BExprKind::Call(f, args), e.span)),
                _ => Err(err("expected a boolean expression", e.span)),
            },
        }
    }

    fn into_out(self, span: Span) -> Result<OExpr> {
        match self {
            Unified::Out(e) => Ok(e),
            Unified::Bool(b) => match b.kind {
                BExprKind::Var(n) => Ok(OExpr::at(OExprKind::Var(n), b.span)),
                BExprKind::Call(f, args) => Ok(OExpr::at(OExprKind::Call(f, args), b.span)),
                _ => Err(err("expected a word expression", span)),
            },
        }
    }
}

/// Parse a `.pr` source text into a program.
pub fn parse_program(text: &str) -> Result<Program> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    p.parse_program()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{pretty_program, strip_spans};

    const AS_TO_BS: &str = r#"
def main(w : [Char]) : [Char] :=
    for (i, c) in enumerate(w) do
        if c === 'a' then
            yield 'b'
        else
            yield c
        endif
    done
"#;

    #[test]
    fn parses_as_to_bs() {
        let p = parse_program(AS_TO_BS).unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.main, "main");
        let f = p.main_fun();
        match &f.body.kind {
            StmtKind::For { dir, body, .. } => {
                assert_eq!(*dir, Dir::Fwd);
                assert!(matches!(body.kind, StmtKind::If(..)));
            }
            other => panic!("expected for loop, got {:?}", other),
        }
    }

    #[test]
    fn empty_input_is_a_syntax_error() {
        let e = parse_program("").unwrap_err();
        let d = e.diagnostic().unwrap();
        assert_eq!(d.category, Category::Syntax);
        assert!(d.message.contains("expected function definition"));
    }

    #[test]
    fn round_trip_through_pretty_printer() {
        let mut p = parse_program(AS_TO_BS).unwrap();
        let text = pretty_program(&p);
        let mut q = parse_program(&text).unwrap();
        strip_spans(&mut p);
        strip_spans(&mut q);
        assert_eq!(p, q);
    }

    #[test]
    fn reserved_prefix_rejected() {
        let text = "def main(w : [Char]) : [Char] :=\n yield __x\n";
        assert!(parse_program(text).is_err());
    }

    #[test]
    fn let_scopes_over_rest_of_block() {
        let text = r#"
def f(w : [Char]) : Bool :=
    let mut b := False in
    for (i, c) in enumerate(w) do
        if c === 'a' then
            b := True
        endif
    done
    return b
"#;
        let p = parse_program(text).unwrap();
        match &p.functions[0].body.kind {
            StmtKind::LetBool(name, body) => {
                assert_eq!(name, "b");
                assert!(matches!(body.kind, StmtKind::Seq(_)));
            }
            other => panic!("expected let-bool, got {:?}", other),
        }
    }
}
