//! Abstract syntax of high-level for-programs.
//!
//! The same AST serves the surface language and the rewriting pipeline.
//! Constructs that never appear in surface programs (generator expressions,
//! resolved address comparisons) are produced only by the rewriter; the
//! surface parser cannot emit them and the type checker rejects them in
//! surface mode.

use crate::diag::Span;
use std::fmt::Write;

pub type Name = String;

/// Identity of a generator expression. Copies made during rewriting share the
/// id, which is what makes position comparisons across copies well-typed.
pub type GenId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Fwd,
    Bwd,
}

impl Dir {
    pub fn flip(self) -> Dir {
        match self {
            Dir::Fwd => Dir::Bwd,
            Dir::Bwd => Dir::Fwd,
        }
    }
}

/// Constant expressions: characters and uniform-depth lists of constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CExpr {
    Char(char),
    List(Vec<CExpr>),
}

impl CExpr {
    /// Depth of the constant. An empty list literal has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            CExpr::Char(_) => 0,
            CExpr::List(es) => 1 + es.first().map_or(0, |e| e.depth()),
        }
    }

    pub fn from_str_literal(s: &str) -> CExpr {
        CExpr::List(s.chars().map(CExpr::Char).collect())
    }

    /// Letters occurring in the constant.
    pub fn letters(&self, out: &mut std::collections::BTreeSet<char>) {
        match self {
            CExpr::Char(c) => {
                out.insert(*c);
            }
            CExpr::List(es) => es.iter().for_each(|e| e.letters(out)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
    Implies,
    Iff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// One slot of a yield address: the structural slot of an enclosing loop in
/// the generator it came from, the concrete position variable bound there,
/// and the loop direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AddrSlot {
    pub slot: u32,
    pub var: Name,
    pub dir: Dir,
}

/// Address of a yield statement inside a (normalized) generator: which yield
/// site produced the element and the position variables visible there,
/// outermost first. Two addresses of same-origin generators are comparable
/// slot by slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct YieldAddress {
    /// Document-order index of the yield site in the generator body.
    pub site: u32,
    pub chain: Vec<AddrSlot>,
}

/// Operand of a position comparison. Surface programs only have variables;
/// loop expansion resolves variables over generators into yield addresses,
/// and ill-typed surface programs may put arbitrary expressions here (which
/// the checker then rejects).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CmpOperand {
    Var(Name),
    Expr(Box<OExpr>),
    Addr(YieldAddress),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BExpr {
    pub kind: BExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BExprKind {
    True,
    False,
    Not(Box<BExpr>),
    Bin(Box<BExpr>, BoolOp, Box<BExpr>),
    /// Position comparison `i <= j`; also the surface form of `e1 == e2`.
    Cmp(CmpOperand, CmpOp, CmpOperand),
    /// Literal equality `e1 === e2`. After type checking one side is constant.
    LitEq(Box<OExpr>, Box<OExpr>),
    /// Call of a boolean-returning function.
    Call(Name, Vec<Arg>),
    /// Boolean variable.
    Var(Name),
    /// Boolean generator (rewriter-internal).
    Gen(Box<Stmt>),
}

impl BExpr {
    pub fn new(kind: BExprKind) -> Self {
        BExpr { kind, span: Span::default() }
    }

    pub fn at(kind: BExprKind, span: Span) -> Self {
        BExpr { kind, span }
    }

    pub fn not(self) -> BExpr {
        BExpr::new(BExprKind::Not(Box::new(self)))
    }

    pub fn and(self, other: BExpr) -> BExpr {
        BExpr::new(BExprKind::Bin(Box::new(self), BoolOp::And, Box::new(other)))
    }

    pub fn or(self, other: BExpr) -> BExpr {
        BExpr::new(BExprKind::Bin(Box::new(self), BoolOp::Or, Box::new(other)))
    }
}

/// A function-call argument: a list expression together with the position
/// variables attached to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub value: OExpr,
    pub positions: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OExpr {
    pub kind: OExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OExprKind {
    Var(Name),
    Const(CExpr),
    List(Vec<OExpr>),
    Call(Name, Vec<Arg>),
    /// List generator (rewriter-internal). The id identifies the origin;
    /// copies keep it.
    Gen(Box<Stmt>, GenId),
}

impl OExpr {
    pub fn new(kind: OExprKind) -> Self {
        OExpr { kind, span: Span::default() }
    }

    pub fn at(kind: OExprKind, span: Span) -> Self {
        OExpr { kind, span }
    }

    pub fn var(n: impl Into<Name>) -> Self {
        OExpr::new(OExprKind::Var(n.into()))
    }
}

/// What a `return` returns; the parser guesses the sort syntactically and the
/// type checker re-sorts variables and calls as needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetVal {
    Out(OExpr),
    Bool(BExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    If(BExpr, Box<Stmt>, Box<Stmt>),
    Yield(OExpr),
    Return(RetVal),
    LetOut(Name, OExpr, Box<Stmt>),
    LetBool(Name, Box<Stmt>),
    SetTrue(Name),
    /// Surface-only: `b := False`; always rejected (R.VII).
    SetFalse(Name),
    /// Surface-only: assignment of anything else; always rejected (R.II).
    Assign(Name, OExpr),
    For {
        dir: Dir,
        pos: Name,
        elem: Name,
        subject: OExpr,
        body: Box<Stmt>,
    },
    Seq(Vec<Stmt>),
    Skip,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }

    pub fn at(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }

    pub fn skip() -> Stmt {
        Stmt::new(StmtKind::Skip)
    }

    pub fn is_skip(&self) -> bool {
        matches!(self.kind, StmtKind::Skip)
    }

    /// Sequence two statements, dropping skips and flattening.
    pub fn seq(a: Stmt, b: Stmt) -> Stmt {
        let mut items = Vec::new();
        let push = |s: Stmt, items: &mut Vec<Stmt>| match s.kind {
            StmtKind::Skip => {}
            StmtKind::Seq(ss) => items.extend(ss),
            _ => items.push(s),
        };
        push(a, &mut items);
        push(b, &mut items);
        match items.len() {
            0 => Stmt::skip(),
            1 => items.pop().unwrap(),
            _ => Stmt::new(StmtKind::Seq(items)),
        }
    }

    pub fn seq_all(items: Vec<Stmt>) -> Stmt {
        items.into_iter().fold(Stmt::skip(), Stmt::seq)
    }
}

/// Declared type of a parameter or return value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeAnn {
    Bool,
    Out(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Name,
    pub ty: TypeAnn,
    pub positions: Vec<Name>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunDef {
    pub name: Name,
    pub params: Vec<Param>,
    pub ret: TypeAnn,
    pub body: Stmt,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunDef>,
    pub main: Name,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn main_fun(&self) -> &FunDef {
        self.function(&self.main).expect("main function exists")
    }
}

// ---------------------------------------------------------------------------
// Pretty printer. `parse(pretty(p)) == p` modulo spans.
// ---------------------------------------------------------------------------

pub fn pretty_type(t: TypeAnn) -> String {
    match t {
        TypeAnn::Bool => "Bool".to_string(),
        TypeAnn::Out(0) => "Char".to_string(),
        TypeAnn::Out(n) => format!("[{}]", pretty_type(TypeAnn::Out(n - 1))),
    }
}

fn escape_char(c: char) -> String {
    match c {
        '\'' => "\\'".to_string(),
        '"' => "\\\"".to_string(),
        '\\' => "\\\\".to_string(),
        '\n' => "\\n".to_string(),
        '\t' => "\\t".to_string(),
        c => c.to_string(),
    }
}

pub fn pretty_cexpr(c: &CExpr) -> String {
    match c {
        CExpr::Char(ch) => format!("'{}'", escape_char(*ch)),
        CExpr::List(es) => {
            if es.iter().all(|e| matches!(e, CExpr::Char(_))) {
                let s: String = es
                    .iter()
                    .map(|e| match e {
                        CExpr::Char(c) => escape_char(*c),
                        CExpr::List(_) => unreachable!(),
                    })
                    .collect();
                format!("\"{}\"", s)
            } else {
                let inner: Vec<String> = es.iter().map(pretty_cexpr).collect();
                format!("[{}]", inner.join(", "))
            }
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

fn bool_op_str(op: BoolOp) -> &'static str {
    match op {
        BoolOp::And => "and",
        BoolOp::Or => "or",
        BoolOp::Implies => "=>",
        BoolOp::Iff => "<=>",
    }
}

fn pretty_operand(o: &CmpOperand) -> String {
    match o {
        CmpOperand::Var(n) => n.clone(),
        CmpOperand::Expr(e) => pretty_oexpr(e),
        CmpOperand::Addr(a) => {
            let vars: Vec<&str> = a.chain.iter().map(|s| s.var.as_str()).collect();
            format!("@site{}({})", a.site, vars.join(","))
        }
    }
}

pub fn pretty_bexpr(b: &BExpr) -> String {
    match &b.kind {
        BExprKind::True => "True".to_string(),
        BExprKind::False => "False".to_string(),
        BExprKind::Not(e) => format!("not ({})", pretty_bexpr(e)),
        BExprKind::Bin(l, op, r) => {
            format!("({}) {} ({})", pretty_bexpr(l), bool_op_str(*op), pretty_bexpr(r))
        }
        BExprKind::Cmp(l, op, r) => {
            format!("{} {} {}", pretty_operand(l), cmp_op_str(*op), pretty_operand(r))
        }
        BExprKind::LitEq(l, r) => format!("{} === {}", pretty_oexpr(l), pretty_oexpr(r)),
        BExprKind::Call(f, args) => format!("{}({})", f, pretty_args(args)),
        BExprKind::Var(n) => n.clone(),
        BExprKind::Gen(s) => format!("<gen| {} |>", pretty_stmt_flat(s)),
    }
}

fn pretty_args(args: &[Arg]) -> String {
    let parts: Vec<String> = args
        .iter()
        .map(|a| {
            if a.positions.is_empty() {
                pretty_oexpr(&a.value)
            } else {
                format!("{} with ({})", pretty_oexpr(&a.value), a.positions.join(", "))
            }
        })
        .collect();
    parts.join(", ")
}

pub fn pretty_oexpr(e: &OExpr) -> String {
    match &e.kind {
        OExprKind::Var(n) => n.clone(),
        OExprKind::Const(c) => pretty_cexpr(c),
        OExprKind::List(es) => {
            let inner: Vec<String> = es.iter().map(pretty_oexpr).collect();
            format!("[{}]", inner.join(", "))
        }
        OExprKind::Call(f, args) => format!("{}({})", f, pretty_args(args)),
        OExprKind::Gen(s, id) => format!("<gen#{}| {} |>", id, pretty_stmt_flat(s)),
    }
}

fn pretty_stmt_flat(s: &Stmt) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_stmt(out: &mut String, s: &Stmt, level: usize) {
    match &s.kind {
        StmtKind::If(c, t, e) => {
            indent(out, level);
            let _ = writeln!(out, "if {} then", pretty_bexpr(c));
            write_stmt(out, t, level + 1);
            if !e.is_skip() {
                indent(out, level);
                out.push_str("else\n");
                write_stmt(out, e, level + 1);
            }
            indent(out, level);
            out.push_str("endif\n");
        }
        StmtKind::Yield(e) => {
            indent(out, level);
            let _ = writeln!(out, "yield {}", pretty_oexpr(e));
        }
        StmtKind::Return(RetVal::Out(e)) => {
            indent(out, level);
            let _ = writeln!(out, "return {}", pretty_oexpr(e));
        }
        StmtKind::Return(RetVal::Bool(b)) => {
            indent(out, level);
            let _ = writeln!(out, "return {}", pretty_bexpr(b));
        }
        StmtKind::LetOut(x, e, body) => {
            indent(out, level);
            let _ = writeln!(out, "let {} := {} in", x, pretty_oexpr(e));
            write_stmt(out, body, level);
        }
        StmtKind::LetBool(x, body) => {
            indent(out, level);
            let _ = writeln!(out, "let mut {} := False in", x);
            write_stmt(out, body, level);
        }
        StmtKind::SetTrue(x) => {
            indent(out, level);
            let _ = writeln!(out, "{} := True", x);
        }
        StmtKind::SetFalse(x) => {
            indent(out, level);
            let _ = writeln!(out, "{} := False", x);
        }
        StmtKind::Assign(x, e) => {
            indent(out, level);
            let _ = writeln!(out, "{} := {}", x, pretty_oexpr(e));
        }
        StmtKind::For { dir, pos, elem, subject, body } => {
            indent(out, level);
            let iter = match dir {
                Dir::Fwd => format!("enumerate({})", pretty_oexpr(subject)),
                Dir::Bwd => format!("reversed(enumerate({}))", pretty_oexpr(subject)),
            };
            let _ = writeln!(out, "for ({}, {}) in {} do", pos, elem, iter);
            write_stmt(out, body, level + 1);
            indent(out, level);
            out.push_str("done\n");
        }
        StmtKind::Seq(ss) => {
            for s in ss {
                write_stmt(out, s, level);
            }
        }
        StmtKind::Skip => {
            indent(out, level);
            out.push_str("skip\n");
        }
    }
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for f in &p.functions {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|pr| {
                if pr.positions.is_empty() {
                    format!("{} : {}", pr.name, pretty_type(pr.ty))
                } else {
                    format!("{} : {} with ({})", pr.name, pretty_type(pr.ty), pr.positions.join(", "))
                }
            })
            .collect();
        let _ = writeln!(out, "def {}({}) : {} :=", f.name, params.join(", "), pretty_type(f.ret));
        write_stmt(&mut out, &f.body, 1);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Generic helpers used by several passes.
// ---------------------------------------------------------------------------

/// Erase all spans (for AST equality in tests).
pub fn strip_spans(p: &mut Program) {
    for f in &mut p.functions {
        f.span = Span::default();
        for pr in &mut f.params {
            pr.span = Span::default();
        }
        strip_stmt(&mut f.body);
    }
}

fn strip_stmt(s: &mut Stmt) {
    s.span = Span::default();
    match &mut s.kind {
        StmtKind::If(c, t, e) => {
            strip_bexpr(c);
            strip_stmt(t);
            strip_stmt(e);
        }
        StmtKind::Yield(e) => strip_oexpr(e),
        StmtKind::Return(RetVal::Out(e)) => strip_oexpr(e),
        StmtKind::Return(RetVal::Bool(b)) => strip_bexpr(b),
        StmtKind::LetOut(_, e, body) => {
            strip_oexpr(e);
            strip_stmt(body);
        }
        StmtKind::LetBool(_, body) => strip_stmt(body),
        StmtKind::SetTrue(_) | StmtKind::SetFalse(_) | StmtKind::Skip => {}
        StmtKind::Assign(_, e) => strip_oexpr(e),
        StmtKind::For { subject, body, .. } => {
            strip_oexpr(subject);
            strip_stmt(body);
        }
        StmtKind::Seq(ss) => ss.iter_mut().for_each(strip_stmt),
    }
}

fn strip_bexpr(b: &mut BExpr) {
    b.span = Span::default();
    match &mut b.kind {
        BExprKind::Not(e) => strip_bexpr(e),
        BExprKind::Bin(l, _, r) => {
            strip_bexpr(l);
            strip_bexpr(r);
        }
        BExprKind::Cmp(l, _, r) => {
            if let CmpOperand::Expr(e) = l {
                strip_oexpr(e);
            }
            if let CmpOperand::Expr(e) = r {
                strip_oexpr(e);
            }
        }
        BExprKind::LitEq(l, r) => {
            strip_oexpr(l);
            strip_oexpr(r);
        }
        BExprKind::Call(_, args) => args.iter_mut().for_each(|a| strip_oexpr(&mut a.value)),
        BExprKind::Gen(s) => strip_stmt(s),
        BExprKind::True | BExprKind::False | BExprKind::Var(_) => {}
    }
}

fn strip_oexpr(e: &mut OExpr) {
    e.span = Span::default();
    match &mut e.kind {
        OExprKind::List(es) => es.iter_mut().for_each(strip_oexpr),
        OExprKind::Call(_, args) => args.iter_mut().for_each(|a| strip_oexpr(&mut a.value)),
        OExprKind::Gen(s, _) => strip_stmt(s),
        OExprKind::Var(_) | OExprKind::Const(_) => {}
    }
}

/// All letter constants occurring anywhere in the program.
pub fn program_letters(p: &Program) -> std::collections::BTreeSet<char> {
    let mut set = std::collections::BTreeSet::new();
    for f in &p.functions {
        stmt_letters(&f.body, &mut set);
    }
    set
}

fn stmt_letters(s: &Stmt, out: &mut std::collections::BTreeSet<char>) {
    match &s.kind {
        StmtKind::If(c, t, e) => {
            bexpr_letters(c, out);
            stmt_letters(t, out);
            stmt_letters(e, out);
        }
        StmtKind::Yield(e) => oexpr_letters(e, out),
        StmtKind::Return(RetVal::Out(e)) => oexpr_letters(e, out),
        StmtKind::Return(RetVal::Bool(b)) => bexpr_letters(b, out),
        StmtKind::LetOut(_, e, body) => {
            oexpr_letters(e, out);
            stmt_letters(body, out);
        }
        StmtKind::LetBool(_, body) => stmt_letters(body, out),
        StmtKind::SetTrue(_) | StmtKind::SetFalse(_) | StmtKind::Skip => {}
        StmtKind::Assign(_, e) => oexpr_letters(e, out),
        StmtKind::For { subject, body, .. } => {
            oexpr_letters(subject, out);
            stmt_letters(body, out);
        }
        StmtKind::Seq(ss) => ss.iter().for_each(|s| stmt_letters(s, out)),
    }
}

fn bexpr_letters(b: &BExpr, out: &mut std::collections::BTreeSet<char>) {
    match &b.kind {
        BExprKind::Not(e) => bexpr_letters(e, out),
        BExprKind::Bin(l, _, r) => {
            bexpr_letters(l, out);
            bexpr_letters(r, out);
        }
        BExprKind::Cmp(l, _, r) => {
            if let CmpOperand::Expr(e) = l {
                oexpr_letters(e, out);
            }
            if let CmpOperand::Expr(e) = r {
                oexpr_letters(e, out);
            }
        }
        BExprKind::LitEq(l, r) => {
            oexpr_letters(l, out);
            oexpr_letters(r, out);
        }
        BExprKind::Call(_, args) => args.iter().for_each(|a| oexpr_letters(&a.value, out)),
        BExprKind::Gen(s) => stmt_letters(s, out),
        BExprKind::True | BExprKind::False | BExprKind::Var(_) => {}
    }
}

fn oexpr_letters(e: &OExpr, out: &mut std::collections::BTreeSet<char>) {
    match &e.kind {
        OExprKind::Const(c) => c.letters(out),
        OExprKind::List(es) => es.iter().for_each(|e| oexpr_letters(e, out)),
        OExprKind::Call(_, args) => args.iter().for_each(|a| oexpr_letters(&a.value, out)),
        OExprKind::Gen(s, _) => stmt_letters(s, out),
        OExprKind::Var(_) => {}
    }
}
