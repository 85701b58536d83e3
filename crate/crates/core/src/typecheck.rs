//! Type checker for high-level for-programs.
//!
//! Enforces the language restrictions: for-loops only (no recursion, calls may
//! only reference earlier functions), booleans as the only mutable variables,
//! no word equality unless one side is constant, position comparisons only
//! between indices of the same list, no shadowing, no boolean arguments, and
//! no boolean resets. Runs in time linear in the AST.
//!
//! The checker returns a new program in which `return x` / `return f(..)` of
//! boolean sort have been re-sorted into boolean returns, so later stages can
//! rely on the sort of every node.

use crate::ast::*;
use crate::diag::{Category, Diagnostic, Error, Result, Span};
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Reject rewriter-internal constructs (generators).
    Surface,
    /// Allow generator expressions (used to re-check pass outputs).
    Internal,
}

/// Depth of a word expression; `None` for the depth-polymorphic empty list.
pub type Depth = Option<usize>;

/// Statement/expression sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Bool,
    Out(Depth),
    /// Statements that fit any type (e.g. `skip`, `b := True`).
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSig {
    pub depth: usize,
    pub npos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunSig {
    pub params: Vec<ParamSig>,
    pub ret: TypeAnn,
}

/// A program that has passed the checker, together with function signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: Program,
    pub sigs: BTreeMap<Name, FunSig>,
}

impl TypedProgram {
    pub fn main_sig(&self) -> &FunSig {
        &self.sigs[&self.program.main]
    }

    /// True when main has the shape required for verification: one word
    /// parameter with no attached positions, returning a word.
    pub fn main_is_word_to_word(&self) -> bool {
        let sig = self.main_sig();
        sig.ret == TypeAnn::Out(1)
            && sig.params.len() == 1
            && sig.params[0].depth == 1
            && sig.params[0].npos == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Origin {
    Var(Name),
    Gen(GenId),
    Loop(u32),
}

struct Scope {
    outs: HashMap<Name, Depth>,
    poss: HashMap<Name, Origin>,
    bools: HashSet<Name>,
    /// Every name bound in an enclosing scope, for shadowing detection.
    bound: HashSet<Name>,
}

struct Checker {
    sigs: BTreeMap<Name, FunSig>,
    mode: Mode,
    loop_counter: u32,
}

fn fail(cat: Category, msg: impl Into<String>, span: Span) -> Error {
    Error::Type(Diagnostic::new(cat, msg, span))
}

fn unify(a: Ty, b: Ty, span: Span) -> Result<Ty> {
    match (a, b) {
        (Ty::Neutral, t) | (t, Ty::Neutral) => Ok(t),
        (Ty::Bool, Ty::Bool) => Ok(Ty::Bool),
        (Ty::Out(None), Ty::Out(d)) | (Ty::Out(d), Ty::Out(None)) => Ok(Ty::Out(d)),
        (Ty::Out(Some(m)), Ty::Out(Some(n))) if m == n => Ok(Ty::Out(Some(m))),
        (x, y) => Err(fail(
            Category::Type,
            format!("mismatched types: {:?} vs {:?}", x, y),
            span,
        )),
    }
}

fn unify_depth(a: Depth, b: Depth, span: Span) -> Result<Depth> {
    match (a, b) {
        (None, d) | (d, None) => Ok(d),
        (Some(m), Some(n)) if m == n => Ok(Some(m)),
        (Some(m), Some(n)) => Err(fail(
            Category::Type,
            format!("mismatched depths: {} vs {}", m, n),
            span,
        )),
    }
}

impl Checker {
    fn bind_check(&self, scope: &Scope, name: &Name, span: Span) -> Result<()> {
        if scope.bound.contains(name) || self.sigs.contains_key(name) {
            return Err(fail(
                Category::Shadowing,
                format!("`{}` shadows an earlier binding", name),
                span,
            ));
        }
        Ok(())
    }

    fn check_fun(&mut self, f: &FunDef) -> Result<FunDef> {
        let mut scope = Scope {
            outs: HashMap::new(),
            poss: HashMap::new(),
            bools: HashSet::new(),
            bound: HashSet::new(),
        };
        let mut params_sig = Vec::new();
        for p in &f.params {
            self.bind_check(&scope, &p.name, p.span)?;
            let depth = match p.ty {
                TypeAnn::Bool => {
                    return Err(fail(
                        Category::BooleanArgument,
                        format!("parameter `{}` of `{}` has boolean type", p.name, f.name),
                        p.span,
                    ))
                }
                TypeAnn::Out(n) => n,
            };
            if !p.positions.is_empty() && depth == 0 {
                return Err(fail(
                    Category::Type,
                    "positions can only attach to list parameters",
                    p.span,
                ));
            }
            scope.outs.insert(p.name.clone(), Some(depth));
            scope.bound.insert(p.name.clone());
            for pos in &p.positions {
                self.bind_check(&scope, pos, p.span)?;
                scope.poss.insert(pos.clone(), Origin::Var(p.name.clone()));
                scope.bound.insert(pos.clone());
            }
            params_sig.push(ParamSig { depth, npos: p.positions.len() });
        }
        let (body, ty) = self.check_stmt(&f.body, &mut scope)?;
        let declared = match f.ret {
            TypeAnn::Bool => Ty::Bool,
            TypeAnn::Out(n) => Ty::Out(Some(n)),
        };
        unify(ty, declared, f.span)?;
        self.sigs.insert(f.name.clone(), FunSig { params: params_sig, ret: f.ret });
        Ok(FunDef { name: f.name.clone(), params: f.params.clone(), ret: f.ret, body, span: f.span })
    }

    fn check_stmt(&mut self, s: &Stmt, scope: &mut Scope) -> Result<(Stmt, Ty)> {
        let span = s.span;
        match &s.kind {
            StmtKind::If(c, t, e) => {
                let c2 = self.check_bexpr(c, scope)?;
                let (t2, tt) = self.check_stmt(t, scope)?;
                let (e2, te) = self.check_stmt(e, scope)?;
                let ty = unify(tt, te, span)?;
                Ok((Stmt::at(StmtKind::If(c2, Box::new(t2), Box::new(e2)), span), ty))
            }
            StmtKind::Yield(e) => {
                let (e2, d) = self.check_oexpr(e, scope)?;
                Ok((Stmt::at(StmtKind::Yield(e2), span), Ty::Out(d.map(|n| n + 1))))
            }
            StmtKind::Return(RetVal::Out(e)) => {
                // re-sort boolean-valued returns
                match &e.kind {
                    OExprKind::Var(n) if scope.bools.contains(n) => {
                        let b = BExpr::at(BExprKind::Var(n.clone()), e.span);
                        return Ok((Stmt::at(StmtKind::Return(RetVal::Bool(b)), span), Ty::Bool));
                    }
                    OExprKind::Call(f, _) if self.sigs.get(f).map(|s| s.ret) == Some(TypeAnn::Bool) => {
                        let (args,) = match &e.kind {
                            OExprKind::Call(_, a) => (a.clone(),),
                            _ => unreachable!(),
                        };
                        let b = self.check_bexpr(&BExpr::at(BExprKind::Call(f.clone(), args), e.span), scope)?;
                        return Ok((Stmt::at(StmtKind::Return(RetVal::Bool(b)), span), Ty::Bool));
                    }
                    _ => {}
                }
                let (e2, d) = self.check_oexpr(e, scope)?;
                Ok((Stmt::at(StmtKind::Return(RetVal::Out(e2)), span), Ty::Out(d)))
            }
            StmtKind::Return(RetVal::Bool(b)) => {
                let b2 = self.check_bexpr(b, scope)?;
                Ok((Stmt::at(StmtKind::Return(RetVal::Bool(b2)), span), Ty::Bool))
            }
            StmtKind::LetOut(x, e, body) => {
                self.bind_check(scope, x, span)?;
                let (e2, d) = self.check_oexpr(e, scope)?;
                scope.outs.insert(x.clone(), d);
                scope.bound.insert(x.clone());
                let (body2, ty) = self.check_stmt(body, scope)?;
                scope.outs.remove(x);
                Ok((Stmt::at(StmtKind::LetOut(x.clone(), e2, Box::new(body2)), span), ty))
            }
            StmtKind::LetBool(x, body) => {
                if scope.bools.contains(x) {
                    return Err(fail(
                        Category::BooleanReset,
                        format!("boolean `{}` is declared again", x),
                        span,
                    ));
                }
                self.bind_check(scope, x, span)?;
                scope.bools.insert(x.clone());
                scope.bound.insert(x.clone());
                let (body2, ty) = self.check_stmt(body, scope)?;
                scope.bools.remove(x);
                Ok((Stmt::at(StmtKind::LetBool(x.clone(), Box::new(body2)), span), ty))
            }
            StmtKind::SetTrue(x) => {
                if scope.bools.contains(x) {
                    Ok((s.clone(), Ty::Neutral))
                } else if scope.outs.contains_key(x) || scope.poss.contains_key(x) {
                    Err(fail(
                        Category::MutationViolation,
                        format!("`{}` is immutable; only booleans can be assigned", x),
                        span,
                    ))
                } else {
                    Err(fail(Category::Unbound, format!("unknown variable `{}`", x), span))
                }
            }
            StmtKind::SetFalse(x) => Err(fail(
                Category::BooleanReset,
                format!("boolean `{}` cannot be set back to False", x),
                span,
            )),
            StmtKind::Assign(x, _) => Err(fail(
                Category::MutationViolation,
                format!("`{}` cannot be reassigned; only booleans can be set (to True)", x),
                span,
            )),
            StmtKind::For { dir, pos, elem, subject, body } => {
                let (subject2, d) = self.check_oexpr(subject, scope)?;
                if d == Some(0) {
                    return Err(fail(Category::Type, "cannot iterate over a character", span));
                }
                self.bind_check(scope, pos, span)?;
                scope.bound.insert(pos.clone());
                self.bind_check(scope, elem, span)?;
                let origin = match &subject2.kind {
                    OExprKind::Var(v) => Origin::Var(v.clone()),
                    OExprKind::Gen(_, id) => Origin::Gen(*id),
                    _ => {
                        self.loop_counter += 1;
                        Origin::Loop(self.loop_counter)
                    }
                };
                scope.poss.insert(pos.clone(), origin);
                scope.outs.insert(elem.clone(), d.map(|n| n - 1));
                scope.bound.insert(elem.clone());
                let (body2, ty) = self.check_stmt(body, scope)?;
                scope.poss.remove(pos);
                scope.outs.remove(elem);
                Ok((
                    Stmt::at(
                        StmtKind::For {
                            dir: *dir,
                            pos: pos.clone(),
                            elem: elem.clone(),
                            subject: subject2,
                            body: Box::new(body2),
                        },
                        span,
                    ),
                    ty,
                ))
            }
            StmtKind::Seq(ss) => {
                let mut ty = Ty::Neutral;
                let mut out = Vec::with_capacity(ss.len());
                for s in ss {
                    let (s2, t) = self.check_stmt(s, scope)?;
                    ty = unify(ty, t, s.span)?;
                    out.push(s2);
                }
                Ok((Stmt::at(StmtKind::Seq(out), span), ty))
            }
            StmtKind::Skip => Ok((s.clone(), Ty::Neutral)),
        }
    }

    fn check_bexpr(&mut self, b: &BExpr, scope: &mut Scope) -> Result<BExpr> {
        let span = b.span;
        match &b.kind {
            BExprKind::True | BExprKind::False => Ok(b.clone()),
            BExprKind::Not(e) => {
                let e2 = self.check_bexpr(e, scope)?;
                Ok(BExpr::at(BExprKind::Not(Box::new(e2)), span))
            }
            BExprKind::Bin(l, op, r) => {
                let l2 = self.check_bexpr(l, scope)?;
                let r2 = self.check_bexpr(r, scope)?;
                Ok(BExpr::at(BExprKind::Bin(Box::new(l2), *op, Box::new(r2)), span))
            }
            BExprKind::Var(n) => {
                if scope.bools.contains(n) {
                    Ok(b.clone())
                } else if scope.outs.contains_key(n) || scope.poss.contains_key(n) {
                    Err(fail(Category::Type, format!("`{}` is not a boolean", n), span))
                } else {
                    Err(fail(Category::Unbound, format!("unknown variable `{}`", n), span))
                }
            }
            BExprKind::Call(f, args) => {
                let args2 = self.check_call(f, args, span, scope)?;
                match self.sigs[f].ret {
                    TypeAnn::Bool => Ok(BExpr::at(BExprKind::Call(f.clone(), args2), span)),
                    TypeAnn::Out(_) => Err(fail(
                        Category::Type,
                        format!("`{}` returns a word, not a boolean", f),
                        span,
                    )),
                }
            }
            BExprKind::Cmp(l, op, r) => {
                let lpos = self.operand_origin(l, scope, span)?;
                let rpos = self.operand_origin(r, scope, span)?;
                match (lpos, rpos) {
                    (Some(lo), Some(ro)) => {
                        if lo != ro {
                            return Err(fail(
                                Category::CrossListComparison,
                                "comparison between positions of different lists",
                                span,
                            ));
                        }
                        Ok(b.clone())
                    }
                    (None, None) if matches!(op, CmpOp::Eq | CmpOp::Ne) => Err(fail(
                        Category::NestedWordEquality,
                        "equality between words is only allowed against a constant (use `===`)",
                        span,
                    )),
                    _ => Err(fail(
                        Category::Type,
                        "comparison operands must be positions of the same list",
                        span,
                    )),
                }
            }
            BExprKind::LitEq(l, r) => {
                let lconst = matches!(l.kind, OExprKind::Const(_));
                let rconst = matches!(r.kind, OExprKind::Const(_));
                if !lconst && !rconst {
                    return Err(fail(
                        Category::NestedWordEquality,
                        "equality between words requires one side to be a constant",
                        span,
                    ));
                }
                let (l2, ld) = self.check_oexpr(l, scope)?;
                let (r2, rd) = self.check_oexpr(r, scope)?;
                unify_depth(ld, rd, span)?;
                Ok(BExpr::at(BExprKind::LitEq(Box::new(l2), Box::new(r2)), span))
            }
            BExprKind::Gen(body) => {
                if self.mode == Mode::Surface {
                    return Err(fail(Category::Type, "generator expressions are internal", span));
                }
                let (body2, ty) = self.check_hidden(body, scope)?;
                unify(ty, Ty::Bool, span)?;
                Ok(BExpr::at(BExprKind::Gen(Box::new(body2)), span))
            }
        }
    }

    /// Origin of a comparison operand when it is a position variable.
    fn operand_origin(
        &mut self,
        o: &CmpOperand,
        scope: &mut Scope,
        span: Span,
    ) -> Result<Option<Origin>> {
        match o {
            CmpOperand::Var(n) => {
                if let Some(orig) = scope.poss.get(n) {
                    Ok(Some(orig.clone()))
                } else if scope.outs.contains_key(n) || scope.bools.contains(n) {
                    Ok(None)
                } else {
                    Err(fail(Category::Unbound, format!("unknown variable `{}`", n), span))
                }
            }
            CmpOperand::Expr(e) => {
                // check it for unbound names, then report as a word operand
                let _ = self.check_oexpr(e, scope)?;
                Ok(None)
            }
            CmpOperand::Addr(_) => Err(fail(
                Category::Type,
                "unresolved address comparison (rewriter bug)",
                span,
            )),
        }
    }

    /// Check a generator body with all boolean variables hidden.
    fn check_hidden(&mut self, body: &Stmt, scope: &Scope) -> Result<(Stmt, Ty)> {
        let mut inner = Scope {
            outs: scope.outs.clone(),
            poss: scope.poss.clone(),
            bools: HashSet::new(),
            bound: scope.bound.clone(),
        };
        self.check_stmt(body, &mut inner)
    }

    fn check_call(
        &mut self,
        f: &Name,
        args: &[Arg],
        span: Span,
        scope: &mut Scope,
    ) -> Result<Vec<Arg>> {
        let sig = match self.sigs.get(f) {
            Some(sig) => sig.clone(),
            None => {
                return Err(fail(
                    Category::WhileOrRecursion,
                    format!("unknown function `{}` (functions may only call earlier definitions)", f),
                    span,
                ))
            }
        };
        if sig.params.len() != args.len() {
            return Err(fail(
                Category::Type,
                format!("`{}` expects {} arguments, got {}", f, sig.params.len(), args.len()),
                span,
            ));
        }
        let mut out = Vec::with_capacity(args.len());
        for (arg, psig) in args.iter().zip(&sig.params) {
            let (value, d) = self.check_oexpr(&arg.value, scope)?;
            unify_depth(d, Some(psig.depth), span)?;
            if arg.positions.len() != psig.npos {
                return Err(fail(
                    Category::Type,
                    format!(
                        "`{}` expects {} positions for this argument, got {}",
                        f,
                        psig.npos,
                        arg.positions.len()
                    ),
                    span,
                ));
            }
            if !arg.positions.is_empty() {
                let want = match &value.kind {
                    OExprKind::Var(v) => Origin::Var(v.clone()),
                    OExprKind::Gen(_, id) => Origin::Gen(*id),
                    _ => {
                        return Err(fail(
                            Category::CrossListComparison,
                            "positions can only be passed with a list variable",
                            span,
                        ))
                    }
                };
                for p in &arg.positions {
                    match scope.poss.get(p) {
                        Some(orig) if *orig == want => {}
                        Some(_) => {
                            return Err(fail(
                                Category::CrossListComparison,
                                format!("position `{}` does not index the list passed with it", p),
                                span,
                            ))
                        }
                        None => {
                            return Err(fail(
                                Category::Unbound,
                                format!("unknown position variable `{}`", p),
                                span,
                            ))
                        }
                    }
                }
            }
            out.push(Arg { value, positions: arg.positions.clone() });
        }
        Ok(out)
    }

    fn check_oexpr(&mut self, e: &OExpr, scope: &mut Scope) -> Result<(OExpr, Depth)> {
        let span = e.span;
        match &e.kind {
            OExprKind::Var(n) => {
                if let Some(d) = scope.outs.get(n) {
                    Ok((e.clone(), *d))
                } else if scope.bools.contains(n) || scope.poss.contains_key(n) {
                    Err(fail(Category::Type, format!("`{}` is not a word", n), span))
                } else {
                    Err(fail(Category::Unbound, format!("unknown variable `{}`", n), span))
                }
            }
            OExprKind::Const(c) => Ok((e.clone(), const_depth(c))),
            OExprKind::List(es) => {
                let mut depth = None;
                let mut out = Vec::with_capacity(es.len());
                for item in es {
                    let (i2, d) = self.check_oexpr(item, scope)?;
                    depth = Some(unify_depth(depth.flatten(), d, span)?);
                    out.push(i2);
                }
                let inner = depth.flatten();
                Ok((OExpr::at(OExprKind::List(out), span), inner.map(|n| n + 1)))
            }
            OExprKind::Call(f, args) => {
                let args2 = self.check_call(f, args, span, scope)?;
                match self.sigs[f].ret {
                    TypeAnn::Out(n) => Ok((OExpr::at(OExprKind::Call(f.clone(), args2), span), Some(n))),
                    TypeAnn::Bool => Err(fail(
                        Category::Type,
                        format!("`{}` returns a boolean, not a word", f),
                        span,
                    )),
                }
            }
            OExprKind::Gen(body, id) => {
                if self.mode == Mode::Surface {
                    return Err(fail(Category::Type, "generator expressions are internal", span));
                }
                let (body2, ty) = self.check_hidden(body, scope)?;
                let d = match ty {
                    Ty::Out(d) => d,
                    Ty::Neutral => None,
                    Ty::Bool => {
                        return Err(fail(Category::Type, "boolean generator in word position", span))
                    }
                };
                Ok((OExpr::at(OExprKind::Gen(Box::new(body2), *id), span), d))
            }
        }
    }
}

/// Depth of a constant; `None` for the polymorphic empty list.
fn const_depth(c: &CExpr) -> Depth {
    match c {
        CExpr::Char(_) => Some(0),
        CExpr::List(es) => {
            if es.is_empty() {
                None
            } else {
                const_depth(&es[0]).map(|n| n + 1)
            }
        }
    }
}

/// Type-check a program; `Mode::Surface` for freshly parsed programs.
pub fn typecheck_program(p: &Program, mode: Mode) -> Result<TypedProgram> {
    let mut checker = Checker { sigs: BTreeMap::new(), mode, loop_counter: 0 };
    let mut functions = Vec::with_capacity(p.functions.len());
    for f in &p.functions {
        if checker.sigs.contains_key(&f.name) {
            return Err(fail(
                Category::Shadowing,
                format!("function `{}` is defined twice", f.name),
                f.span,
            ));
        }
        functions.push(checker.check_fun(f)?);
    }
    if p.function(&p.main).is_none() {
        return Err(fail(Category::Unbound, format!("no function `{}`", p.main), Span::default()));
    }
    Ok(TypedProgram {
        program: Program { functions, main: p.main.clone() },
        sigs: checker.sigs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn check(text: &str) -> Result<TypedProgram> {
        typecheck_program(&parse_program(text).unwrap(), Mode::Surface)
    }

    #[test]
    fn well_typed_program_passes_and_is_idempotent() {
        let text = r#"
def getBetween(l : [Char] with (i, j)) : [Char] :=
    for (k, c) in enumerate(l) do
        if i <= k and k <= j then
            yield c
        endif
    done

def main(w : [Char]) : [Char] :=
    for (i, c) in enumerate(w) do
        for (j, d) in reversed(enumerate(w)) do
            yield getBetween(w with (i, j))
        done
    done
"#;
        // main yields [Char] values, so its declared type must be [[Char]]
        let text = text.replace("def main(w : [Char]) : [Char]", "def main(w : [Char]) : [[Char]]");
        let tp = check(&text).unwrap();
        assert_eq!(tp.sigs["getBetween"].params[0].npos, 2);
        let again = typecheck_program(&tp.program, Mode::Surface).unwrap();
        assert_eq!(again.program, tp.program);
    }

    #[test]
    fn cross_list_comparison_rejected() {
        let text = r#"
def eq(u : [Char], v : [Char]) : Bool :=
    for (i, ui) in enumerate(u) do
        for (j, vj) in enumerate(v) do
            if i == j then
                return True
            endif
        done
    done
    return False
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::CrossListComparison));
    }

    #[test]
    fn boolean_argument_rejected() {
        let text = r#"
def switch(b : Bool, u : [Char], v : [Char]) : [Char] :=
    if b then
        return u
    else
        return v
    endif
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::BooleanArgument));
    }

    #[test]
    fn shadowing_rejected() {
        let text = r#"
def eq(u : [Char], v : [Char]) : Bool :=
    let w := u in
    for (i, ui) in enumerate(w) do
        let w := v in
        yield ui
    done
    return False
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::Shadowing));
    }

    #[test]
    fn nested_word_equality_rejected() {
        let text = r#"
def top(x : [[Char]]) : [Char] :=
    for (i, elem) in enumerate(x) do
        if elem === "one" then
            yield 'a'
            yield 'b'
        endif
    done

def pcp(x : [[Char]]) : Bool :=
    return top(x) == top(x)
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::NestedWordEquality));
    }

    #[test]
    fn forward_reference_is_while_or_recursion() {
        let text = r#"
def f(w : [Char]) : [Char] :=
    return g(w)

def g(w : [Char]) : [Char] :=
    return w
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::WhileOrRecursion));
    }

    #[test]
    fn boolean_reset_rejected() {
        let text = r#"
def f(w : [Char]) : Bool :=
    let mut b := False in
    b := False
    return b
"#;
        let e = check(text).unwrap_err();
        assert_eq!(e.category(), Some(Category::BooleanReset));
    }

    #[test]
    fn bool_return_resorted() {
        let text = r#"
def f(w : [Char]) : Bool :=
    let mut b := False in
    return b
"#;
        let tp = check(text).unwrap();
        let body = &tp.program.functions[0].body;
        match &body.kind {
            StmtKind::LetBool(_, inner) => {
                assert!(matches!(inner.kind, StmtKind::Return(RetVal::Bool(_))));
            }
            other => panic!("unexpected shape {:?}", other),
        }
    }
}
