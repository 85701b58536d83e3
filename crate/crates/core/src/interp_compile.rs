//! Compilation of simple for-programs into symbolic first-order
//! string-to-string interpretations, and evaluation of interpretations on
//! concrete words.
//!
//! The compilation assigns one tag per print statement. Order formulas come
//! from quantifier-free address comparisons; domain formulas take the
//! conjunction of the branch conditions along the path to the print, with
//! boolean values supplied by program formulas (composition and iteration of
//! the boolean-state relation of the preceding code).

use crate::ast::{CmpOp, Dir, Name};
use crate::fo::{eval_table, Formula, Sort, Table};
use crate::simple::{SCond, SStmt, SimpleProgram};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Number of quantifier-rank bound checks that have passed (composition,
/// iteration, pullback and verification-formula construction all count).
pub static BOUND_CHECKS: AtomicUsize = AtomicUsize::new(0);

pub fn record_bound_check(ok: bool, what: &str, got: usize, bound: usize) {
    assert!(ok, "{} exceeds its bound: {} > {}", what, got, bound);
    BOUND_CHECKS.fetch_add(1, Ordering::Relaxed);
}

// ---------------------------------------------------------------------------
// Interpretations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutFn {
    Letter(char),
    /// Copy the letter at the given tuple coordinate (1-based, outermost
    /// loop first).
    Copy(usize),
}

#[derive(Debug, Clone)]
pub struct TagDef {
    pub name: String,
    pub arity: usize,
    /// Domain formula over free positions `x1..x{arity}`.
    pub dom: Formula,
    pub out: OutFn,
}

/// A first-order string-to-string interpretation over a finite constant set.
#[derive(Debug, Clone)]
pub struct Interpretation {
    pub constants: BTreeSet<char>,
    pub tags: Vec<TagDef>,
    /// `order[i][j]`: the φ≤ formula between elements of tags i and j, over
    /// free positions `x1..` and `y1..`.
    pub order: Vec<Vec<Formula>>,
}

impl Interpretation {
    pub fn max_arity(&self) -> usize {
        self.tags.iter().map(|t| t.arity).max().unwrap_or(0)
    }

    /// Sum of the sizes of all formulas (the |F| of the verification bounds).
    pub fn size(&self) -> usize {
        let doms: usize = self.tags.iter().map(|t| t.dom.size()).sum();
        let orders: usize = self.order.iter().flatten().map(|f| f.size()).sum();
        doms + orders
    }

    /// Quantifier rank of the deepest formula.
    pub fn qrank(&self) -> usize {
        let doms = self.tags.iter().map(|t| t.dom.qrank()).max().unwrap_or(0);
        let orders = self.order.iter().flatten().map(|f| f.qrank()).max().unwrap_or(0);
        doms.max(orders)
    }

    pub fn tag_names(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.name.clone()).collect()
    }
}

pub fn xvar(k: usize) -> String {
    format!("x{}", k)
}

pub fn yvar(k: usize) -> String {
    format!("y{}", k)
}

// ---------------------------------------------------------------------------
// Program formulas
// ---------------------------------------------------------------------------

pub fn ibvar(b: &str) -> String {
    format!("in:{}", b)
}

pub fn obvar(b: &str) -> String {
    format!("out:{}", b)
}

/// A first-order formula relating input boolean variables (`in:b`), output
/// boolean variables (`out:b`) and free input positions: the state
/// transformation of a piece of code.
#[derive(Debug, Clone)]
pub struct ProgramFormula {
    pub phi: Formula,
    pub inb: BTreeSet<Name>,
    pub outb: BTreeSet<Name>,
}

impl ProgramFormula {
    pub fn top() -> Self {
        ProgramFormula { phi: Formula::True, inb: BTreeSet::new(), outb: BTreeSet::new() }
    }

    /// Program formulas are functional: for every input exactly one output
    /// valuation satisfies them. With no output variables the empty valuation
    /// must therefore always satisfy, so the formula is equivalent to true.
    /// Collapsing it keeps boolean-free code quantifier-free.
    fn normalize(self) -> Self {
        if self.outb.is_empty() {
            ProgramFormula::top()
        } else {
            self
        }
    }
}

/// Fresh first-order variable names for quantifiers.
#[derive(Debug, Default)]
pub struct FoGen {
    counter: u32,
}

impl FoGen {
    pub fn new() -> Self {
        FoGen::default()
    }

    pub fn fresh(&mut self) -> String {
        self.counter += 1;
        format!("q{}", self.counter)
    }
}

/// Identity clause `in:b <=> out:b`.
fn identity_clause(b: &str) -> Formula {
    Formula::iff(Formula::BoolVar(ibvar(b)), Formula::BoolVar(obvar(b)))
}

/// Translate a simple-program condition, reading booleans as input variables.
fn cond_formula(c: &SCond) -> Formula {
    match c {
        SCond::True => Formula::True,
        SCond::False => Formula::False,
        SCond::Bool(b) => Formula::BoolVar(ibvar(b)),
        SCond::Not(e) => Formula::not(cond_formula(e)),
        SCond::And(l, r) => Formula::and2(cond_formula(l), cond_formula(r)),
        SCond::Or(l, r) => Formula::or2(cond_formula(l), cond_formula(r)),
        SCond::Label(i, true, ch) => Formula::LetterAt(i.clone(), *ch),
        SCond::Label(i, false, ch) => Formula::not(Formula::LetterAt(i.clone(), *ch)),
        SCond::Cmp(i, op, j) => {
            let (i, j) = (i.clone(), j.clone());
            match op {
                CmpOp::Eq => Formula::PosEq(i, j),
                CmpOp::Ne => Formula::not(Formula::PosEq(i, j)),
                CmpOp::Lt => Formula::PosLt(i, j),
                CmpOp::Le => Formula::pos_le(i, j),
                CmpOp::Gt => Formula::PosLt(j, i),
                CmpOp::Ge => Formula::pos_le(j, i),
            }
        }
    }
}

fn cond_bools(c: &SCond, out: &mut BTreeSet<Name>) {
    match c {
        SCond::Bool(b) => {
            out.insert(b.clone());
        }
        SCond::Not(e) => cond_bools(e, out),
        SCond::And(l, r) | SCond::Or(l, r) => {
            cond_bools(l, out);
            cond_bools(r, out);
        }
        _ => {}
    }
}

/// Conditional combination `(φ ∧ Φ1) ∨ (¬φ ∧ Φ2)` with identity padding for
/// outputs missing on one side.
pub fn if_formula(c: &SCond, then_f: &ProgramFormula, else_f: &ProgramFormula) -> ProgramFormula {
    let outb: BTreeSet<Name> = then_f.outb.union(&else_f.outb).cloned().collect();
    let pad = |f: &ProgramFormula| -> (Formula, BTreeSet<Name>) {
        let missing: Vec<&Name> = outb.difference(&f.outb).collect();
        let clauses: Vec<Formula> = missing.iter().map(|b| identity_clause(b)).collect();
        let mut inb = f.inb.clone();
        inb.extend(missing.iter().map(|b| (*b).clone()));
        (Formula::and(std::iter::once(f.phi.clone()).chain(clauses).collect()), inb)
    };
    let (tphi, tin) = pad(then_f);
    let (ephi, ein) = pad(else_f);
    let cphi = cond_formula(c);
    let mut inb: BTreeSet<Name> = tin.union(&ein).cloned().collect();
    cond_bools(c, &mut inb);
    // branch-independent effect: the case split is redundant (this is what
    // keeps boolean-free programs quantifier-free)
    let phi = if tphi == ephi {
        tphi
    } else {
        Formula::or2(Formula::and2(cphi.clone(), tphi), Formula::and2(Formula::not(cphi), ephi))
    };
    ProgramFormula { phi, inb, outb }.normalize()
}

/// Sequential composition. Quantifies only over `B1out ∩ (B2in ∪ B2out)`;
/// unconsumed outputs of the first formula pass through, and outputs read but
/// not rewritten by the second are re-emitted through identity padding.
pub fn compose_formulas(
    f1: &ProgramFormula,
    f2: &ProgramFormula,
    fresh: &mut FoGen,
) -> ProgramFormula {
    // pad f2 with identity for variables it reads from f1 without rewriting
    let pad2: Vec<Name> =
        f1.outb.intersection(&f2.inb).filter(|b| !f2.outb.contains(*b)).cloned().collect();
    let mut f2phi = f2.phi.clone();
    let mut f2out = f2.outb.clone();
    if !pad2.is_empty() {
        let clauses: Vec<Formula> = pad2.iter().map(|b| identity_clause(b)).collect();
        f2phi = Formula::and(std::iter::once(f2phi).chain(clauses).collect());
        f2out.extend(pad2.iter().cloned());
    }
    let quantified: Vec<Name> = f1
        .outb
        .iter()
        .filter(|b| f2.inb.contains(*b) || f2out.contains(*b))
        .cloned()
        .collect();
    let mut ren1 = BTreeMap::new();
    let mut ren2 = BTreeMap::new();
    let mut qvars = Vec::new();
    for b in &quantified {
        let v = fresh.fresh();
        ren1.insert(obvar(b), v.clone());
        if f2.inb.contains(b) {
            ren2.insert(ibvar(b), v.clone());
        }
        qvars.push(v);
    }
    let body = Formula::and2(f1.phi.rename_free(&ren1), f2phi.rename_free(&ren2));
    let mut phi = body;
    for v in qvars.into_iter().rev() {
        phi = Formula::exists(v, Sort::Bool, phi);
    }
    let q1 = f1.phi.qrank();
    let q2 = f2.phi.qrank();
    record_bound_check(
        phi.qrank() <= q1.max(q2) + quantified.len(),
        "composition quantifier rank",
        phi.qrank(),
        q1.max(q2) + quantified.len(),
    );
    let passthrough: BTreeSet<Name> = f2.inb.difference(&f1.outb).cloned().collect();
    let inb: BTreeSet<Name> = f1.inb.union(&passthrough).cloned().collect();
    let outb: BTreeSet<Name> = f1
        .outb
        .iter()
        .filter(|b| !quantified.contains(*b))
        .cloned()
        .chain(f2out)
        .collect();
    ProgramFormula { phi, inb, outb }.normalize()
}

/// Iteration of a loop body over input positions. `bound`, when present,
/// restricts the iteration to the positions strictly before it in iteration
/// order (used for the partial prefix of a loop in domain formulas).
///
/// The accelerated construction guesses the at most `n = |outb|` positions
/// where the monotone boolean state changes, the intermediate state vectors,
/// and requires stability strictly between them.
pub fn iterate_formula(
    body: &ProgramFormula,
    itervar: &str,
    dir: Dir,
    bound: Option<&str>,
    fresh: &mut FoGen,
) -> ProgramFormula {
    let state: Vec<Name> = body.outb.iter().cloned().collect();
    let n = state.len();
    let base_qrank = body.phi.qrank();

    // `a` is visited strictly before `b`
    let precedes = |a: &str, b: &str| -> Formula {
        match dir {
            Dir::Fwd => Formula::PosLt(a.into(), b.into()),
            Dir::Bwd => Formula::PosLt(b.into(), a.into()),
        }
    };

    let inb: BTreeSet<Name> = body.inb.union(&body.outb).cloned().collect();
    let outb = body.outb.clone();

    let phi = if n == 0 {
        // stateless body: require the body formula at every iterated position
        let p = fresh.fresh();
        let mut inst = body.phi.rename_free(&BTreeMap::from([(itervar.to_string(), p.clone())]));
        if let Some(bv) = bound {
            inst = Formula::implies(precedes(&p, bv), inst);
        }
        Formula::forall(p, Sort::Pos, inst)
    } else {
        // State vectors: s0 = input, s{n} = output, s1..s{n-1} quantified.
        // The quantifiers are nested level by level (one position and one
        // vector per level) so every subformula stays narrow: flat
        // quantification would put all n^2 booleans free under one
        // conjunction and make finite-model evaluation intractable.
        let mut vecs: Vec<Vec<String>> = Vec::with_capacity(n + 1);
        vecs.push(state.iter().map(|b| ibvar(b)).collect());
        for _ in 1..n {
            vecs.push(state.iter().map(|_| fresh.fresh()).collect());
        }
        vecs.push(state.iter().map(|b| obvar(b)).collect());
        let pvars: Vec<String> = (0..n).map(|_| fresh.fresh()).collect();

        // the body at a given position with given input/output vectors
        let inst = |pos: &str, from: &[String], to: &[String]| -> Formula {
            let mut ren = BTreeMap::new();
            ren.insert(itervar.to_string(), pos.to_string());
            for (b, v) in state.iter().zip(from) {
                ren.insert(ibvar(b), v.clone());
            }
            for (b, v) in state.iter().zip(to) {
                ren.insert(obvar(b), v.clone());
            }
            body.phi.rename_free(&ren)
        };

        // stability on the open segment (after, before), under state vec
        let mut stab = |after: Option<&str>, before: Option<&str>, vec: &[String]| -> Formula {
            let p = fresh.fresh();
            let mut guards = Vec::new();
            if let Some(a) = after {
                guards.push(precedes(a, &p));
            }
            if let Some(b) = before {
                guards.push(precedes(&p, b));
            }
            let seg = Formula::implies(Formula::and(guards), inst(&p, vec, vec));
            Formula::forall(p, Sort::Pos, seg)
        };

        // build levels inside out: level j (1-based) binds p_j and vec_j
        let mut inner = stab(Some(&pvars[n - 1]), bound, &vecs[n]);
        for j in (1..=n).rev() {
            let mut conj = Vec::new();
            if j >= 2 {
                conj.push(Formula::or2(
                    precedes(&pvars[j - 2], &pvars[j - 1]),
                    Formula::PosEq(pvars[j - 2].clone(), pvars[j - 1].clone()),
                ));
            }
            if let Some(bv) = bound {
                conj.push(precedes(&pvars[j - 1], bv));
            }
            // each position is applied once: a step repeating the previous
            // position is a pure stutter (state equality), never a second
            // application of the body
            let step = inst(&pvars[j - 1], &vecs[j - 1], &vecs[j]);
            let step = if j >= 2 {
                let same_pos = Formula::PosEq(pvars[j - 2].clone(), pvars[j - 1].clone());
                let vec_eq = Formula::and(
                    vecs[j - 1]
                        .iter()
                        .zip(&vecs[j])
                        .map(|(a, b)| {
                            Formula::iff(Formula::BoolVar(a.clone()), Formula::BoolVar(b.clone()))
                        })
                        .collect(),
                );
                Formula::or2(
                    Formula::and2(same_pos.clone(), vec_eq),
                    Formula::and2(Formula::not(same_pos), step),
                )
            } else {
                step
            };
            conj.push(step);
            let seg_before = if j >= 2 { Some(pvars[j - 2].as_str()) } else { None };
            conj.push(stab(seg_before, Some(&pvars[j - 1]), &vecs[j - 1]));
            conj.push(inner);
            let mut level = Formula::and(conj);
            if j < n {
                for v in vecs[j].clone().into_iter().rev() {
                    level = Formula::exists(v, Sort::Bool, level);
                }
            }
            inner = Formula::exists(pvars[j - 1].clone(), Sort::Pos, level);
        }
        let main = inner;

        // no position to iterate: the state passes through unchanged
        let identity = Formula::and(state.iter().map(|b| identity_clause(b)).collect());
        let nothing_to_do = match bound {
            None => {
                let z = fresh.fresh();
                Formula::not(Formula::exists(z, Sort::Pos, Formula::True))
            }
            Some(bv) => {
                let z = fresh.fresh();
                Formula::not(Formula::exists(z.clone(), Sort::Pos, precedes(&z, bv)))
            }
        };
        Formula::or2(Formula::and2(nothing_to_do, identity), main)
    };

    record_bound_check(
        phi.qrank() <= base_qrank + n * n + n + 1,
        "iteration quantifier rank",
        phi.qrank(),
        base_qrank + n * n + n + 1,
    );
    ProgramFormula { phi, inb, outb }.normalize()
}

/// Scope a boolean declared at a loop-body head (or the program top): the
/// input side is pinned to false, the final value is dropped.
fn scope_bool(b: &Name, f: &ProgramFormula, fresh: &mut FoGen) -> ProgramFormula {
    let init = ProgramFormula {
        phi: Formula::not(Formula::BoolVar(obvar(b))),
        inb: BTreeSet::new(),
        outb: BTreeSet::from([b.clone()]),
    };
    let mut composed = compose_formulas(&init, f, fresh);
    if composed.outb.contains(b) {
        let v = fresh.fresh();
        let phi = composed.phi.rename_free(&BTreeMap::from([(obvar(b), v.clone())]));
        composed.phi = Formula::exists(v, Sort::Bool, phi);
        composed.outb.remove(b);
    }
    composed.inb.remove(b);
    composed.normalize()
}

/// Program formula of a single statement.
pub fn stmt_program_formula(s: &SStmt, fresh: &mut FoGen) -> ProgramFormula {
    match s {
        SStmt::SetTrue(b) => ProgramFormula {
            phi: Formula::BoolVar(obvar(b)),
            inb: BTreeSet::new(),
            outb: BTreeSet::from([b.clone()]),
        },
        SStmt::PrintLabel(_) | SStmt::PrintChar(_) | SStmt::Skip => ProgramFormula::top(),
        SStmt::If(c, t, e) => {
            let tf = seq_program_formula(t, fresh);
            let ef = seq_program_formula(e, fresh);
            if_formula(c, &tf, &ef)
        }
        SStmt::For { dir, var, bools, body } => {
            let mut bf = seq_program_formula(body, fresh);
            for b in bools.iter().rev() {
                bf = scope_bool(b, &bf, fresh);
            }
            iterate_formula(&bf, var, *dir, None, fresh)
        }
    }
}

/// Program formula of a statement sequence.
pub fn seq_program_formula(stmts: &[SStmt], fresh: &mut FoGen) -> ProgramFormula {
    let mut acc = ProgramFormula::top();
    for s in stmts {
        let f = stmt_program_formula(s, fresh);
        acc = compose_formulas(&acc, &f, fresh);
    }
    acc
}

// ---------------------------------------------------------------------------
// Compilation of a simple program into an interpretation
// ---------------------------------------------------------------------------

/// Symbolic value of a boolean along the walk to a print.
#[derive(Debug, Clone, PartialEq, Eq)]
enum SVal {
    Const(bool),
    Var(String),
}

/// Reachability context: the conjunction of everything known on the path so
/// far, with the current symbolic state of every visible boolean.
#[derive(Debug, Clone)]
struct Reach {
    phi: Formula,
    state: BTreeMap<Name, SVal>,
}

impl Reach {
    fn top() -> Self {
        Reach { phi: Formula::True, state: BTreeMap::new() }
    }

    /// Substitute the state into a formula over `in:b` variables.
    fn subst_in(&self, f: &Formula) -> Formula {
        let mut consts = BTreeMap::new();
        let mut renames = BTreeMap::new();
        for (b, v) in &self.state {
            match v {
                SVal::Const(c) => {
                    consts.insert(ibvar(b), *c);
                }
                SVal::Var(name) => {
                    renames.insert(ibvar(b), name.clone());
                }
            }
        }
        f.subst_bool_consts(&consts).rename_free(&renames)
    }

    /// Apply a program formula: conjoin its (state-substituted) formula and
    /// advance the state of its outputs to fresh variables. Formulas that
    /// reduce to a constant update keep the context quantifier-free.
    fn apply(&mut self, pf: &ProgramFormula, fresh: &mut FoGen) {
        let substituted = self.subst_in(&pf.phi);
        let mut renames = BTreeMap::new();
        let mut new_state = Vec::new();
        for b in &pf.outb {
            let v = fresh.fresh();
            renames.insert(obvar(b), v.clone());
            new_state.push((b.clone(), v));
        }
        let renamed = substituted.rename_free(&renames);
        match try_fold(&renamed, &new_state) {
            Some(updates) => {
                for (b, val) in updates {
                    self.state.insert(b, SVal::Const(val));
                }
            }
            None => {
                self.phi = Formula::and2(self.phi.clone(), renamed);
                for (b, v) in new_state {
                    self.state.insert(b, SVal::Var(v));
                }
            }
        }
    }

    /// Conjoin a path condition evaluated at the current state.
    fn require(&mut self, c: &SCond, positive: bool) {
        let f = self.subst_in(&cond_formula(c));
        let f = if positive { f } else { Formula::not(f) };
        self.phi = Formula::and2(self.phi.clone(), f);
    }

    /// Close into a domain formula: existentially quantify the remaining
    /// boolean state variables and rename loop positions to tuple names.
    fn close(&self, chain: &[(Name, Dir)]) -> Formula {
        let mut phi = self.phi.clone();
        let free = phi.free_vars();
        let bools: Vec<&String> =
            free.iter().filter(|(_, s)| **s == Sort::Bool).map(|(v, _)| v).collect();
        for v in bools.into_iter().rev() {
            phi = Formula::exists(v.clone(), Sort::Bool, phi);
        }
        let renames: BTreeMap<String, String> =
            chain.iter().enumerate().map(|(k, (var, _))| (var.clone(), xvar(k + 1))).collect();
        phi.rename_free(&renames)
    }
}

/// Detect the shapes `v` / `not v` / conjunctions thereof so that
/// boolean-free paths produce quantifier-free domains.
fn try_fold(f: &Formula, new_state: &[(Name, String)]) -> Option<Vec<(Name, bool)>> {
    if new_state.is_empty() {
        return match f {
            Formula::True => Some(Vec::new()),
            _ => None,
        };
    }
    let mut by_var: BTreeMap<&str, &Name> =
        new_state.iter().map(|(b, v)| (v.as_str(), b)).collect();
    let mut updates = Vec::new();
    let conjuncts: Vec<&Formula> = match f {
        Formula::And(fs) => fs.iter().collect(),
        other => vec![other],
    };
    for c in &conjuncts {
        match c {
            Formula::BoolVar(v) => {
                let b = by_var.remove(v.as_str())?;
                updates.push((b.clone(), true));
            }
            Formula::Not(inner) => match inner.as_ref() {
                Formula::BoolVar(v) => {
                    let b = by_var.remove(v.as_str())?;
                    updates.push((b.clone(), false));
                }
                _ => return None,
            },
            _ => return None,
        }
    }
    if by_var.is_empty() {
        Some(updates)
    } else {
        None
    }
}

struct PrintSite {
    doc_index: usize,
    /// Enclosing loops: (loop id, position var, direction), outermost first.
    chain: Vec<(usize, Name, Dir)>,
    out: OutFn,
    dom: Formula,
}

struct Compiler {
    fresh: FoGen,
    prints: Vec<PrintSite>,
    loop_counter: usize,
}

impl Compiler {
    fn walk(&mut self, stmts: &[SStmt], reach: &mut Reach, chain: &[(usize, Name, Dir)]) {
        for s in stmts {
            match s {
                SStmt::PrintLabel(var) => {
                    let coord = chain
                        .iter()
                        .position(|(_, v, _)| v == var)
                        .expect("printed position is bound by an enclosing loop");
                    self.record(OutFn::Copy(coord + 1), reach, chain);
                }
                SStmt::PrintChar(c) => {
                    self.record(OutFn::Letter(*c), reach, chain);
                }
                SStmt::Skip => {}
                SStmt::SetTrue(b) => {
                    reach.state.insert(b.clone(), SVal::Const(true));
                }
                SStmt::If(c, t, e) => {
                    let mut rt = reach.clone();
                    rt.require(c, true);
                    self.walk(t, &mut rt, chain);
                    let mut re = reach.clone();
                    re.require(c, false);
                    self.walk(e, &mut re, chain);
                    // continue after the branch with the merged effect
                    let tf = seq_program_formula(t, &mut self.fresh);
                    let ef = seq_program_formula(e, &mut self.fresh);
                    let pf = if_formula(c, &tf, &ef);
                    reach.apply(&pf, &mut self.fresh);
                }
                SStmt::For { dir, var, bools, body } => {
                    let loop_id = self.loop_counter;
                    self.loop_counter += 1;
                    let mut bf = seq_program_formula(body, &mut self.fresh);
                    for b in bools.iter().rev() {
                        bf = scope_bool(b, &bf, &mut self.fresh);
                    }
                    // inside: earlier iterations of this loop, then the body
                    let mut inner = reach.clone();
                    let partial = iterate_formula(&bf, var, *dir, Some(var), &mut self.fresh);
                    inner.apply(&partial, &mut self.fresh);
                    for b in bools {
                        inner.state.insert(b.clone(), SVal::Const(false));
                    }
                    let mut chain2 = chain.to_vec();
                    chain2.push((loop_id, var.clone(), *dir));
                    self.walk(body, &mut inner, &chain2);
                    // after the loop
                    let full = iterate_formula(&bf, var, *dir, None, &mut self.fresh);
                    reach.apply(&full, &mut self.fresh);
                }
            }
        }
    }

    fn record(&mut self, out: OutFn, reach: &Reach, chain: &[(usize, Name, Dir)]) {
        let plain: Vec<(Name, Dir)> = chain.iter().map(|(_, v, d)| (v.clone(), *d)).collect();
        let dom = reach.close(&plain);
        self.prints.push(PrintSite { doc_index: self.prints.len(), chain: chain.to_vec(), out, dom });
    }
}

/// Quantifier-free order formula: strict happens-before of print `a`'s
/// element (tuple `x1..`) against print `b`'s (tuple `y1..`), comparing the
/// shared loop prefix in iteration order and breaking ties by source order.
fn before_formula(a: &PrintSite, b: &PrintSite) -> Formula {
    let shared =
        a.chain.iter().zip(&b.chain).take_while(|((ia, _, _), (ib, _, _))| ia == ib).count();
    let eq_prefix =
        |k: usize| -> Vec<Formula> { (0..k).map(|m| Formula::PosEq(xvar(m + 1), yvar(m + 1))).collect() };
    let mut disjuncts = Vec::new();
    for k in 0..shared {
        let (_, _, dir) = a.chain[k];
        let lt = match dir {
            Dir::Fwd => Formula::PosLt(xvar(k + 1), yvar(k + 1)),
            Dir::Bwd => Formula::PosLt(yvar(k + 1), xvar(k + 1)),
        };
        let mut conj = eq_prefix(k);
        conj.push(lt);
        disjuncts.push(Formula::and(conj));
    }
    if a.doc_index < b.doc_index {
        disjuncts.push(Formula::and(eq_prefix(shared)));
    }
    Formula::or(disjuncts)
}

/// Compile a simple program into an interpretation: one tag per print.
pub fn compile_interpretation(sp: &SimpleProgram) -> Interpretation {
    let mut compiler = Compiler { fresh: FoGen::new(), prints: Vec::new(), loop_counter: 0 };
    let mut reach = Reach::top();
    for b in &sp.bools {
        reach.state.insert(b.clone(), SVal::Const(false));
    }
    compiler.walk(&sp.body, &mut reach, &[]);

    let mut constants = BTreeSet::new();
    collect_letters(&sp.body, &mut constants);

    let tags: Vec<TagDef> = compiler
        .prints
        .iter()
        .map(|p| TagDef {
            name: format!("t{}", p.doc_index),
            arity: p.chain.len(),
            dom: p.dom.clone(),
            out: p.out.clone(),
        })
        .collect();

    let n = compiler.prints.len();
    let mut order = vec![vec![Formula::False; n]; n];
    for i in 0..n {
        for j in 0..n {
            let before = before_formula(&compiler.prints[i], &compiler.prints[j]);
            let same = if i == j {
                Formula::and(
                    (0..compiler.prints[i].chain.len())
                        .map(|k| Formula::PosEq(xvar(k + 1), yvar(k + 1)))
                        .collect(),
                )
            } else {
                Formula::False
            };
            order[i][j] = Formula::or2(before, same);
        }
    }

    Interpretation { constants, tags, order }
}

fn collect_letters(stmts: &[SStmt], out: &mut BTreeSet<char>) {
    fn cond(c: &SCond, out: &mut BTreeSet<char>) {
        match c {
            SCond::Label(_, _, ch) => {
                out.insert(*ch);
            }
            SCond::Not(e) => cond(e, out),
            SCond::And(l, r) | SCond::Or(l, r) => {
                cond(l, out);
                cond(r, out);
            }
            _ => {}
        }
    }
    for s in stmts {
        match s {
            SStmt::PrintChar(c) => {
                out.insert(*c);
            }
            SStmt::If(c, t, e) => {
                cond(c, out);
                collect_letters(t, out);
                collect_letters(e, out);
            }
            SStmt::For { body, .. } => collect_letters(body, out),
            _ => {}
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation of interpretations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutcome {
    pub output: String,
    /// Whether the order formulas formed a total order on the surviving
    /// elements (when they do not, the output is defined to be empty).
    pub total_order: bool,
}

fn table_lookup(t: &Table, xs: &[usize], ys: Option<&[usize]>) -> bool {
    let vals: Vec<usize> = t
        .vars
        .iter()
        .map(|(v, _)| {
            if let Some(k) = v.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                xs[k - 1]
            } else if let (Some(ys), Some(k)) =
                (ys, v.strip_prefix('y').and_then(|s| s.parse::<usize>().ok()))
            {
                ys[k - 1]
            } else {
                panic!("unexpected free variable `{}` in interpretation formula", v)
            }
        })
        .collect();
    t.get(&vals)
}

/// Evaluate an interpretation on a word: enumerate tagged position tuples,
/// filter by the domain formulas, sort by the order formulas (empty output if
/// they fail to be a total order), then emit letters via the output function.
pub fn eval_interpretation_full(interp: &Interpretation, word: &str) -> EvalOutcome {
    let chars: Vec<char> = word.chars().collect();
    let tags = interp.tag_names();

    let mut elements: Vec<(usize, Vec<usize>)> = Vec::new();
    for (ti, tag) in interp.tags.iter().enumerate() {
        let table = eval_table(&tag.dom, &chars, &tags).expect("domain evaluation");
        let count = chars.len().checked_pow(tag.arity as u32).unwrap_or(0);
        let count = if tag.arity == 0 { 1 } else { count };
        let mut tuple = vec![0usize; tag.arity];
        for step in 0..count {
            if table_lookup(&table, &tuple, None) {
                elements.push((ti, tuple.clone()));
            }
            if step + 1 < count {
                for k in (0..tag.arity).rev() {
                    tuple[k] += 1;
                    if tuple[k] < chars.len() {
                        break;
                    }
                    tuple[k] = 0;
                }
            }
        }
    }

    let m = elements.len();
    if m == 0 {
        return EvalOutcome { output: String::new(), total_order: true };
    }

    let mut order_tables: BTreeMap<(usize, usize), Table> = BTreeMap::new();
    for i in 0..interp.tags.len() {
        for j in 0..interp.tags.len() {
            let t = eval_table(&interp.order[i][j], &chars, &tags).expect("order evaluation");
            order_tables.insert((i, j), t);
        }
    }
    let le = |a: &(usize, Vec<usize>), b: &(usize, Vec<usize>)| -> bool {
        table_lookup(&order_tables[&(a.0, b.0)], &a.1, Some(&b.1))
    };

    // total-order verification by rank counting: ranks must be the distinct
    // values 1..m and must explain the relation
    let ranks: Vec<usize> =
        elements.iter().map(|a| elements.iter().filter(|b| le(b, a)).count()).collect();
    let mut seen = vec![false; m + 1];
    let mut total = true;
    for &r in &ranks {
        if r == 0 || r > m || seen[r] {
            total = false;
            break;
        }
        seen[r] = true;
    }
    if total {
        'outer: for (ia, a) in elements.iter().enumerate() {
            for (ib, b) in elements.iter().enumerate() {
                if le(a, b) != (ranks[ia] <= ranks[ib]) {
                    total = false;
                    break 'outer;
                }
            }
        }
    }
    if !total {
        return EvalOutcome { output: String::new(), total_order: false };
    }

    let mut sorted: Vec<usize> = (0..m).collect();
    sorted.sort_by_key(|&i| ranks[i]);
    let mut output = String::with_capacity(m);
    for &i in &sorted {
        let (ti, tuple) = &elements[i];
        match &interp.tags[*ti].out {
            OutFn::Letter(c) => output.push(*c),
            OutFn::Copy(k) => output.push(chars[tuple[*k - 1]]),
        }
    }
    EvalOutcome { output, total_order: true }
}

pub fn eval_interpretation(interp: &Interpretation, word: &str) -> String {
    eval_interpretation_full(interp, word).output
}

// ---------------------------------------------------------------------------
// Printing (the compiler's `--emit interp` format)
// ---------------------------------------------------------------------------

pub fn print_interpretation(interp: &Interpretation) -> String {
    let mut out = String::new();
    let consts: Vec<String> = interp.constants.iter().map(|c| format!("'{}'", c)).collect();
    let _ = writeln!(out, "constants: {{{}}}", consts.join(", "));
    let _ = writeln!(out, "tags:");
    for t in &interp.tags {
        let o = match &t.out {
            OutFn::Letter(c) => format!("'{}'", c),
            OutFn::Copy(k) => format!("copy {}", k),
        };
        let _ = writeln!(out, "  {} arity {} out {}", t.name, t.arity, o);
    }
    for t in &interp.tags {
        let _ = writeln!(out, "dom {}: {}", t.name, crate::fo::pretty(&t.dom));
    }
    for (i, ti) in interp.tags.iter().enumerate() {
        for (j, tj) in interp.tags.iter().enumerate() {
            let _ =
                writeln!(out, "le {} {}: {}", ti.name, tj.name, crate::fo::pretty(&interp.order[i][j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fo::{eval_formula, Val, WordModel};
    use crate::parser::parse_program;
    use crate::rewrite::rewrite_to_simple;
    use crate::simple::eval_simple;
    use crate::typecheck::{typecheck_program, Mode};

    fn compile_text(text: &str) -> (SimpleProgram, Interpretation) {
        let tp = typecheck_program(&parse_program(text).unwrap(), Mode::Surface).unwrap();
        let sp = rewrite_to_simple(&tp).unwrap().simple;
        let interp = compile_interpretation(&sp);
        (sp, interp)
    }

    fn words(alphabet: &[char], maxlen: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        let mut layer = vec![String::new()];
        for _ in 0..maxlen {
            let mut next = Vec::new();
            for w in &layer {
                for c in alphabet {
                    let mut w2 = w.clone();
                    w2.push(*c);
                    next.push(w2);
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn settrue_formula_is_obvar() {
        let mut fresh = FoGen::new();
        let f = stmt_program_formula(&SStmt::SetTrue("b".into()), &mut fresh);
        assert_eq!(f.phi, Formula::BoolVar(obvar("b")));
        assert_eq!(f.outb.into_iter().collect::<Vec<_>>(), vec!["b".to_string()]);
        let skip = stmt_program_formula(&SStmt::Skip, &mut fresh);
        assert_eq!(skip.phi, Formula::True);
        let print = stmt_program_formula(&SStmt::PrintChar('x'), &mut fresh);
        assert_eq!(print.phi, Formula::True);
    }

    /// Oracle: run a program formula as a function on a word by enumerating
    /// output valuations; `None` when not exactly one output satisfies.
    fn formula_function(
        pf: &ProgramFormula,
        word: &str,
        in_vals: &BTreeMap<Name, bool>,
        pos_vals: &BTreeMap<Name, usize>,
    ) -> Option<BTreeMap<Name, bool>> {
        let chars: Vec<char> = word.chars().collect();
        let consts: BTreeMap<String, bool> = in_vals.iter().map(|(b, v)| (ibvar(b), *v)).collect();
        let phi = pf.phi.subst_bool_consts(&consts);
        let mut result = None;
        let outs: Vec<Name> = pf.outb.iter().cloned().collect();
        for bits in 0..(1usize << outs.len()) {
            let out_vals: BTreeMap<Name, bool> =
                outs.iter().enumerate().map(|(k, b)| (b.clone(), bits >> k & 1 == 1)).collect();
            let oconsts: BTreeMap<String, bool> =
                out_vals.iter().map(|(b, v)| (obvar(b), *v)).collect();
            let grounded = phi.subst_bool_consts(&oconsts);
            let mut m = WordModel::closed(&chars, &[]);
            for (p, v) in pos_vals {
                m.valuation.insert(p.clone(), Val::Pos(*v));
            }
            if eval_formula(&grounded, &m) {
                if result.is_some() {
                    return None;
                }
                result = Some(out_vals);
            }
        }
        result
    }

    #[test]
    fn if_formula_is_functional() {
        let mut fresh = FoGen::new();
        let s = SStmt::If(
            SCond::Label("i".into(), true, 'a'),
            vec![SStmt::SetTrue("b".into())],
            vec![SStmt::Skip],
        );
        let pf = stmt_program_formula(&s, &mut fresh);
        for word in ["a", "b", "ab", "ba"] {
            for i in 0..word.len() {
                for b0 in [false, true] {
                    let out = formula_function(
                        &pf,
                        word,
                        &BTreeMap::from([("b".to_string(), b0)]),
                        &BTreeMap::from([("i".to_string(), i)]),
                    )
                    .expect("exactly one output");
                    let expect = b0 || word.as_bytes()[i] == b'a';
                    assert_eq!(out["b"], expect, "word {:?} i {} b0 {}", word, i, b0);
                }
            }
        }
    }

    #[test]
    fn composition_agrees_with_sequencing() {
        let mut fresh = FoGen::new();
        let set_b = stmt_program_formula(&SStmt::SetTrue("b".into()), &mut fresh);
        let test_b = stmt_program_formula(
            &SStmt::If(SCond::Bool("b".into()), vec![SStmt::SetTrue("c".into())], vec![]),
            &mut fresh,
        );
        let composed = compose_formulas(&set_b, &test_b, &mut fresh);
        for b0 in [false, true] {
            for c0 in [false, true] {
                let out = formula_function(
                    &composed,
                    "x",
                    &BTreeMap::from([("b".to_string(), b0), ("c".to_string(), c0)]),
                    &BTreeMap::new(),
                )
                .expect("functional");
                assert!(out["b"], "b set unconditionally");
                assert!(out["c"], "b is true when tested");
            }
        }
    }

    #[test]
    fn composition_with_top_adds_no_quantifiers() {
        let mut fresh = FoGen::new();
        let set_b = stmt_program_formula(&SStmt::SetTrue("b".into()), &mut fresh);
        let composed = compose_formulas(&set_b, &ProgramFormula::top(), &mut fresh);
        let out = formula_function(&composed, "x", &BTreeMap::new(), &BTreeMap::new()).unwrap();
        assert!(out["b"]);
        assert_eq!(composed.phi.qrank(), 0, "disjoint variable sets add no quantifiers");
        let composed2 = compose_formulas(&ProgramFormula::top(), &set_b, &mut fresh);
        assert_eq!(composed2.phi.qrank(), 0);
    }

    /// Reference iteration: explicit sequential composition of the body at
    /// every position, pinned through designated free variables.
    fn explicit_loop(
        bf: &ProgramFormula,
        itervar: &str,
        dir: Dir,
        wordlen: usize,
        fresh: &mut FoGen,
    ) -> ProgramFormula {
        let order: Vec<usize> = match dir {
            Dir::Fwd => (0..wordlen).collect(),
            Dir::Bwd => (0..wordlen).rev().collect(),
        };
        let mut acc = ProgramFormula {
            phi: Formula::and(bf.outb.iter().map(|b| identity_clause(b)).collect()),
            inb: bf.outb.clone(),
            outb: bf.outb.clone(),
        };
        for i in order {
            let pinned = format!("pin{}", i);
            let inst = ProgramFormula {
                phi: bf.phi.rename_free(&BTreeMap::from([(itervar.to_string(), pinned)])),
                inb: bf.inb.clone(),
                outb: bf.outb.clone(),
            };
            acc = compose_formulas(&acc, &inst, fresh);
        }
        acc
    }

    #[test]
    fn iteration_agrees_with_explicit_composition() {
        let mut fresh = FoGen::new();
        let body = stmt_program_formula(
            &SStmt::If(
                SCond::Label("i".into(), true, 'a'),
                vec![SStmt::SetTrue("seen".into())],
                vec![],
            ),
            &mut fresh,
        );
        for dir in [Dir::Fwd, Dir::Bwd] {
            let iterated = iterate_formula(&body, "i", dir, None, &mut fresh);
            for word in ["", "a", "b", "ab", "ba", "bb", "bab", "bbb"] {
                let explicit = explicit_loop(&body, "i", dir, word.len(), &mut fresh);
                for s0 in [false, true] {
                    let ins = BTreeMap::from([("seen".to_string(), s0)]);
                    let pos_vals: BTreeMap<Name, usize> =
                        (0..word.len()).map(|i| (format!("pin{}", i), i)).collect();
                    let got = formula_function(&iterated, word, &ins, &BTreeMap::new())
                        .expect("iterated formula functional");
                    let expect = formula_function(&explicit, word, &ins, &pos_vals)
                        .expect("explicit composition functional");
                    assert_eq!(got, expect, "word {:?} dir {:?} s0 {}", word, dir, s0);
                }
            }
        }
    }

    #[test]
    fn iteration_on_two_booleans_with_order_dependence() {
        // second boolean only set once the first is already set, which makes
        // the intermediate state vector matter
        let mut fresh = FoGen::new();
        let body = seq_program_formula(
            &[
                SStmt::If(
                    SCond::And(
                        Box::new(SCond::Bool("a".into())),
                        Box::new(SCond::Label("i".into(), true, 'b')),
                    ),
                    vec![SStmt::SetTrue("b".into())],
                    vec![],
                ),
                SStmt::If(
                    SCond::Label("i".into(), true, 'a'),
                    vec![SStmt::SetTrue("a".into())],
                    vec![],
                ),
            ],
            &mut fresh,
        );
        for dir in [Dir::Fwd, Dir::Bwd] {
            let iterated = iterate_formula(&body, "i", dir, None, &mut fresh);
            for word in ["", "a", "ab", "ba", "aab", "abab", "bbaa"] {
                let explicit = explicit_loop(&body, "i", dir, word.len(), &mut fresh);
                for bits in 0..4 {
                    let ins = BTreeMap::from([
                        ("a".to_string(), bits & 1 == 1),
                        ("b".to_string(), bits & 2 == 2),
                    ]);
                    let pos_vals: BTreeMap<Name, usize> =
                        (0..word.len()).map(|i| (format!("pin{}", i), i)).collect();
                    let got = formula_function(&iterated, word, &ins, &BTreeMap::new())
                        .expect("functional");
                    let expect =
                        formula_function(&explicit, word, &ins, &pos_vals).expect("functional");
                    assert_eq!(got, expect, "word {:?} dir {:?} bits {}", word, dir, bits);
                }
            }
        }
    }

    #[test]
    fn iteration_of_position_counting_body() {
        // counting body: the first visited position sets s0, the second s1,
        // the third s2. Applying the body twice at one position corrupts the
        // count, so this exercises the stutter handling.
        let mut fresh = FoGen::new();
        let chain = SStmt::If(
            SCond::Not(Box::new(SCond::Bool("s0".into()))),
            vec![SStmt::SetTrue("s0".into())],
            vec![SStmt::If(
                SCond::Not(Box::new(SCond::Bool("s1".into()))),
                vec![SStmt::SetTrue("s1".into())],
                vec![SStmt::SetTrue("s2".into())],
            )],
        );
        let body = stmt_program_formula(&chain, &mut fresh);
        for dir in [Dir::Fwd, Dir::Bwd] {
            let iterated = iterate_formula(&body, "i", dir, None, &mut fresh);
            for word in ["", "a", "aa", "aaa", "aaaa"] {
                let ins = BTreeMap::from([
                    ("s0".to_string(), false),
                    ("s1".to_string(), false),
                    ("s2".to_string(), false),
                ]);
                let got = formula_function(&iterated, word, &ins, &BTreeMap::new())
                    .expect("functional");
                // expected: exactly min(len, k) flags set
                let len = word.len();
                assert_eq!(got["s0"], len >= 1, "word {:?}", word);
                assert_eq!(got["s1"], len >= 2, "word {:?}", word);
                assert_eq!(got["s2"], len >= 3, "word {:?}", word);
            }
        }
    }

    #[test]
    fn identity_program_compiles_to_trivial_interpretation() {
        let (_, interp) = compile_text(
            "def main(w : [Char]) : [Char] :=\n for (i, c) in enumerate(w) do\n yield c\n done\n",
        );
        assert_eq!(interp.tags.len(), 1);
        assert_eq!(interp.tags[0].arity, 1);
        assert_eq!(interp.tags[0].out, OutFn::Copy(1));
        assert_eq!(interp.tags[0].dom, Formula::True);
        assert_eq!(interp.qrank(), 0);
        assert_eq!(eval_interpretation(&interp, "xyz"), "xyz");
        assert_eq!(eval_interpretation(&interp, ""), "");
    }

    #[test]
    fn as_to_bs_interpretation_matches_figure_shape() {
        let (sp, interp) = compile_text(
            r#"
def main(w : [Char]) : [Char] :=
    for (i, c) in enumerate(w) do
        if c === 'a' then
            yield 'b'
        else
            yield c
        endif
    done
"#,
        );
        assert_eq!(interp.tags.len(), 2);
        assert!(interp.tags.iter().all(|t| t.arity == 1));
        assert!(interp.tags.iter().all(|t| t.dom.qrank() == 0), "domains quantifier-free");
        assert_eq!(interp.tags[0].out, OutFn::Letter('b'));
        assert_eq!(interp.tags[1].out, OutFn::Copy(1));
        // the interpretation prints 'b' exactly at input letter 'a'
        let chars: Vec<char> = "ab".chars().collect();
        let tags = interp.tag_names();
        let mut m = WordModel::closed(&chars, &tags);
        m.valuation.insert("x1".into(), Val::Pos(0));
        assert!(eval_formula(&interp.tags[0].dom, &m), "printB holds at 'a'");
        assert!(!eval_formula(&interp.tags[1].dom, &m), "copy does not hold at 'a'");
        // order table: ties favour the branch printed first
        let le01 = &interp.order[0][1];
        let le10 = &interp.order[1][0];
        for (x, y) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let mut m = WordModel::closed(&chars, &tags);
            m.valuation.insert("x1".into(), Val::Pos(x));
            m.valuation.insert("y1".into(), Val::Pos(y));
            assert_eq!(eval_formula(le01, &m), x <= y, "t0({}) <= t1({})", x, y);
            assert_eq!(eval_formula(le10, &m), x < y, "t1({}) <= t0({})", x, y);
        }
        assert_eq!(eval_interpretation(&interp, "abc"), "bbc");
        for w in words(&['a', 'b', 'c'], 4) {
            assert_eq!(eval_interpretation(&interp, &w), eval_simple(&sp, &w).unwrap());
        }
    }

    #[test]
    fn empty_interpretation_outputs_empty() {
        let interp =
            Interpretation { constants: BTreeSet::new(), tags: Vec::new(), order: Vec::new() };
        assert_eq!(eval_interpretation(&interp, "abc"), "");
    }

    #[test]
    fn boolean_loop_program_compiles_correctly() {
        // prints every letter strictly after the first 'a'
        let (sp, interp) = compile_text(
            r#"
def main(w : [Char]) : [Char] :=
    let mut seen := False in
    for (i, c) in enumerate(w) do
        if seen then
            yield c
        endif
        if c === 'a' then
            seen := True
        endif
    done
"#,
        );
        for w in words(&['a', 'b'], 5) {
            let expect = eval_simple(&sp, &w).unwrap();
            let got = eval_interpretation(&interp, &w);
            assert_eq!(got, expect, "word {:?}", w);
        }
    }

    #[test]
    fn order_totality_verified_during_eval() {
        let (_, interp) = compile_text(
            r#"
def main(w : [Char]) : [Char] :=
    for (i, c) in enumerate(w) do
        for (j, d) in reversed(enumerate(w)) do
            if i <= j then
                yield d
            endif
        done
    done
"#,
        );
        for w in words(&['a', 'b'], 4) {
            assert!(eval_interpretation_full(&interp, &w).total_order, "word {:?}", w);
        }
    }
}
