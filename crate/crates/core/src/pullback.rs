//! The pullback operator and the verification formula.
//!
//! `pullback(F, ψ)` rewrites a postcondition over the output word into an
//! equivalent condition on the input word (a weakest precondition): each
//! position quantifier of ψ becomes one tag quantifier plus a uniform block
//! of `ar(F)` position quantifiers guarded by the dom predicate, and the
//! atoms case-split over tags. Disjunctions over tags sit at the atoms, never
//! at the quantifiers, which avoids the exponential blow-up of the naive
//! translation (kept here as a debug reference).
//!
//! The verification formula `χ(φ, F, ψ) = φ ∧ ¬π(F, ψ)` is unsatisfiable
//! exactly when the Hoare triple `{φ} F {ψ}` is valid.

use crate::diag::{Error, Result};
use crate::fo::{eval_formula, Formula, Sort, TagTerm, WordModel};
use crate::interp_compile::{record_bound_check, xvar, Interpretation, OutFn};
use std::collections::BTreeMap;

fn tag_const(name: &str) -> TagTerm {
    TagTerm::Const(name.to_string())
}

/// Variables standing for one ψ-position pulled back to the input: a tag
/// variable plus a uniform tuple of `ar(F)` positions.
struct PulledVar {
    tag: String,
    tuple: Vec<String>,
}

struct Pull<'a> {
    interp: &'a Interpretation,
    arity: usize,
    fresh: u32,
    env: BTreeMap<String, PulledVar>,
}

impl<'a> Pull<'a> {
    fn fresh_block(&mut self, base: &str) -> PulledVar {
        self.fresh += 1;
        let tag = format!("pt{}_{}", self.fresh, base);
        let tuple = (1..=self.arity).map(|k| format!("pp{}_{}", self.fresh, k)).collect();
        PulledVar { tag, tuple }
    }

    /// The dom predicate: the element denoted by (tag, tuple) exists. Surplus
    /// coordinates beyond a tag's own arity are pinned to the first one.
    fn dom_predicate(&self, v: &PulledVar) -> Formula {
        let cases = self
            .interp
            .tags
            .iter()
            .map(|t| {
                let mut conj = vec![Formula::TagEq(
                    TagTerm::Var(v.tag.clone()),
                    tag_const(&t.name),
                )];
                let renames: BTreeMap<String, String> = (1..=t.arity)
                    .map(|k| (xvar(k), v.tuple[k - 1].clone()))
                    .collect();
                conj.push(t.dom.rename_free(&renames));
                if t.arity >= 1 {
                    for k in t.arity + 1..=self.arity {
                        conj.push(Formula::PosEq(v.tuple[k - 1].clone(), v.tuple[0].clone()));
                    }
                }
                Formula::and(conj)
            })
            .collect();
        Formula::or(cases)
    }

    fn quantify(&mut self, base: &str, universal: bool, body: impl FnOnce(&mut Self) -> Formula) -> Formula {
        let v = self.fresh_block(base);
        let dom = self.dom_predicate(&v);
        let tagvar = v.tag.clone();
        let tuple = v.tuple.clone();
        self.env.insert(base.to_string(), v);
        let inner = body(self);
        self.env.remove(base);
        let mut f = if universal {
            Formula::implies(dom, inner)
        } else {
            Formula::and2(dom, inner)
        };
        for p in tuple.into_iter().rev() {
            f = if universal {
                Formula::forall(p, Sort::Pos, f)
            } else {
                Formula::exists(p, Sort::Pos, f)
            };
        }
        if universal {
            Formula::forall(tagvar, Sort::Tag, f)
        } else {
            Formula::exists(tagvar, Sort::Tag, f)
        }
    }

    fn var(&self, name: &str) -> &PulledVar {
        self.env.get(name).unwrap_or_else(|| panic!("unbound postcondition variable `{}`", name))
    }

    /// `x <= y` over output positions: case split over the tag pair, reading
    /// each side's own coordinate prefix.
    fn le_atom(&self, x: &PulledVar, y: &PulledVar) -> Formula {
        let mut cases = Vec::new();
        for (i, ti) in self.interp.tags.iter().enumerate() {
            for (j, tj) in self.interp.tags.iter().enumerate() {
                let mut renames: BTreeMap<String, String> =
                    (1..=ti.arity).map(|k| (xvar(k), x.tuple[k - 1].clone())).collect();
                for k in 1..=tj.arity {
                    renames.insert(format!("y{}", k), y.tuple[k - 1].clone());
                }
                cases.push(Formula::and(vec![
                    Formula::TagEq(TagTerm::Var(x.tag.clone()), tag_const(&ti.name)),
                    Formula::TagEq(TagTerm::Var(y.tag.clone()), tag_const(&tj.name)),
                    self.interp.order[i][j].rename_free(&renames),
                ]));
            }
        }
        Formula::or(cases)
    }

    /// `x = y`: equal tags and equal positions on the used prefix.
    fn eq_atom(&self, x: &PulledVar, y: &PulledVar) -> Formula {
        let cases = self
            .interp
            .tags
            .iter()
            .map(|t| {
                let mut conj = vec![
                    Formula::TagEq(TagTerm::Var(x.tag.clone()), tag_const(&t.name)),
                    Formula::TagEq(TagTerm::Var(y.tag.clone()), tag_const(&t.name)),
                ];
                for k in 1..=t.arity {
                    conj.push(Formula::PosEq(x.tuple[k - 1].clone(), y.tuple[k - 1].clone()));
                }
                Formula::and(conj)
            })
            .collect();
        Formula::or(cases)
    }

    /// `x =_L a`: constant tags with that output letter, plus copy tags
    /// testing the copied input position.
    fn letter_atom(&self, x: &PulledVar, a: char) -> Formula {
        let mut cases = Vec::new();
        for t in &self.interp.tags {
            match &t.out {
                OutFn::Letter(c) if *c == a => {
                    cases.push(Formula::TagEq(TagTerm::Var(x.tag.clone()), tag_const(&t.name)));
                }
                OutFn::Letter(_) => {}
                OutFn::Copy(k) => {
                    cases.push(Formula::and2(
                        Formula::TagEq(TagTerm::Var(x.tag.clone()), tag_const(&t.name)),
                        Formula::LetterAt(x.tuple[*k - 1].clone(), a),
                    ));
                }
            }
        }
        Formula::or(cases)
    }

    fn pull(&mut self, psi: &Formula) -> Formula {
        match psi {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Not(g) => Formula::not(self.pull(g)),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| self.pull(g)).collect()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| self.pull(g)).collect()),
            Formula::Forall(v, Sort::Pos, g) => self.quantify(v, true, |s| s.pull(g)),
            Formula::Exists(v, Sort::Pos, g) => self.quantify(v, false, |s| s.pull(g)),
            Formula::PosLt(x, y) => {
                // strict order: at most / not equal
                let (xv, yv) = (self.var(x), self.var(y));
                Formula::and2(self.le_atom(xv, yv), Formula::not(self.eq_atom(xv, yv)))
            }
            Formula::PosEq(x, y) => self.eq_atom(self.var(x), self.var(y)),
            Formula::LetterAt(x, a) => self.letter_atom(self.var(x), *a),
            other => panic!("postconditions use only the position sort: {:?}", other),
        }
    }
}

/// Efficient pullback: π(F, ψ) holds on w exactly when ψ holds on F(w).
pub fn pullback(interp: &Interpretation, psi: &Formula) -> Formula {
    if interp.tags.is_empty() {
        // the interpretation always outputs the empty word; decide ψ there
        let empty: Vec<char> = Vec::new();
        return if eval_formula(psi, &WordModel::closed(&empty, &[])) {
            Formula::True
        } else {
            Formula::False
        };
    }
    let mut ctx = Pull { interp, arity: interp.max_arity(), fresh: 0, env: BTreeMap::new() };
    let uniform = ctx.pull(psi);
    // The uniform position blocks are empty on the empty input word, yet
    // zero-arity tags may still produce output there. The output on the empty
    // word is fixed, so ψ's truth on it is a constant; split on emptiness.
    let result = if psi.qrank() >= 1 {
        let out_empty = crate::interp_compile::eval_interpretation(interp, "");
        let ochars: Vec<char> = out_empty.chars().collect();
        let on_empty = eval_formula(psi, &WordModel::closed(&ochars, &[]));
        let nonempty = Formula::Exists("z0".into(), Sort::Pos, Box::new(Formula::True));
        Formula::or2(
            Formula::and2(Formula::not(nonempty.clone()), if on_empty { Formula::True } else { Formula::False }),
            Formula::and2(nonempty, uniform),
        )
    } else {
        uniform
    };
    record_bound_check(
        result.qrank() <= psi.qrank() * (interp.max_arity() + 1) + interp.qrank(),
        "pullback quantifier rank",
        result.qrank(),
        psi.qrank() * (interp.max_arity() + 1) + interp.qrank(),
    );
    result
}

/// Naive pullback (debug reference): per-tag quantifier expansion with the
/// tag assignment resolved statically. Exponential in the quantifier nesting
/// of ψ; used for differential testing only.
pub fn naive_pullback(interp: &Interpretation, psi: &Formula) -> Formula {
    if interp.tags.is_empty() {
        let empty: Vec<char> = Vec::new();
        return if eval_formula(psi, &WordModel::closed(&empty, &[])) {
            Formula::True
        } else {
            Formula::False
        };
    }
    fn go(
        interp: &Interpretation,
        psi: &Formula,
        env: &BTreeMap<String, (usize, Vec<String>)>,
        fresh: &mut u32,
    ) -> Formula {
        match psi {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Not(g) => Formula::not(go(interp, g, env, fresh)),
            Formula::And(gs) => {
                Formula::and(gs.iter().map(|g| go(interp, g, env, fresh)).collect())
            }
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| go(interp, g, env, fresh)).collect()),
            Formula::Forall(v, Sort::Pos, g) | Formula::Exists(v, Sort::Pos, g) => {
                let universal = matches!(psi, Formula::Forall(..));
                let mut branches = Vec::new();
                for (ti, t) in interp.tags.iter().enumerate() {
                    *fresh += 1;
                    let tuple: Vec<String> =
                        (1..=t.arity).map(|k| format!("np{}_{}", *fresh, k)).collect();
                    let renames: BTreeMap<String, String> =
                        (1..=t.arity).map(|k| (xvar(k), tuple[k - 1].clone())).collect();
                    let dom = t.dom.rename_free(&renames);
                    let mut env2 = env.clone();
                    env2.insert(v.clone(), (ti, tuple.clone()));
                    let inner = go(interp, g, &env2, fresh);
                    let mut f = if universal {
                        Formula::implies(dom, inner)
                    } else {
                        Formula::and2(dom, inner)
                    };
                    for p in tuple.into_iter().rev() {
                        f = if universal {
                            Formula::forall(p, Sort::Pos, f)
                        } else {
                            Formula::exists(p, Sort::Pos, f)
                        };
                    }
                    branches.push(f);
                }
                if universal {
                    Formula::and(branches)
                } else {
                    Formula::or(branches)
                }
            }
            Formula::PosLt(x, y) => {
                let le = order_atom(interp, env, x, y);
                let eq = eq_atom_naive(interp, env, x, y);
                Formula::and2(le, Formula::not(eq))
            }
            Formula::PosEq(x, y) => eq_atom_naive(interp, env, x, y),
            Formula::LetterAt(x, a) => {
                let (ti, tuple) = &env[x];
                let t = &interp.tags[*ti];
                match &t.out {
                    OutFn::Letter(c) => {
                        if c == a {
                            Formula::True
                        } else {
                            Formula::False
                        }
                    }
                    OutFn::Copy(k) => Formula::LetterAt(tuple[*k - 1].clone(), *a),
                }
            }
            other => panic!("postconditions use only the position sort: {:?}", other),
        }
    }
    fn order_atom(
        interp: &Interpretation,
        env: &BTreeMap<String, (usize, Vec<String>)>,
        x: &str,
        y: &str,
    ) -> Formula {
        let (ti, xs) = &env[x];
        let (tj, ys) = &env[y];
        let mut renames: BTreeMap<String, String> =
            xs.iter().enumerate().map(|(k, v)| (xvar(k + 1), v.clone())).collect();
        for (k, v) in ys.iter().enumerate() {
            renames.insert(format!("y{}", k + 1), v.clone());
        }
        interp.order[*ti][*tj].rename_free(&renames)
    }
    fn eq_atom_naive(
        interp: &Interpretation,
        env: &BTreeMap<String, (usize, Vec<String>)>,
        x: &str,
        y: &str,
    ) -> Formula {
        let (ti, xs) = &env[x];
        let (tj, ys) = &env[y];
        if ti != tj {
            return Formula::False;
        }
        let _ = interp;
        Formula::and(
            xs.iter().zip(ys).map(|(a, b)| Formula::PosEq(a.clone(), b.clone())).collect(),
        )
    }
    let mut fresh = 0;
    go(interp, psi, &BTreeMap::new(), &mut fresh)
}

/// A verification formula with provenance and recorded metrics.
#[derive(Debug, Clone)]
pub struct VerificationFormula {
    pub chi: Formula,
    pub qrank: usize,
    pub size: usize,
    /// Tag universe the formula is evaluated against (the interpretation's).
    pub tags: Vec<String>,
}

/// Fixed regression constant for the size bound `|χ| <= c (|φ| + |F| |ψ|)`.
pub const CHI_SIZE_FACTOR: usize = 40;

/// Build `χ(φ, F, ψ) = φ ∧ ¬π(F, ψ)`, asserting the quantifier-rank and size
/// bounds. A violation signals a compiler bug, not a user error.
pub fn build_chi(
    pre: &Formula,
    interp: &Interpretation,
    post: &Formula,
) -> Result<VerificationFormula> {
    let pulled = pullback(interp, post);
    let chi = Formula::and2(pre.clone(), Formula::not(pulled));
    let qrank = chi.qrank();
    let size = chi.size();
    let qbound = pre.qrank().max(post.qrank() * (interp.max_arity() + 1) + interp.qrank());
    if qrank > qbound {
        return Err(Error::BoundViolation(format!(
            "chi quantifier rank {} exceeds bound {}",
            qrank, qbound
        )));
    }
    let sbound = CHI_SIZE_FACTOR * (pre.size() + (interp.size() + 1) * post.size());
    if size > sbound {
        return Err(Error::BoundViolation(format!("chi size {} exceeds bound {}", size, sbound)));
    }
    record_bound_check(true, "verification formula", qrank, qbound);
    Ok(VerificationFormula { chi, qrank, size, tags: interp.tag_names() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fo::{bounded_sat, eval_closed, BoundedResult};
    use crate::interp_compile::{compile_interpretation, eval_interpretation};
    use crate::parser::parse_program;
    use crate::rewrite::rewrite_to_simple;
    use crate::spec_dsl::parse_spec;
    use crate::typecheck::{typecheck_program, Mode};

    fn compile(text: &str) -> Interpretation {
        let tp = typecheck_program(&parse_program(text).unwrap(), Mode::Surface).unwrap();
        compile_interpretation(&rewrite_to_simple(&tp).unwrap().simple)
    }

    fn identity_interp() -> Interpretation {
        compile("def main(w : [Char]) : [Char] :=\n for (i, c) in enumerate(w) do\n yield c\n done\n")
    }

    fn as_to_bs() -> Interpretation {
        compile(
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
        )
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

    fn check_soundness(interp: &Interpretation, psi: &Formula, alphabet: &[char], maxlen: usize) {
        let pulled = pullback(interp, psi);
        let naive = naive_pullback(interp, psi);
        let tags = interp.tag_names();
        for w in words(alphabet, maxlen) {
            let chars: Vec<char> = w.chars().collect();
            let input_holds = eval_closed(&pulled, &chars, &tags);
            let output = eval_interpretation(interp, &w);
            let ochars: Vec<char> = output.chars().collect();
            let output_holds = eval_closed(psi, &ochars, &[]);
            assert_eq!(input_holds, output_holds, "word {:?} output {:?}", w, output);
            let naive_holds = eval_closed(&naive, &chars, &tags);
            assert_eq!(naive_holds, output_holds, "naive pullback differs on {:?}", w);
        }
    }

    #[test]
    fn identity_pullback_is_equivalent_to_psi() {
        let interp = identity_interp();
        let psi = parse_spec("exists x. label(x) == 'a'").unwrap();
        check_soundness(&interp, &psi, &['a', crate::nested::BLANK], 4);
    }

    #[test]
    fn as_to_bs_output_never_contains_a() {
        let interp = as_to_bs();
        let psi = parse_spec("exists x. label(x) == 'a'").unwrap();
        let pulled = pullback(&interp, &psi);
        assert_eq!(bounded_sat(&pulled, &interp.tag_names(), 6), BoundedResult::NoWitnessUpTo(6));
        check_soundness(&interp, &psi, &['a', 'b'], 4);
    }

    #[test]
    fn pullback_of_true_is_true() {
        let interp = as_to_bs();
        assert_eq!(pullback(&interp, &Formula::True), Formula::True);
    }

    #[test]
    fn pullback_with_order_and_equality() {
        let interp = as_to_bs();
        let psi = parse_spec("contains_factor(\"bb\")").unwrap();
        check_soundness(&interp, &psi, &['a', 'b'], 4);
        let psi2 = parse_spec("forall x. (forall y. (x = y or x < y or y < x))").unwrap();
        check_soundness(&interp, &psi2, &['a', 'b'], 3);
    }

    #[test]
    fn chi_of_valid_triple_has_no_witness() {
        // {true} asToBs {forall x. not label(x) == 'a'}
        let interp = as_to_bs();
        let pre = parse_spec("true").unwrap();
        let post = parse_spec("forall x. not label(x) == 'a'").unwrap();
        let vf = build_chi(&pre, &interp, &post).unwrap();
        assert_eq!(bounded_sat(&vf.chi, &vf.tags, 6), BoundedResult::NoWitnessUpTo(6));
    }

    #[test]
    fn chi_of_false_precondition_unsat() {
        let interp = as_to_bs();
        let pre = parse_spec("false").unwrap();
        let post = parse_spec("true").unwrap();
        let vf = build_chi(&pre, &interp, &post).unwrap();
        assert_eq!(vf.chi, Formula::False);
        assert_eq!(bounded_sat(&vf.chi, &vf.tags, 4), BoundedResult::NoWitnessUpTo(4));
    }

    #[test]
    fn chi_of_refuted_triple_yields_replayable_witness() {
        // {true} asToBs {exists x. label(x) == 'a'} is wrong on every word
        let interp = as_to_bs();
        let pre = parse_spec("true").unwrap();
        let post = parse_spec("exists x. label(x) == 'a'").unwrap();
        let vf = build_chi(&pre, &interp, &post).unwrap();
        match bounded_sat(&vf.chi, &vf.tags, 4) {
            BoundedResult::Sat(w) => {
                // replay: the counterexample satisfies pre and violates post
                let chars: Vec<char> = w.chars().collect();
                assert!(eval_closed(&pre, &chars, &[]));
                let out = eval_interpretation(&interp, &w);
                let ochars: Vec<char> = out.chars().collect();
                assert!(!eval_closed(&post, &ochars, &[]));
            }
            other => panic!("expected witness, got {:?}", other),
        }
    }

    #[test]
    fn empty_interpretation_pullback_decides_on_empty_word() {
        let interp =
            Interpretation { constants: Default::default(), tags: vec![], order: vec![] };
        let psi_exists = parse_spec("exists x. label(x) == 'a'").unwrap();
        assert_eq!(pullback(&interp, &psi_exists), Formula::False);
        let psi_forall = parse_spec("forall x. label(x) == 'a'").unwrap();
        assert_eq!(pullback(&interp, &psi_forall), Formula::True);
    }
}
