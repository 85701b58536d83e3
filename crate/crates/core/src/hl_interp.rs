//! Reference interpreter for (typed) high-level for-programs.
//!
//! This is the semantic ground truth the rewriting pipeline is checked
//! against, so it favours being obviously correct over being fast. Backward
//! loops over `[x0..xk]` visit `(k,xk) .. (0,x0)`, i.e. indices keep their
//! forward meaning. Generator expressions evaluate their statement with all
//! boolean variables hidden.

use crate::ast::*;
use crate::diag::{Error, Result};
use crate::nested::NestedWord;
use crate::typecheck::TypedProgram;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Word(NestedWord),
    Bool(bool),
}

impl Value {
    pub fn into_word(self) -> Result<NestedWord> {
        match self {
            Value::Word(w) => Ok(w),
            Value::Bool(_) => Err(bug("expected a word result")),
        }
    }
}

fn bug(msg: impl Into<String>) -> Error {
    Error::Internal(msg.into())
}

struct Frame {
    outs: HashMap<Name, NestedWord>,
    poss: HashMap<Name, usize>,
    bools: HashMap<Name, bool>,
}

impl Frame {
    fn new() -> Self {
        Frame { outs: HashMap::new(), poss: HashMap::new(), bools: HashMap::new() }
    }

    fn declare_bool(&mut self, name: &Name) -> Result<()> {
        if self.bools.insert(name.clone(), false).is_some() {
            return Err(bug(format!("boolean `{}` declared twice in one frame", name)));
        }
        Ok(())
    }

    fn set_true(&mut self, name: &Name) -> Result<()> {
        match self.bools.get_mut(name) {
            Some(cell) => {
                // monotone: false -> true only
                *cell = true;
                Ok(())
            }
            None => Err(bug(format!("boolean `{}` not in scope", name))),
        }
    }
}

enum Flow {
    Continue,
    Returned(Value),
}

struct Interp<'p> {
    funs: HashMap<&'p Name, &'p FunDef>,
}

impl<'p> Interp<'p> {
    fn eval_stmt(&self, s: &Stmt, fr: &mut Frame, acc: &mut Vec<NestedWord>) -> Result<Flow> {
        match &s.kind {
            StmtKind::If(c, t, e) => {
                if self.eval_bexpr(c, fr)? {
                    self.eval_stmt(t, fr, acc)
                } else {
                    self.eval_stmt(e, fr, acc)
                }
            }
            StmtKind::Yield(e) => {
                let v = self.eval_oexpr(e, fr)?;
                acc.push(v);
                Ok(Flow::Continue)
            }
            StmtKind::Return(RetVal::Out(e)) => {
                let v = self.eval_oexpr(e, fr)?;
                Ok(Flow::Returned(Value::Word(v)))
            }
            StmtKind::Return(RetVal::Bool(b)) => {
                let v = self.eval_bexpr(b, fr)?;
                Ok(Flow::Returned(Value::Bool(v)))
            }
            StmtKind::LetOut(x, e, body) => {
                let v = self.eval_oexpr(e, fr)?;
                fr.outs.insert(x.clone(), v);
                let flow = self.eval_stmt(body, fr, acc)?;
                fr.outs.remove(x);
                Ok(flow)
            }
            StmtKind::LetBool(x, body) => {
                fr.declare_bool(x)?;
                let flow = self.eval_stmt(body, fr, acc)?;
                fr.bools.remove(x);
                Ok(flow)
            }
            StmtKind::SetTrue(x) => {
                fr.set_true(x)?;
                Ok(Flow::Continue)
            }
            StmtKind::SetFalse(_) | StmtKind::Assign(..) => {
                Err(bug("surface-only assignment survived type checking"))
            }
            StmtKind::For { dir, pos, elem, subject, body } => {
                let subj = self.eval_oexpr(subject, fr)?;
                let items = match subj {
                    NestedWord::List(es) => es,
                    NestedWord::Char(_) => return Err(bug("iteration over a character")),
                };
                let order: Vec<usize> = match dir {
                    Dir::Fwd => (0..items.len()).collect(),
                    Dir::Bwd => (0..items.len()).rev().collect(),
                };
                for i in order {
                    fr.poss.insert(pos.clone(), i);
                    fr.outs.insert(elem.clone(), items[i].clone());
                    let flow = self.eval_stmt(body, fr, acc)?;
                    fr.poss.remove(pos);
                    fr.outs.remove(elem);
                    if let Flow::Returned(v) = flow {
                        return Ok(Flow::Returned(v));
                    }
                }
                Ok(Flow::Continue)
            }
            StmtKind::Seq(ss) => {
                for s in ss {
                    if let Flow::Returned(v) = self.eval_stmt(s, fr, acc)? {
                        return Ok(Flow::Returned(v));
                    }
                }
                Ok(Flow::Continue)
            }
            StmtKind::Skip => Ok(Flow::Continue),
        }
    }

    fn eval_bexpr(&self, b: &BExpr, fr: &mut Frame) -> Result<bool> {
        match &b.kind {
            BExprKind::True => Ok(true),
            BExprKind::False => Ok(false),
            BExprKind::Not(e) => Ok(!self.eval_bexpr(e, fr)?),
            BExprKind::Bin(l, op, r) => {
                let lv = self.eval_bexpr(l, fr)?;
                let rv = self.eval_bexpr(r, fr)?;
                Ok(match op {
                    BoolOp::And => lv && rv,
                    BoolOp::Or => lv || rv,
                    BoolOp::Implies => !lv || rv,
                    BoolOp::Iff => lv == rv,
                })
            }
            BExprKind::Cmp(l, op, r) => {
                let lv = self.operand_pos(l, fr)?;
                let rv = self.operand_pos(r, fr)?;
                Ok(match op {
                    CmpOp::Eq => lv == rv,
                    CmpOp::Ne => lv != rv,
                    CmpOp::Lt => lv < rv,
                    CmpOp::Le => lv <= rv,
                    CmpOp::Gt => lv > rv,
                    CmpOp::Ge => lv >= rv,
                })
            }
            BExprKind::LitEq(l, r) => {
                let lv = self.eval_oexpr(l, fr)?;
                let rv = self.eval_oexpr(r, fr)?;
                Ok(lv == rv)
            }
            BExprKind::Call(f, args) => match self.eval_call_inner(f, args, fr)? {
                Value::Bool(b) => Ok(b),
                Value::Word(_) => Err(bug("word result in boolean call")),
            },
            BExprKind::Var(n) => {
                fr.bools.get(n).copied().ok_or_else(|| bug(format!("boolean `{}` not in scope", n)))
            }
            BExprKind::Gen(body) => {
                // booleans hidden inside generators
                let mut inner = Frame {
                    outs: fr.outs.clone(),
                    poss: fr.poss.clone(),
                    bools: HashMap::new(),
                };
                let mut acc = Vec::new();
                match self.eval_stmt(body, &mut inner, &mut acc)? {
                    Flow::Returned(Value::Bool(b)) => Ok(b),
                    Flow::Returned(Value::Word(_)) => Err(bug("word return in boolean generator")),
                    Flow::Continue => Ok(false),
                }
            }
        }
    }

    fn operand_pos(&self, o: &CmpOperand, fr: &Frame) -> Result<usize> {
        match o {
            CmpOperand::Var(n) => {
                fr.poss.get(n).copied().ok_or_else(|| bug(format!("position `{}` not in scope", n)))
            }
            CmpOperand::Expr(_) => Err(bug("expression comparison survived type checking")),
            CmpOperand::Addr(_) => Err(bug("unresolved address comparison at run time")),
        }
    }

    fn eval_oexpr(&self, e: &OExpr, fr: &mut Frame) -> Result<NestedWord> {
        match &e.kind {
            OExprKind::Var(n) => {
                fr.outs.get(n).cloned().ok_or_else(|| bug(format!("variable `{}` not in scope", n)))
            }
            OExprKind::Const(c) => Ok(const_value(c)),
            OExprKind::List(es) => {
                let mut items = Vec::with_capacity(es.len());
                for item in es {
                    items.push(self.eval_oexpr(item, fr)?);
                }
                Ok(NestedWord::List(items))
            }
            OExprKind::Call(f, args) => self.eval_call_inner(f, args, fr)?.into_word(),
            OExprKind::Gen(body, _) => {
                let mut inner = Frame {
                    outs: fr.outs.clone(),
                    poss: fr.poss.clone(),
                    bools: HashMap::new(),
                };
                let mut acc = Vec::new();
                match self.eval_stmt(body, &mut inner, &mut acc)? {
                    Flow::Returned(Value::Word(w)) => Ok(w),
                    Flow::Returned(Value::Bool(_)) => Err(bug("boolean return in list generator")),
                    Flow::Continue => Ok(NestedWord::List(acc)),
                }
            }
        }
    }

    fn eval_call_inner(&self, f: &Name, args: &[Arg], fr: &mut Frame) -> Result<Value> {
        let def = self.funs.get(f).ok_or_else(|| bug(format!("unknown function `{}`", f)))?;
        let mut inner = Frame::new();
        for (arg, param) in args.iter().zip(&def.params) {
            let v = self.eval_oexpr(&arg.value, fr)?;
            inner.outs.insert(param.name.clone(), v);
            for (pv, formal) in arg.positions.iter().zip(&param.positions) {
                let idx = fr
                    .poss
                    .get(pv)
                    .copied()
                    .ok_or_else(|| bug(format!("position `{}` not in scope", pv)))?;
                inner.poss.insert(formal.clone(), idx);
            }
        }
        self.run_body(def, inner)
    }

    fn run_body(&self, def: &FunDef, mut fr: Frame) -> Result<Value> {
        let mut acc = Vec::new();
        match self.eval_stmt(&def.body, &mut fr, &mut acc)? {
            Flow::Returned(v) => Ok(v),
            Flow::Continue => match def.ret {
                TypeAnn::Bool => Ok(Value::Bool(false)),
                TypeAnn::Out(_) => Ok(Value::Word(NestedWord::List(acc))),
            },
        }
    }
}

fn const_value(c: &CExpr) -> NestedWord {
    match c {
        CExpr::Char(ch) => NestedWord::Char(*ch),
        CExpr::List(es) => NestedWord::List(es.iter().map(const_value).collect()),
    }
}

fn depth_compatible(w: &NestedWord, want: usize) -> bool {
    match (w, want) {
        (NestedWord::Char(_), 0) => true,
        (NestedWord::List(es), n) if n >= 1 => {
            es.is_empty() || es.iter().all(|e| depth_compatible(e, n - 1))
        }
        _ => false,
    }
}

/// Run the program's main function on a single word input.
pub fn eval_program(tp: &TypedProgram, input: &NestedWord) -> Result<Value> {
    let main = tp.program.main_fun();
    if main.params.len() != 1 || !main.params[0].positions.is_empty() {
        return Err(Error::Other(format!(
            "main function `{}` must take exactly one word argument",
            main.name
        )));
    }
    let want = match main.params[0].ty {
        TypeAnn::Out(n) => n,
        TypeAnn::Bool => return Err(bug("boolean parameter survived type checking")),
    };
    if !depth_compatible(input, want) {
        return Err(Error::Other(format!(
            "input has depth {}, main expects depth {}",
            input.depth(),
            want
        )));
    }
    let interp = Interp { funs: tp.program.functions.iter().map(|f| (&f.name, f)).collect() };
    let mut fr = Frame::new();
    fr.outs.insert(main.params[0].name.clone(), input.clone());
    interp.run_body(main, fr)
}

/// Call an arbitrary function with explicit arguments and position values.
pub fn eval_call(tp: &TypedProgram, fname: &str, args: &[(NestedWord, Vec<usize>)]) -> Result<Value> {
    let def = tp
        .program
        .function(fname)
        .ok_or_else(|| Error::Other(format!("no function `{}`", fname)))?;
    if def.params.len() != args.len() {
        return Err(Error::Other("argument count mismatch".into()));
    }
    let interp = Interp { funs: tp.program.functions.iter().map(|f| (&f.name, f)).collect() };
    let mut fr = Frame::new();
    for ((w, positions), param) in args.iter().zip(&def.params) {
        fr.outs.insert(param.name.clone(), w.clone());
        for (idx, formal) in positions.iter().zip(&param.positions) {
            fr.poss.insert(formal.clone(), *idx);
        }
    }
    interp.run_body(def, fr)
}

/// The support of the program: the set of letter constants occurring in it.
pub fn support_constants(p: &Program) -> BTreeSet<char> {
    program_letters(p)
}

/// Convenience for string-to-string programs.
pub fn run_word_to_word(tp: &TypedProgram, input: &str) -> Result<String> {
    let out = eval_program(tp, &NestedWord::word(input))?.into_word()?;
    out.to_flat_string()
        .ok_or_else(|| bug("main produced output of depth other than 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::typecheck::{typecheck_program, Mode};

    fn load(text: &str) -> TypedProgram {
        typecheck_program(&parse_program(text).unwrap(), Mode::Surface).unwrap()
    }

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
    fn as_to_bs_swaps() {
        let tp = load(AS_TO_BS);
        assert_eq!(run_word_to_word(&tp, "abc").unwrap(), "bbc");
        assert_eq!(run_word_to_word(&tp, "").unwrap(), "");
    }

    #[test]
    fn backward_loop_keeps_forward_indices() {
        // yields the index-paired element from a reversed loop: element at the
        // last position comes first, and position comparisons still refer to
        // forward indices.
        let text = r#"
def main(w : [Char]) : [Char] :=
    for (i, c) in reversed(enumerate(w)) do
        for (j, d) in enumerate(w) do
            if i == j then
                yield d
            endif
        done
    done
"#;
        let tp = load(text);
        assert_eq!(run_word_to_word(&tp, "abc").unwrap(), "cba");
    }

    #[test]
    fn get_between_matches_brute_force() {
        let text = r#"
def getBetween(l : [Char] with (i, j)) : [Char] :=
    for (k, c) in enumerate(l) do
        if i <= k and k <= j then
            yield c
        endif
    done
"#;
        let tp = load(text);
        let word = "abcd";
        for i in 0..4 {
            for j in 0..4 {
                let got = eval_call(&tp, "getBetween", &[(NestedWord::word(word), vec![i, j])])
                    .unwrap()
                    .into_word()
                    .unwrap();
                // oracle: brute-force filter of positions k with i <= k <= j
                let expect: String =
                    word.chars().enumerate().filter(|(k, _)| i <= *k && *k <= j).map(|(_, c)| c).collect();
                assert_eq!(got.to_flat_string().unwrap(), expect, "i={} j={}", i, j);
            }
        }
        let got = eval_call(&tp, "getBetween", &[(NestedWord::word("abcd"), vec![1, 2])])
            .unwrap()
            .into_word()
            .unwrap();
        assert_eq!(got.to_flat_string().unwrap(), "bc");
    }

    #[test]
    fn default_boolean_return_is_false() {
        let text = r#"
def f(w : [Char]) : Bool :=
    for (i, c) in enumerate(w) do
        if c === 'a' then
            return True
        endif
    done
"#;
        let tp = load(text);
        let v = eval_call(&tp, "f", &[(NestedWord::word("bbb"), vec![])]).unwrap();
        assert_eq!(v, Value::Bool(false));
        let v = eval_call(&tp, "f", &[(NestedWord::word("bab"), vec![])]).unwrap();
        assert_eq!(v, Value::Bool(true));
    }

    #[test]
    fn support_constants_examples() {
        let tp = load(AS_TO_BS);
        let sup = support_constants(&tp.program);
        assert_eq!(sup.into_iter().collect::<Vec<_>>(), vec!['a', 'b']);

        let identity = load("def main(w : [Char]) : [Char] :=\n for (i, c) in enumerate(w) do\n yield c\n done\n");
        assert!(support_constants(&identity.program).is_empty());
    }
}
