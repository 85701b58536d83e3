//! First-order formulas over finite words, with an auxiliary finite tag sort
//! and a two-element boolean sort.
//!
//! Two evaluators are provided: a direct recursive one (the readable
//! reference) and a relational one that computes, bottom-up, the table of
//! satisfying assignments of every subformula. The relational evaluator is
//! what makes it feasible to evaluate the large formulas produced by the
//! compiler: its cost is bounded by the width (number of free variables) of
//! each subformula rather than by the quantifier rank.

use crate::nested::BLANK;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write;

pub type FoVar = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Pos,
    Tag,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TagTerm {
    Var(FoVar),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(FoVar, Sort, Box<Formula>),
    Forall(FoVar, Sort, Box<Formula>),
    PosEq(FoVar, FoVar),
    PosLt(FoVar, FoVar),
    /// `x =_L a`: the letter at position x equals a.
    LetterAt(FoVar, char),
    TagEq(TagTerm, TagTerm),
    BoolVar(FoVar),
}

impl Formula {
    // Smart constructors. Quantifiers over the position and tag sorts are
    // never folded away on a constant body: those domains can be empty
    // (`exists x. true` is false on the empty word).

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            f => Formula::Not(Box::new(f)),
        }
    }

    pub fn and(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Formula::and(vec![a, b])
    }

    pub fn or2(a: Formula, b: Formula) -> Formula {
        Formula::or(vec![a, b])
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or2(Formula::not(a), b)
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        match (&a, &b) {
            (Formula::True, _) => return b,
            (_, Formula::True) => return a,
            (Formula::False, _) => return Formula::not(b),
            (_, Formula::False) => return Formula::not(a),
            _ => {}
        }
        Formula::or2(
            Formula::and2(a.clone(), b.clone()),
            Formula::and2(Formula::not(a), Formula::not(b)),
        )
    }

    pub fn exists(v: impl Into<FoVar>, sort: Sort, body: Formula) -> Formula {
        match (&body, sort) {
            (Formula::False, _) => Formula::False,
            // the boolean domain is never empty
            (Formula::True, Sort::Bool) => Formula::True,
            _ => Formula::Exists(v.into(), sort, Box::new(body)),
        }
    }

    pub fn forall(v: impl Into<FoVar>, sort: Sort, body: Formula) -> Formula {
        match (&body, sort) {
            (Formula::True, _) => Formula::True,
            (Formula::False, Sort::Bool) => Formula::False,
            _ => Formula::Forall(v.into(), sort, Box::new(body)),
        }
    }

    pub fn pos_le(x: impl Into<FoVar>, y: impl Into<FoVar>) -> Formula {
        let (x, y) = (x.into(), y.into());
        Formula::or2(Formula::PosLt(x.clone(), y.clone()), Formula::PosEq(x, y))
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::PosEq(..)
            | Formula::PosLt(..)
            | Formula::LetterAt(..)
            | Formula::TagEq(..)
            | Formula::BoolVar(_) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(|f| f.size()).sum::<usize>(),
            Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => 1 + f.size(),
        }
    }

    /// Quantifier rank; quantifiers of all three sorts count.
    pub fn qrank(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::PosEq(..)
            | Formula::PosLt(..)
            | Formula::LetterAt(..)
            | Formula::TagEq(..)
            | Formula::BoolVar(_) => 0,
            Formula::Not(f) => f.qrank(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(|f| f.qrank()).max().unwrap_or(0),
            Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => 1 + f.qrank(),
        }
    }

    /// Free variables with their sorts.
    pub fn free_vars(&self) -> BTreeMap<FoVar, Sort> {
        let mut out = BTreeMap::new();
        self.free_into(&mut out, &mut Vec::new());
        out
    }

    fn free_into(&self, out: &mut BTreeMap<FoVar, Sort>, bound: &mut Vec<FoVar>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Not(f) => f.free_into(out, bound),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.free_into(out, bound)),
            Formula::Exists(v, _, f) | Formula::Forall(v, _, f) => {
                bound.push(v.clone());
                f.free_into(out, bound);
                bound.pop();
            }
            Formula::PosEq(x, y) | Formula::PosLt(x, y) => {
                for v in [x, y] {
                    if !bound.contains(v) {
                        out.insert(v.clone(), Sort::Pos);
                    }
                }
            }
            Formula::LetterAt(x, _) => {
                if !bound.contains(x) {
                    out.insert(x.clone(), Sort::Pos);
                }
            }
            Formula::TagEq(a, b) => {
                for t in [a, b] {
                    if let TagTerm::Var(v) = t {
                        if !bound.contains(v) {
                            out.insert(v.clone(), Sort::Tag);
                        }
                    }
                }
            }
            Formula::BoolVar(b) => {
                if !bound.contains(b) {
                    out.insert(b.clone(), Sort::Bool);
                }
            }
        }
    }

    /// Letter constants mentioned in the formula.
    pub fn letters(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.letters_into(&mut out);
        out
    }

    fn letters_into(&self, out: &mut BTreeSet<char>) {
        match self {
            Formula::LetterAt(_, c) => {
                out.insert(*c);
            }
            Formula::Not(f) => f.letters_into(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.letters_into(out)),
            Formula::Exists(_, _, f) | Formula::Forall(_, _, f) => f.letters_into(out),
            _ => {}
        }
    }

    /// Tag constants mentioned in the formula.
    pub fn tag_constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn walk(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::TagEq(a, b) => {
                    for t in [a, b] {
                        if let TagTerm::Const(c) = t {
                            out.insert(c.clone());
                        }
                    }
                }
                Formula::Not(g) => walk(g, out),
                Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| walk(g, out)),
                Formula::Exists(_, _, g) | Formula::Forall(_, _, g) => walk(g, out),
                _ => {}
            }
        }
        walk(self, &mut out);
        out
    }

    /// Rename free variables according to the map.
    pub fn rename_free(&self, map: &BTreeMap<FoVar, FoVar>) -> Formula {
        self.rename_inner(map, &mut Vec::new())
    }

    fn rename_inner(&self, map: &BTreeMap<FoVar, FoVar>, bound: &mut Vec<FoVar>) -> Formula {
        let ren = |v: &FoVar, bound: &Vec<FoVar>| -> FoVar {
            if bound.contains(v) {
                v.clone()
            } else {
                map.get(v).cloned().unwrap_or_else(|| v.clone())
            }
        };
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Not(f) => Formula::Not(Box::new(f.rename_inner(map, bound))),
            Formula::And(fs) => {
                Formula::And(fs.iter().map(|f| f.rename_inner(map, bound)).collect())
            }
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.rename_inner(map, bound)).collect()),
            Formula::Exists(v, s, f) => {
                bound.push(v.clone());
                let inner = f.rename_inner(map, bound);
                bound.pop();
                Formula::Exists(v.clone(), *s, Box::new(inner))
            }
            Formula::Forall(v, s, f) => {
                bound.push(v.clone());
                let inner = f.rename_inner(map, bound);
                bound.pop();
                Formula::Forall(v.clone(), *s, Box::new(inner))
            }
            Formula::PosEq(x, y) => Formula::PosEq(ren(x, bound), ren(y, bound)),
            Formula::PosLt(x, y) => Formula::PosLt(ren(x, bound), ren(y, bound)),
            Formula::LetterAt(x, c) => Formula::LetterAt(ren(x, bound), *c),
            Formula::TagEq(a, b) => {
                let r = |t: &TagTerm, bound: &Vec<FoVar>| match t {
                    TagTerm::Var(v) => TagTerm::Var(ren(v, bound)),
                    TagTerm::Const(c) => TagTerm::Const(c.clone()),
                };
                Formula::TagEq(r(a, bound), r(b, bound))
            }
            Formula::BoolVar(b) => Formula::BoolVar(ren(b, bound)),
        }
    }

    /// Substitute boolean variables by constants (true/false).
    pub fn subst_bool_consts(&self, map: &BTreeMap<FoVar, bool>) -> Formula {
        match self {
            Formula::BoolVar(b) => match map.get(b) {
                Some(true) => Formula::True,
                Some(false) => Formula::False,
                None => self.clone(),
            },
            Formula::Not(f) => Formula::not(f.subst_bool_consts(map)),
            Formula::And(fs) => {
                Formula::and(fs.iter().map(|f| f.subst_bool_consts(map)).collect())
            }
            Formula::Or(fs) => Formula::or(fs.iter().map(|f| f.subst_bool_consts(map)).collect()),
            Formula::Exists(v, s, f) => {
                let mut inner_map = map.clone();
                inner_map.remove(v);
                Formula::exists(v.clone(), *s, f.subst_bool_consts(&inner_map))
            }
            Formula::Forall(v, s, f) => {
                let mut inner_map = map.clone();
                inner_map.remove(v);
                Formula::forall(v.clone(), *s, f.subst_bool_consts(&inner_map))
            }
            _ => self.clone(),
        }
    }

    /// Negation normal form; preserves evaluation on every model.
    pub fn nnf(&self) -> Formula {
        fn pos(f: &Formula) -> Formula {
            match f {
                Formula::Not(g) => neg(g),
                Formula::And(fs) => Formula::And(fs.iter().map(pos).collect()),
                Formula::Or(fs) => Formula::Or(fs.iter().map(pos).collect()),
                Formula::Exists(v, s, g) => Formula::Exists(v.clone(), *s, Box::new(pos(g))),
                Formula::Forall(v, s, g) => Formula::Forall(v.clone(), *s, Box::new(pos(g))),
                f => f.clone(),
            }
        }
        fn neg(f: &Formula) -> Formula {
            match f {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                Formula::Not(g) => pos(g),
                Formula::And(fs) => Formula::Or(fs.iter().map(neg).collect()),
                Formula::Or(fs) => Formula::And(fs.iter().map(neg).collect()),
                Formula::Exists(v, s, g) => Formula::Forall(v.clone(), *s, Box::new(neg(g))),
                Formula::Forall(v, s, g) => Formula::Exists(v.clone(), *s, Box::new(neg(g))),
                atom => Formula::Not(Box::new(atom.clone())),
            }
        }
        pos(self)
    }
}

// ---------------------------------------------------------------------------
// Models and the reference evaluator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Pos(usize),
    Tag(usize),
    Bool(bool),
}

/// A finite word together with a tag universe and a valuation of free
/// variables.
#[derive(Debug, Clone)]
pub struct WordModel<'a> {
    pub word: &'a [char],
    pub tags: &'a [String],
    pub valuation: HashMap<FoVar, Val>,
}

impl<'a> WordModel<'a> {
    pub fn closed(word: &'a [char], tags: &'a [String]) -> Self {
        WordModel { word, tags, valuation: HashMap::new() }
    }

    fn tag_index(&self, t: &TagTerm) -> usize {
        match t {
            TagTerm::Var(v) => match self.valuation.get(v) {
                Some(Val::Tag(i)) => *i,
                other => panic!("tag variable `{}` bound to {:?}", v, other),
            },
            TagTerm::Const(name) => self
                .tags
                .iter()
                .position(|t| t == name)
                .unwrap_or_else(|| panic!("unknown tag constant `{}`", name)),
        }
    }
}

/// Direct Tarskian evaluation; exponential in quantifier rank, used as the
/// reference for the relational evaluator.
pub fn eval_formula(f: &Formula, m: &WordModel) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Not(g) => !eval_formula(g, m),
        Formula::And(fs) => fs.iter().all(|g| eval_formula(g, m)),
        Formula::Or(fs) => fs.iter().any(|g| eval_formula(g, m)),
        Formula::Exists(v, sort, g) => domain_iter(*sort, m).any(|val| {
            let mut m2 = m.clone();
            m2.valuation.insert(v.clone(), val);
            eval_formula(g, &m2)
        }),
        Formula::Forall(v, sort, g) => domain_iter(*sort, m).all(|val| {
            let mut m2 = m.clone();
            m2.valuation.insert(v.clone(), val);
            eval_formula(g, &m2)
        }),
        Formula::PosEq(x, y) => pos_val(m, x) == pos_val(m, y),
        Formula::PosLt(x, y) => pos_val(m, x) < pos_val(m, y),
        Formula::LetterAt(x, c) => m.word[pos_val(m, x)] == *c,
        Formula::TagEq(a, b) => m.tag_index(a) == m.tag_index(b),
        Formula::BoolVar(b) => match m.valuation.get(b) {
            Some(Val::Bool(v)) => *v,
            other => panic!("boolean variable `{}` bound to {:?}", b, other),
        },
    }
}

fn pos_val(m: &WordModel, v: &FoVar) -> usize {
    match m.valuation.get(v) {
        Some(Val::Pos(i)) => *i,
        other => panic!("position variable `{}` bound to {:?}", v, other),
    }
}

fn domain_iter(sort: Sort, m: &WordModel) -> Box<dyn Iterator<Item = Val>> {
    match sort {
        Sort::Pos => Box::new((0..m.word.len()).map(Val::Pos)),
        Sort::Tag => Box::new((0..m.tags.len()).map(Val::Tag)),
        Sort::Bool => Box::new([false, true].into_iter().map(Val::Bool)),
    }
}

// ---------------------------------------------------------------------------
// Relational (table) evaluator
// ---------------------------------------------------------------------------

/// The table of satisfying assignments of a formula over its free variables,
/// in row-major order over the listed variables.
#[derive(Debug, Clone)]
pub struct Table {
    /// Free variables with their domain sizes, sorted by name.
    pub vars: Vec<(FoVar, usize)>,
    pub bits: Vec<bool>,
}

impl Table {
    fn constant(b: bool) -> Table {
        Table { vars: Vec::new(), bits: vec![b] }
    }

    pub fn rows(&self) -> usize {
        self.bits.len()
    }

    pub fn is_const(&self, b: bool) -> bool {
        self.vars.is_empty() && self.bits[0] == b
    }

    /// Look up one assignment (values listed in `self.vars` order).
    pub fn get(&self, vals: &[usize]) -> bool {
        let mut idx = 0;
        for ((_, dom), v) in self.vars.iter().zip(vals) {
            idx = idx * dom + v;
        }
        self.bits[idx]
    }
}

const MAX_TABLE_BITS: usize = 1 << 28;

fn domain_size(sort: Sort, wlen: usize, ntags: usize) -> usize {
    match sort {
        Sort::Pos => wlen,
        Sort::Tag => ntags,
        Sort::Bool => 2,
    }
}

/// Memo of subformula tables for one fixed word and tag universe, keyed by a
/// structural fingerprint. Compiled formulas inline the same domain and
/// order subformulas many times (clones, so pointer identity is useless);
/// the memo collapses their evaluation to one pass each.
#[derive(Default)]
pub struct TableCache {
    map: HashMap<u128, std::rc::Rc<Table>>,
}

impl TableCache {
    pub fn new() -> Self {
        TableCache::default()
    }
}

fn mix(h: u128, v: u128) -> u128 {
    // splitmix-style combiner
    let mut x = h ^ v.wrapping_mul(0x9E3779B97F4A7C15_F39CC0605CEDC835);
    x ^= x >> 61;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9_94D049BB133111EB);
    x ^= x >> 64;
    x
}

fn hash_str(s: &str) -> u128 {
    let mut h = 0xCBF29CE484222325u128;
    for b in s.as_bytes() {
        h = mix(h, *b as u128);
    }
    h
}

struct TableCtx<'a> {
    word: &'a [char],
    tags: &'a [String],
}

impl<'a> TableCtx<'a> {
    /// Evaluate with memoization, returning the structural fingerprint and
    /// the (shared) table.
    fn eval_memo(&self, f: &Formula, cache: &mut TableCache) -> Result<(u128, std::rc::Rc<Table>), String> {
        let hash = match f {
            Formula::True => mix(1, 0),
            Formula::False => mix(2, 0),
            Formula::Not(g) => {
                let (h, _) = self.eval_memo(g, cache)?;
                mix(3, h)
            }
            Formula::And(fs) | Formula::Or(fs) => {
                let tag = if matches!(f, Formula::And(_)) { 4u128 } else { 5 };
                let mut h = mix(tag, fs.len() as u128);
                for g in fs {
                    let (hg, _) = self.eval_memo(g, cache)?;
                    h = mix(h, hg);
                }
                h
            }
            Formula::Exists(v, s, g) | Formula::Forall(v, s, g) => {
                let tag = if matches!(f, Formula::Exists(..)) { 6u128 } else { 7 };
                let (hg, _) = self.eval_memo(g, cache)?;
                mix(mix(mix(tag, hash_str(v)), *s as u128), hg)
            }
            Formula::PosEq(x, y) => mix(mix(8, hash_str(x)), hash_str(y)),
            Formula::PosLt(x, y) => mix(mix(9, hash_str(x)), hash_str(y)),
            Formula::LetterAt(x, c) => mix(mix(10, hash_str(x)), *c as u128),
            Formula::TagEq(a, b) => {
                let ht = |t: &TagTerm| match t {
                    TagTerm::Var(v) => mix(11, hash_str(v)),
                    TagTerm::Const(c) => mix(12, hash_str(c)),
                };
                mix(mix(13, ht(a)), ht(b))
            }
            Formula::BoolVar(v) => mix(14, hash_str(v)),
        };
        if let Some(t) = cache.map.get(&hash) {
            return Ok((hash, t.clone()));
        }
        let computed = std::rc::Rc::new(self.eval(f, cache)?);
        cache.map.insert(hash, computed.clone());
        Ok((hash, computed))
    }

    fn eval(&self, f: &Formula, cache: &mut TableCache) -> Result<Table, String> {
        match f {
            Formula::True => Ok(Table::constant(true)),
            Formula::False => Ok(Table::constant(false)),
            Formula::Not(g) => {
                let (_, t) = self.eval_memo(g, cache)?;
                let mut t = (*t).clone();
                for b in &mut t.bits {
                    *b = !*b;
                }
                Ok(t)
            }
            Formula::And(fs) => self.nary(fs, true, cache),
            Formula::Or(fs) => self.nary(fs, false, cache),
            Formula::Exists(v, sort, g) => self.quantify(v, *sort, g, false, cache),
            Formula::Forall(v, sort, g) => self.quantify(v, *sort, g, true, cache),
            Formula::PosEq(x, y) => self.binary_pos(x, y, |a, b| a == b),
            Formula::PosLt(x, y) => self.binary_pos(x, y, |a, b| a < b),
            Formula::LetterAt(x, c) => {
                let n = self.word.len();
                let bits = (0..n).map(|i| self.word[i] == *c).collect();
                Ok(Table { vars: vec![(x.clone(), n)], bits })
            }
            Formula::TagEq(a, b) => self.tag_eq(a, b),
            Formula::BoolVar(v) => {
                Ok(Table { vars: vec![(v.clone(), 2)], bits: vec![false, true] })
            }
        }
    }

    fn binary_pos(&self, x: &FoVar, y: &FoVar, op: impl Fn(usize, usize) -> bool) -> Result<Table, String> {
        let n = self.word.len();
        if x == y {
            let bits = (0..n).map(|i| op(i, i)).collect();
            return Ok(Table { vars: vec![(x.clone(), n)], bits });
        }
        let mut vars = vec![(x.clone(), n), (y.clone(), n)];
        vars.sort();
        let swapped = vars[0].0 != *x;
        let mut bits = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let (xv, yv) = if swapped { (b, a) } else { (a, b) };
                bits.push(op(xv, yv));
            }
        }
        Ok(Table { vars, bits })
    }

    fn tag_eq(&self, a: &TagTerm, b: &TagTerm) -> Result<Table, String> {
        let k = self.tags.len();
        let resolve = |t: &TagTerm| -> Result<Result<usize, FoVar>, String> {
            match t {
                TagTerm::Const(name) => self
                    .tags
                    .iter()
                    .position(|x| x == name)
                    .map(Ok)
                    .ok_or_else(|| format!("unknown tag constant `{}`", name)),
                TagTerm::Var(v) => Ok(Err(v.clone())),
            }
        };
        match (resolve(a)?, resolve(b)?) {
            (Ok(i), Ok(j)) => Ok(Table::constant(i == j)),
            (Ok(i), Err(v)) | (Err(v), Ok(i)) => {
                let bits = (0..k).map(|t| t == i).collect();
                Ok(Table { vars: vec![(v, k)], bits })
            }
            (Err(v), Err(w)) => {
                if v == w {
                    let bits = vec![true; k.max(0)];
                    return Ok(Table { vars: vec![(v, k)], bits });
                }
                let mut vars = vec![(v.clone(), k), (w.clone(), k)];
                vars.sort();
                let swapped = vars[0].0 != v;
                let mut bits = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        let (a, b) = if swapped { (j, i) } else { (i, j) };
                        bits.push(a == b);
                    }
                }
                Ok(Table { vars, bits })
            }
        }
    }

    fn nary(&self, fs: &[Formula], conjunction: bool, cache: &mut TableCache) -> Result<Table, String> {
        let children: Vec<std::rc::Rc<Table>> =
            fs.iter().map(|f| self.eval_memo(f, cache).map(|(_, t)| t)).collect::<Result<_, _>>()?;
        // merged variable list
        let mut vars: Vec<(FoVar, usize)> = Vec::new();
        for c in &children {
            for v in &c.vars {
                if !vars.iter().any(|(n, _)| n == &v.0) {
                    vars.push(v.clone());
                }
            }
        }
        vars.sort();
        let total: usize = vars.iter().try_fold(1usize, |acc, (_, d)| {
            acc.checked_mul(*d).filter(|t| *t <= MAX_TABLE_BITS)
        })
        .ok_or_else(|| "formula too wide for table evaluation".to_string())?;
        // per-child: positions of its vars in the merged list
        let maps: Vec<Vec<usize>> = children
            .iter()
            .map(|c| {
                c.vars
                    .iter()
                    .map(|(n, _)| vars.iter().position(|(m, _)| m == n).unwrap())
                    .collect()
            })
            .collect();
        let mut bits = Vec::with_capacity(total);
        let mut idx = vec![0usize; vars.len()];
        for _ in 0..total {
            let mut acc = conjunction;
            for (c, map) in children.iter().zip(&maps) {
                let mut ci = 0;
                for (k, (_, dom)) in map.iter().zip(&c.vars) {
                    ci = ci * dom + idx[*k];
                }
                let v = c.bits[ci];
                if conjunction {
                    acc = acc && v;
                    if !acc {
                        break;
                    }
                } else {
                    acc = acc || v;
                    if acc {
                        break;
                    }
                }
            }
            bits.push(acc);
            // odometer
            for k in (0..vars.len()).rev() {
                idx[k] += 1;
                if idx[k] < vars[k].1 {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(Table { vars, bits })
    }

    fn quantify(
        &self,
        v: &FoVar,
        sort: Sort,
        body: &Formula,
        universal: bool,
        cache: &mut TableCache,
    ) -> Result<Table, String> {
        let (_, t) = self.eval_memo(body, cache)?;
        let dom = domain_size(sort, self.word.len(), self.tags.len());
        let axis = match t.vars.iter().position(|(n, _)| n == v) {
            Some(a) => a,
            None => {
                // variable unused in body: only the domain emptiness matters
                if dom == 0 {
                    return Ok(Table { vars: t.vars.clone(), bits: vec![universal; t.bits.len()] });
                }
                return Ok((*t).clone());
            }
        };
        debug_assert_eq!(t.vars[axis].1, dom, "domain mismatch for `{}`", v);
        let mut vars = t.vars.clone();
        vars.remove(axis);
        let inner: usize = t.vars[axis + 1..].iter().map(|(_, d)| d).product();
        let outer: usize = t.vars[..axis].iter().map(|(_, d)| d).product();
        let mut bits = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for i in 0..inner {
                let mut acc = universal;
                for d in 0..dom {
                    let idx = (o * dom + d) * inner + i;
                    let v = t.bits[idx];
                    if universal {
                        acc = acc && v;
                        if !acc {
                            break;
                        }
                    } else {
                        acc = acc || v;
                        if acc {
                            break;
                        }
                    }
                }
                bits.push(acc);
            }
        }
        Ok(Table { vars, bits })
    }
}

/// Evaluate a formula to the table of its satisfying assignments.
pub fn eval_table(f: &Formula, word: &[char], tags: &[String]) -> Result<Table, String> {
    let mut cache = TableCache::new();
    TableCtx { word, tags }.eval(f, &mut cache)
}

/// As `eval_table`, sharing a memo cache across calls (the cache is only
/// valid for one fixed word and tag universe).
pub fn eval_table_cached(
    f: &Formula,
    word: &[char],
    tags: &[String],
    cache: &mut TableCache,
) -> Result<Table, String> {
    let (_, t) = TableCtx { word, tags }.eval_memo(f, cache)?;
    Ok((*t).clone())
}

/// Evaluate a closed formula on a word using the relational evaluator.
pub fn eval_closed(f: &Formula, word: &[char], tags: &[String]) -> bool {
    let t = eval_table(f, word, tags).expect("table evaluation failed");
    assert!(t.vars.is_empty(), "formula is not closed: {:?}", t.vars);
    t.bits[0]
}

/// As `eval_closed` with a shared per-word cache.
pub fn eval_closed_cached(f: &Formula, word: &[char], tags: &[String], cache: &mut TableCache) -> bool {
    let t = eval_table_cached(f, word, tags, cache).expect("table evaluation failed");
    assert!(t.vars.is_empty(), "formula is not closed: {:?}", t.vars);
    t.bits[0]
}

// ---------------------------------------------------------------------------
// Bounded satisfiability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundedResult {
    Sat(String),
    NoWitnessUpTo(usize),
}

/// Enumerate all words over the formula's constants plus one blank letter, up
/// to the given length, in length-then-lexicographic order. Sound, and by the
/// support property of first-order formulas, restricting to this alphabet
/// loses no satisfiability (only the length bound is a real restriction).
pub fn bounded_sat(f: &Formula, tags: &[String], maxlen: usize) -> BoundedResult {
    use rayon::prelude::*;
    let mut alphabet: Vec<char> = f.letters().into_iter().collect();
    alphabet.push(BLANK);
    // evaluate top-level conjuncts left to right so a cheap precondition
    // filters words before the expensive pulled-back postcondition runs
    let conjuncts: Vec<&Formula> = match f {
        Formula::And(fs) => fs.iter().collect(),
        other => vec![other],
    };
    let check = |word: &[char]| {
        let mut cache = TableCache::new();
        conjuncts.iter().all(|g| eval_closed_cached(g, word, tags, &mut cache))
    };
    for len in 0..=maxlen {
        let count = alphabet.len().pow(len as u32);
        let found = (0..count)
            .into_par_iter()
            .find_first(|&i| {
                let word = nth_word(&alphabet, len, i);
                check(&word)
            })
            .map(|i| nth_word(&alphabet, len, i));
        if let Some(word) = found {
            return BoundedResult::Sat(word.into_iter().collect());
        }
    }
    BoundedResult::NoWitnessUpTo(maxlen)
}

fn nth_word(alphabet: &[char], len: usize, mut i: usize) -> Vec<char> {
    let mut out = vec![alphabet[0]; len];
    for k in (0..len).rev() {
        out[k] = alphabet[i % alphabet.len()];
        i /= alphabet.len();
    }
    out
}

// ---------------------------------------------------------------------------
// Pretty printer (spec-DSL style, with tag/bool extensions)
// ---------------------------------------------------------------------------

pub fn pretty(f: &Formula) -> String {
    let mut s = String::new();
    write_pretty(&mut s, f);
    s
}

fn write_pretty(out: &mut String, f: &Formula) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Not(g) => {
            out.push_str("not (");
            write_pretty(out, g);
            out.push(')');
        }
        Formula::And(fs) => write_nary(out, fs, "and"),
        Formula::Or(fs) => write_nary(out, fs, "or"),
        Formula::Exists(v, s, g) => {
            let _ = write!(out, "exists {}{}. (", v, sort_suffix(*s));
            write_pretty(out, g);
            out.push(')');
        }
        Formula::Forall(v, s, g) => {
            let _ = write!(out, "forall {}{}. (", v, sort_suffix(*s));
            write_pretty(out, g);
            out.push(')');
        }
        Formula::PosEq(x, y) => {
            let _ = write!(out, "{} = {}", x, y);
        }
        Formula::PosLt(x, y) => {
            let _ = write!(out, "{} < {}", x, y);
        }
        Formula::LetterAt(x, c) => {
            let _ = write!(out, "label({}) == '{}'", x, c);
        }
        Formula::TagEq(a, b) => {
            let p = |t: &TagTerm| match t {
                TagTerm::Var(v) => v.clone(),
                TagTerm::Const(c) => format!("#{}", c),
            };
            let _ = write!(out, "{} = {}", p(a), p(b));
        }
        Formula::BoolVar(b) => out.push_str(b),
    }
}

fn sort_suffix(s: Sort) -> &'static str {
    match s {
        Sort::Pos => "",
        Sort::Tag => " : Tag",
        Sort::Bool => " : Bool",
    }
}

fn write_nary(out: &mut String, fs: &[Formula], op: &str) {
    for (i, f) in fs.iter().enumerate() {
        if i > 0 {
            let _ = write!(out, " {} ", op);
        }
        out.push('(');
        write_pretty(out, f);
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exists_pos(v: &str, f: Formula) -> Formula {
        Formula::exists(v, Sort::Pos, f)
    }

    #[test]
    fn eval_letter_exists() {
        let f = exists_pos("x", Formula::LetterAt("x".into(), 'a'));
        let w: Vec<char> = "bab".chars().collect();
        assert!(eval_formula(&f, &WordModel::closed(&w, &[])));
        let w: Vec<char> = "bb".chars().collect();
        assert!(!eval_formula(&f, &WordModel::closed(&w, &[])));
    }

    #[test]
    fn empty_word_quantifiers() {
        let w: Vec<char> = vec![];
        let ex = exists_pos("x", Formula::True);
        let fa = Formula::forall("x", Sort::Pos, Formula::False);
        assert!(!eval_formula(&ex, &WordModel::closed(&w, &[])));
        assert!(eval_formula(&fa, &WordModel::closed(&w, &[])));
    }

    #[test]
    fn qrank_examples() {
        let atom = Formula::PosEq("x".into(), "y".into());
        assert_eq!(atom.qrank(), 0);
        let f = Formula::forall(
            "x",
            Sort::Pos,
            Formula::exists("y", Sort::Pos, Formula::PosLt("x".into(), "y".into())),
        );
        assert_eq!(f.qrank(), 2);
        assert_eq!(f.size(), 3);
    }

    #[test]
    fn tag_quantifier_over_two_tags() {
        let tags = vec!["printB".to_string(), "copy".to_string()];
        let f = Formula::exists(
            "t",
            Sort::Tag,
            Formula::TagEq(TagTerm::Var("t".into()), TagTerm::Const("printB".into())),
        );
        let w: Vec<char> = "x".chars().collect();
        assert!(eval_formula(&f, &WordModel { word: &w, tags: &tags, valuation: HashMap::new() }));
        assert!(eval_closed(&f, &w, &tags));
    }

    #[test]
    fn bounded_sat_finds_witness() {
        let f = exists_pos("x", Formula::LetterAt("x".into(), 'a'));
        assert_eq!(bounded_sat(&f, &[], 2), BoundedResult::Sat("a".to_string()));
        assert_eq!(bounded_sat(&Formula::False, &[], 3), BoundedResult::NoWitnessUpTo(3));
    }

    #[test]
    fn table_matches_reference_on_random_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vars = ["x", "y", "z"];
        let bools = ["p", "q"];
        fn gen(rng: &mut rand_chacha::ChaCha8Rng, depth: usize, vars: &[&str], bools: &[&str]) -> Formula {
            use rand::Rng;
            if depth == 0 {
                return match rng.gen_range(0..5) {
                    0 => Formula::PosEq(vars[rng.gen_range(0..vars.len())].into(), vars[rng.gen_range(0..vars.len())].into()),
                    1 => Formula::PosLt(vars[rng.gen_range(0..vars.len())].into(), vars[rng.gen_range(0..vars.len())].into()),
                    2 => Formula::LetterAt(vars[rng.gen_range(0..vars.len())].into(), if rng.gen() { 'a' } else { 'b' }),
                    3 => Formula::BoolVar(bools[rng.gen_range(0..bools.len())].into()),
                    _ => Formula::True,
                };
            }
            match rng.gen_range(0..5) {
                0 => Formula::Not(Box::new(gen(rng, depth - 1, vars, bools))),
                1 => Formula::And(vec![gen(rng, depth - 1, vars, bools), gen(rng, depth - 1, vars, bools)]),
                2 => Formula::Or(vec![gen(rng, depth - 1, vars, bools), gen(rng, depth - 1, vars, bools)]),
                3 => Formula::Exists(vars[rng.gen_range(0..vars.len())].into(), Sort::Pos, Box::new(gen(rng, depth - 1, vars, bools))),
                _ => Formula::Forall(vars[rng.gen_range(0..vars.len())].into(), Sort::Pos, Box::new(gen(rng, depth - 1, vars, bools))),
            }
        }
        for _ in 0..200 {
            let f = gen(&mut rng, 4, &vars, &bools);
            let wlen = rng.gen_range(0..4);
            let word: Vec<char> = (0..wlen).map(|_| if rng.gen() { 'a' } else { 'b' }).collect();
            // close the formula over all possibly-free variables
            let mut closed = f.clone();
            for v in vars {
                closed = Formula::Exists(v.to_string(), Sort::Pos, Box::new(closed));
            }
            for b in bools {
                closed = Formula::Forall(b.to_string(), Sort::Bool, Box::new(closed));
            }
            let reference = eval_formula(&closed, &WordModel::closed(&word, &[]));
            let table = eval_closed(&closed, &word, &[]);
            assert_eq!(reference, table, "formula {:?} word {:?}", closed, word);
        }
    }

    #[test]
    fn nnf_preserves_eval() {
        let f = Formula::Not(Box::new(Formula::And(vec![
            Formula::Exists("x".into(), Sort::Pos, Box::new(Formula::LetterAt("x".into(), 'a'))),
            Formula::Not(Box::new(Formula::Forall(
                "y".into(),
                Sort::Pos,
                Box::new(Formula::LetterAt("y".into(), 'b')),
            ))),
        ])));
        let g = f.nnf();
        for w in ["", "a", "b", "ab", "ba", "bb", "aab"] {
            let word: Vec<char> = w.chars().collect();
            assert_eq!(
                eval_formula(&f, &WordModel::closed(&word, &[])),
                eval_formula(&g, &WordModel::closed(&word, &[])),
                "word {:?}",
                w
            );
        }
    }
}
