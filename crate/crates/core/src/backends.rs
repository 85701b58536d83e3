//! Solver backends: SMT-LIB v2.6 (UFDTLIA) and MONA (WS1S) emission, process
//! driving with wall-clock timeouts, and verdict parsing.
//!
//! In the SMT encoding the word is an uninterpreted function from integer
//! positions to a finite letter datatype, guarded by an integer length; tags
//! are a finite datatype. In the MONA encoding letters are second-order
//! predicates partitioning the word positions, tag variables are first-order
//! variables confined to the first |T| positions, and the word itself
//! occupies the positions from |T| up to an end marker.

use crate::fo::{bounded_sat, BoundedResult, Formula, Sort, TagTerm};
use crate::nested::BLANK;
use crate::pullback::VerificationFormula;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Backend {
    Bounded,
    Z3,
    Cvc5,
    Mona,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Backend::Bounded => "bounded",
            Backend::Z3 => "z3",
            Backend::Cvc5 => "cvc5",
            Backend::Mona => "mona",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bounded" => Ok(Backend::Bounded),
            "z3" | "smtlib-z3" => Ok(Backend::Z3),
            "cvc5" | "smtlib-cvc5" => Ok(Backend::Cvc5),
            "mona" => Ok(Backend::Mona),
            other => Err(format!("unknown backend `{}`", other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverTask {
    pub backend: Backend,
    pub timeout: Duration,
    /// Length bound for the bounded backend.
    pub maxlen: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnknownReason {
    Timeout,
    Memout,
    SolverUnknown(String),
    SolverMissing(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(Option<String>),
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn conclusive(&self) -> bool {
        matches!(self, Verdict::Valid | Verdict::Invalid(_))
    }
}

// ---------------------------------------------------------------------------
// Letter naming shared by the emitters
// ---------------------------------------------------------------------------

/// Alphabet of the formula: its constants plus the blank letter.
pub fn chi_alphabet(chi: &Formula) -> Vec<char> {
    let mut letters: BTreeSet<char> = chi.letters();
    letters.insert(BLANK);
    letters.into_iter().collect()
}

fn letter_name(c: char) -> String {
    if c == BLANK {
        "lt_blank".to_string()
    } else if c.is_ascii_alphanumeric() {
        format!("lt_{}", c)
    } else {
        format!("lt_u{:x}", c as u32)
    }
}

fn letter_of_name(name: &str, alphabet: &[char]) -> Option<char> {
    alphabet.iter().copied().find(|c| letter_name(*c) == name)
}

// ---------------------------------------------------------------------------
// SMT-LIB emission
// ---------------------------------------------------------------------------

fn smt_quote(v: &str) -> String {
    // our variable names may contain ':'; SMT-LIB quotes them with |..|
    if v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        v.to_string()
    } else {
        format!("|{}|", v)
    }
}

fn smt_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Not(g) => {
            out.push_str("(not ");
            smt_formula(g, out);
            out.push(')');
        }
        Formula::And(fs) => {
            out.push_str("(and");
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
        Formula::Or(fs) => {
            out.push_str("(or");
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
        Formula::Exists(v, sort, g) => smt_quant(v, *sort, g, false, out),
        Formula::Forall(v, sort, g) => smt_quant(v, *sort, g, true, out),
        Formula::PosEq(x, y) => {
            let _ = write!(out, "(= {} {})", smt_quote(x), smt_quote(y));
        }
        Formula::PosLt(x, y) => {
            let _ = write!(out, "(< {} {})", smt_quote(x), smt_quote(y));
        }
        Formula::LetterAt(x, c) => {
            let _ = write!(out, "(= (word {}) {})", smt_quote(x), letter_name(*c));
        }
        Formula::TagEq(a, b) => {
            let term = |t: &TagTerm| match t {
                TagTerm::Var(v) => smt_quote(v),
                TagTerm::Const(c) => format!("tag_{}", c),
            };
            let _ = write!(out, "(= {} {})", term(a), term(b));
        }
        Formula::BoolVar(b) => out.push_str(&smt_quote(b)),
    }
}

fn smt_quant(v: &str, sort: Sort, body: &Formula, universal: bool, out: &mut String) {
    let head = if universal { "forall" } else { "exists" };
    let (sort_name, guard) = match sort {
        Sort::Pos => ("Int", Some(format!("(and (<= 0 {v}) (< {v} len))", v = smt_quote(v)))),
        Sort::Tag => ("Tag", None),
        Sort::Bool => ("Bool", None),
    };
    let _ = write!(out, "({} (({} {})) ", head, smt_quote(v), sort_name);
    match guard {
        Some(g) => {
            if universal {
                let _ = write!(out, "(=> {} ", g);
            } else {
                let _ = write!(out, "(and {} ", g);
            }
            smt_formula(body, out);
            out.push(')');
        }
        None => smt_formula(body, out),
    }
    out.push(')');
}

/// Emit the verification formula as an SMT-LIB v2.6 script in the UFDTLIA
/// logic. `unsat` means the Hoare triple is valid.
pub fn emit_smtlib(vf: &VerificationFormula) -> String {
    let mut out = String::new();
    out.push_str("(set-logic UFDTLIA)\n");
    let alphabet = chi_alphabet(&vf.chi);
    if !vf.tags.is_empty() {
        let ctors: Vec<String> = vf.tags.iter().map(|t| format!("(tag_{})", t)).collect();
        let _ = writeln!(out, "(declare-datatype Tag ({}))", ctors.join(" "));
    }
    let ctors: Vec<String> = alphabet.iter().map(|c| format!("({})", letter_name(*c))).collect();
    let _ = writeln!(out, "(declare-datatype Letter ({}))", ctors.join(" "));
    out.push_str("(declare-const len Int)\n");
    out.push_str("(declare-fun word (Int) Letter)\n");
    out.push_str("(assert (>= len 0))\n");
    out.push_str("(assert ");
    smt_formula(&vf.chi, &mut out);
    out.push_str(")\n");
    out.push_str("(check-sat)\n");
    out.push_str("(get-model)\n");
    out
}

// ---------------------------------------------------------------------------
// SMT model decoding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

fn sexp_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            '|' => {
                cur.push('|');
                for c2 in chars.by_ref() {
                    cur.push(c2);
                    if c2 == '|' {
                        break;
                    }
                }
            }
            '"' => {
                cur.push('"');
                for c2 in chars.by_ref() {
                    cur.push(c2);
                    if c2 == '"' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_sexps(tokens: &[String], pos: &mut usize) -> Vec<SExp> {
    let mut out = Vec::new();
    while *pos < tokens.len() {
        match tokens[*pos].as_str() {
            "(" => {
                *pos += 1;
                let inner = parse_sexps(tokens, pos);
                out.push(SExp::List(inner));
            }
            ")" => {
                *pos += 1;
                return out;
            }
            atom => {
                out.push(SExp::Atom(atom.to_string()));
                *pos += 1;
            }
        }
    }
    out
}

fn int_of(e: &SExp) -> Option<i64> {
    match e {
        SExp::Atom(a) => a.parse().ok(),
        SExp::List(items) => match items.as_slice() {
            [SExp::Atom(minus), inner] if minus == "-" => int_of(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// Evaluate a model term for `word` at a concrete position: handles ite
/// chains and bare letter constants.
fn eval_word_term(e: &SExp, argname: &str, pos: i64, alphabet: &[char]) -> Option<char> {
    match e {
        SExp::Atom(a) => letter_of_name(a, alphabet),
        SExp::List(items) => match items.as_slice() {
            [SExp::Atom(ite), cond, then_e, else_e] if ite == "ite" => {
                let holds = match cond {
                    SExp::List(c) => match c.as_slice() {
                        [SExp::Atom(eq), SExp::Atom(v), num] if eq == "=" && v == argname => {
                            int_of(num).map(|n| n == pos)
                        }
                        [SExp::Atom(eq), num, SExp::Atom(v)] if eq == "=" && v == argname => {
                            int_of(num).map(|n| n == pos)
                        }
                        _ => None,
                    },
                    _ => None,
                }?;
                if holds {
                    eval_word_term(then_e, argname, pos, alphabet)
                } else {
                    eval_word_term(else_e, argname, pos, alphabet)
                }
            }
            _ => None,
        },
    }
}

/// Decode a word from an SMT model: reads `len` and `word` definitions.
pub fn decode_smt_model(model_text: &str, alphabet: &[char]) -> Option<String> {
    let tokens = sexp_tokens(model_text);
    let mut pos = 0;
    let tree = parse_sexps(&tokens, &mut pos);
    // the model may be wrapped in an extra list (z3's output)
    let defs: Vec<&SExp> = match tree.as_slice() {
        [SExp::List(items)] => items.iter().collect(),
        _ => tree.iter().collect(),
    };
    let mut len: Option<i64> = None;
    let mut word_def: Option<(String, &SExp)> = None;
    for d in defs {
        if let SExp::List(items) = d {
            if let [SExp::Atom(df), SExp::Atom(name), args, _sort, body] = items.as_slice() {
                if df == "define-fun" && name == "len" {
                    len = int_of(body);
                } else if df == "define-fun" && name == "word" {
                    if let SExp::List(arglist) = args {
                        if let [SExp::List(arg)] = arglist.as_slice() {
                            if let [SExp::Atom(an), _] = arg.as_slice() {
                                word_def = Some((an.clone(), body));
                            }
                        }
                    }
                }
            }
        }
    }
    let len = len?;
    if !(0..=10_000).contains(&len) {
        return None;
    }
    let (argname, body) = word_def?;
    let mut word = String::new();
    for i in 0..len {
        word.push(eval_word_term(body, &argname, i, alphabet)?);
    }
    Some(word)
}

// ---------------------------------------------------------------------------
// MONA emission
// ---------------------------------------------------------------------------

fn mona_var(v: &str) -> String {
    // MONA identifiers: letters, digits, underscores; encode the rest
    v.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn mona_formula(f: &Formula, ntags: usize, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Not(g) => {
            out.push_str("~(");
            mona_formula(g, ntags, out);
            out.push(')');
        }
        Formula::And(fs) => {
            out.push('(');
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" & ");
                }
                out.push('(');
                mona_formula(g, ntags, out);
                out.push(')');
            }
            out.push(')');
        }
        Formula::Or(fs) => {
            out.push('(');
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                out.push('(');
                mona_formula(g, ntags, out);
                out.push(')');
            }
            out.push(')');
        }
        Formula::Exists(v, sort, g) => mona_quant(v, *sort, g, false, ntags, out),
        Formula::Forall(v, sort, g) => mona_quant(v, *sort, g, true, ntags, out),
        Formula::PosEq(x, y) => {
            let _ = write!(out, "{} = {}", mona_var(x), mona_var(y));
        }
        Formula::PosLt(x, y) => {
            let _ = write!(out, "{} < {}", mona_var(x), mona_var(y));
        }
        Formula::LetterAt(x, c) => {
            let _ = write!(out, "{} in L{}", mona_var(x), letter_name(*c));
        }
        Formula::TagEq(a, b) => {
            let term = |t: &TagTerm, tags_seen: &mut Option<usize>| match t {
                TagTerm::Var(v) => mona_var(v),
                TagTerm::Const(c) => {
                    // tag index via its position in the name: resolved by caller
                    let _ = tags_seen;
                    format!("TAG_{}", mona_var(c))
                }
            };
            let mut seen = None;
            let _ = write!(out, "{} = {}", term(a, &mut seen), term(b, &mut seen));
        }
        Formula::BoolVar(b) => {
            let _ = write!(out, "{} = 1", mona_var(b));
        }
    }
}

fn mona_quant(v: &str, sort: Sort, body: &Formula, universal: bool, ntags: usize, out: &mut String) {
    let head = if universal { "all1" } else { "ex1" };
    let v = mona_var(v);
    let guard = match sort {
        Sort::Pos => format!("({} <= {} & {} < wend)", ntags, v, v),
        Sort::Tag => format!("{} < {}", v, ntags),
        Sort::Bool => format!("{} <= 1", v),
    };
    let _ = write!(out, "{} {}: (", head, v);
    if universal {
        let _ = write!(out, "{} => (", guard);
    } else {
        let _ = write!(out, "{} & (", guard);
    }
    mona_formula(body, ntags, out);
    out.push_str("))");
}

/// Emit the verification formula as a MONA WS1S file. Tags occupy the first
/// |T| positions, the word itself the positions from |T| to an end marker,
/// with the letter predicates partitioning that range. `unsatisfiable` means
/// the Hoare triple is valid.
pub fn emit_mona(vf: &VerificationFormula) -> String {
    let mut out = String::new();
    out.push_str("ws1s;\n");
    let ntags = vf.tags.len();
    let alphabet = chi_alphabet(&vf.chi);
    // named tag constants
    for (i, t) in vf.tags.iter().enumerate() {
        let _ = writeln!(out, "var1 TAG_{};", mona_var(t));
        let _ = writeln!(out, "assert TAG_{} = {};", mona_var(t), i);
    }
    out.push_str("var1 wend;\n");
    let letters: Vec<String> = alphabet.iter().map(|c| format!("L{}", letter_name(*c))).collect();
    let _ = writeln!(out, "var2 {};", letters.join(", "));
    let _ = writeln!(out, "assert {} <= wend;", ntags);
    // the letter predicates partition the word range and are empty outside
    let _ = writeln!(out, "assert all1 p: (({} <= p & p < wend) => ({}));", ntags, {
        let mut cases = Vec::new();
        for me in &letters {
            let mut conj = vec![format!("p in {}", me)];
            for other in &letters {
                if other != me {
                    conj.push(format!("~(p in {})", other));
                }
            }
            cases.push(format!("({})", conj.join(" & ")));
        }
        cases.join(" | ")
    });
    let _ = writeln!(
        out,
        "assert all1 p: (~({} <= p & p < wend) => ({}));",
        ntags,
        letters.iter().map(|l| format!("~(p in {})", l)).collect::<Vec<_>>().join(" & ")
    );
    let mut body = String::new();
    mona_formula(&vf.chi, ntags, &mut body);
    let _ = writeln!(out, "{};", body);
    out
}

/// Decode a word from MONA's satisfying example output.
pub fn decode_mona_example(output: &str, vf: &VerificationFormula) -> Option<String> {
    let alphabet = chi_alphabet(&vf.chi);
    let ntags = vf.tags.len();
    let mut wend: Option<usize> = None;
    let mut sets: Vec<(char, BTreeSet<usize>)> = Vec::new();
    for line in output.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("wend = ") {
            wend = rest.trim().parse().ok();
        }
        for c in &alphabet {
            let prefix = format!("L{} = ", letter_name(*c));
            if let Some(rest) = line.strip_prefix(&prefix) {
                let inner = rest.trim().trim_start_matches('{').trim_end_matches('}');
                let mut set = BTreeSet::new();
                for part in inner.split(',') {
                    let part = part.trim();
                    if !part.is_empty() {
                        if let Ok(v) = part.parse::<usize>() {
                            set.insert(v);
                        }
                    }
                }
                sets.push((*c, set));
            }
        }
    }
    let wend = wend?;
    let mut word = String::new();
    for p in ntags..wend {
        let c = sets.iter().find(|(_, s)| s.contains(&p)).map(|(c, _)| *c)?;
        word.push(c);
    }
    Some(word)
}

// ---------------------------------------------------------------------------
// Solver driver
// ---------------------------------------------------------------------------

fn binary_for(backend: Backend) -> Option<String> {
    let (env, default) = match backend {
        Backend::Z3 => ("POLYCHECK_Z3", "z3"),
        Backend::Cvc5 => ("POLYCHECK_CVC5", "cvc5"),
        Backend::Mona => ("POLYCHECK_MONA", "mona"),
        Backend::Bounded => return None,
    };
    Some(std::env::var(env).unwrap_or_else(|_| default.to_string()))
}

/// Whether the backend's binary can be spawned at all.
pub fn backend_available(backend: Backend) -> bool {
    match backend {
        Backend::Bounded => true,
        _ => {
            let bin = binary_for(backend).unwrap();
            std::process::Command::new(&bin)
                .arg(match backend {
                    Backend::Mona => "-q",
                    _ => "-version",
                })
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::null())
                .stdin(std::process::Stdio::null())
                .spawn()
                .map(|mut c| {
                    let _ = c.kill();
                    let _ = c.wait();
                    true
                })
                .unwrap_or(false)
        }
    }
}

struct ProcessOutput {
    stdout: String,
    timed_out: bool,
}

fn run_with_timeout(
    bin: &str,
    args: &[&str],
    timeout: Duration,
    cancel: &AtomicBool,
) -> std::io::Result<ProcessOutput> {
    let mut child = std::process::Command::new(bin)
        .args(args)
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .stdin(std::process::Stdio::null())
        .spawn()?;
    let start = Instant::now();
    let mut stdout_pipe = child.stdout.take().expect("piped stdout");
    // reader thread so the child never blocks on a full pipe
    let reader = std::thread::spawn(move || {
        use std::io::Read;
        let mut buf = String::new();
        let _ = stdout_pipe.read_to_string(&mut buf);
        buf
    });
    let timed_out = loop {
        match child.try_wait()? {
            Some(_) => break false,
            None => {
                if start.elapsed() >= timeout || cancel.load(Ordering::Relaxed) {
                    let _ = child.kill();
                    let _ = child.wait();
                    break true;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };
    let stdout = reader.join().unwrap_or_default();
    Ok(ProcessOutput { stdout, timed_out })
}

fn write_temp(prefix: &str, ext: &str, content: &str) -> std::io::Result<tempfile::TempPath> {
    let mut f = tempfile::Builder::new().prefix(prefix).suffix(ext).tempfile()?;
    f.write_all(content.as_bytes())?;
    f.flush()?;
    Ok(f.into_temp_path())
}

fn parse_smt_verdict(output: &str, vf: &VerificationFormula) -> Verdict {
    let mut lines = output.lines();
    let first = loop {
        match lines.next() {
            Some(l) => {
                let l = l.trim();
                if l.is_empty() || l.starts_with(';') {
                    continue;
                }
                break l.to_string();
            }
            None => {
                return Verdict::Unknown(UnknownReason::SolverUnknown(
                    "empty solver output".to_string(),
                ))
            }
        }
    };
    match first.as_str() {
        "unsat" => Verdict::Valid,
        "sat" => {
            let rest: String = output.splitn(2, "sat").nth(1).unwrap_or("").to_string();
            let alphabet = chi_alphabet(&vf.chi);
            Verdict::Invalid(decode_smt_model(&rest, &alphabet))
        }
        "unknown" => Verdict::Unknown(UnknownReason::SolverUnknown("solver answered unknown".into())),
        other => Verdict::Unknown(UnknownReason::SolverUnknown(format!(
            "unparsable solver output: {}",
            other
        ))),
    }
}

fn parse_mona_verdict(output: &str, vf: &VerificationFormula) -> Verdict {
    if output.contains("Formula is unsatisfiable") {
        return Verdict::Valid;
    }
    if output.contains("Formula is valid") || output.contains("A satisfying example") {
        return Verdict::Invalid(decode_mona_example(output, vf));
    }
    if output.contains("out of memory") || output.contains("BDD too large") {
        return Verdict::Unknown(UnknownReason::Memout);
    }
    Verdict::Unknown(UnknownReason::SolverUnknown(format!(
        "unparsable MONA output: {}",
        output.lines().take(3).collect::<Vec<_>>().join(" / ")
    )))
}

/// Run one solver task to a verdict.
pub fn run_solver(vf: &VerificationFormula, task: &SolverTask) -> Verdict {
    run_solver_cancellable(vf, task, &AtomicBool::new(false))
}

fn run_solver_cancellable(vf: &VerificationFormula, task: &SolverTask, cancel: &AtomicBool) -> Verdict {
    match task.backend {
        Backend::Bounded => match bounded_sat(&vf.chi, &vf.tags, task.maxlen) {
            BoundedResult::Sat(w) => Verdict::Invalid(Some(w)),
            BoundedResult::NoWitnessUpTo(_) => Verdict::Valid,
        },
        Backend::Z3 | Backend::Cvc5 => {
            let bin = binary_for(task.backend).unwrap();
            let text = emit_smtlib(vf);
            let path = match write_temp("polycheck", ".smt2", &text) {
                Ok(p) => p,
                Err(e) => return Verdict::Unknown(UnknownReason::SolverUnknown(e.to_string())),
            };
            let path_str = path.to_string_lossy().to_string();
            let mut args = vec![path_str.as_str()];
            let cvc5_extra = ["--lang", "smt2"];
            if task.backend == Backend::Cvc5 {
                args.extend_from_slice(&cvc5_extra);
            }
            match run_with_timeout(&bin, &args, task.timeout, cancel) {
                Ok(out) if out.timed_out => Verdict::Unknown(UnknownReason::Timeout),
                Ok(out) => parse_smt_verdict(&out.stdout, vf),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    Verdict::Unknown(UnknownReason::SolverMissing(bin))
                }
                Err(e) => Verdict::Unknown(UnknownReason::SolverUnknown(e.to_string())),
            }
        }
        Backend::Mona => {
            let bin = binary_for(task.backend).unwrap();
            let text = emit_mona(vf);
            let path = match write_temp("polycheck", ".mona", &text) {
                Ok(p) => p,
                Err(e) => return Verdict::Unknown(UnknownReason::SolverUnknown(e.to_string())),
            };
            let path_str = path.to_string_lossy().to_string();
            match run_with_timeout(&bin, &[&path_str], task.timeout, cancel) {
                Ok(out) if out.timed_out => Verdict::Unknown(UnknownReason::Timeout),
                Ok(out) => parse_mona_verdict(&out.stdout, vf),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    Verdict::Unknown(UnknownReason::SolverMissing(bin))
                }
                Err(e) => Verdict::Unknown(UnknownReason::SolverUnknown(e.to_string())),
            }
        }
    }
}

/// Run several backends concurrently; the first conclusive verdict cancels
/// the remaining solvers. Returns every backend's verdict (cancelled ones
/// report a timeout-style unknown).
pub fn run_solvers(vf: &VerificationFormula, tasks: &[SolverTask]) -> Vec<(Backend, Verdict)> {
    if tasks.len() == 1 {
        return vec![(tasks[0].backend, run_solver(vf, &tasks[0]))];
    }
    let cancel = Arc::new(AtomicBool::new(false));
    let mut results: Vec<(Backend, Verdict)> = Vec::with_capacity(tasks.len());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for task in tasks {
            let cancel = Arc::clone(&cancel);
            handles.push((
                task.backend,
                scope.spawn(move || {
                    let v = run_solver_cancellable(vf, task, &cancel);
                    if v.conclusive() {
                        cancel.store(true, Ordering::Relaxed);
                    }
                    v
                }),
            ));
        }
        for (backend, h) in handles {
            results.push((backend, h.join().expect("solver thread")));
        }
    });
    results
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fo::Formula;

    fn tiny_vf(chi: Formula, tags: Vec<String>) -> VerificationFormula {
        let qrank = chi.qrank();
        let size = chi.size();
        VerificationFormula { chi, qrank, size, tags }
    }

    #[test]
    fn smtlib_starts_with_logic_line() {
        let vf = tiny_vf(Formula::False, vec![]);
        let text = emit_smtlib(&vf);
        assert!(text.starts_with("(set-logic UFDTLIA)\n"));
        assert!(text.contains("(declare-fun word (Int) Letter)"));
        assert!(text.contains("(check-sat)"));
        assert!(text.contains("(get-model)"));
    }

    #[test]
    fn smtlib_declares_tags_when_present() {
        let vf = tiny_vf(
            Formula::exists(
                "t",
                Sort::Tag,
                Formula::TagEq(TagTerm::Var("t".into()), TagTerm::Const("t0".into())),
            ),
            vec!["t0".into(), "t1".into()],
        );
        let text = emit_smtlib(&vf);
        assert!(text.contains("(declare-datatype Tag ((tag_t0) (tag_t1)))"));
    }

    #[test]
    fn mona_emission_has_partition_and_relativization() {
        let vf = tiny_vf(
            Formula::exists("x", Sort::Pos, Formula::LetterAt("x".into(), 'a')),
            vec!["t0".into()],
        );
        let text = emit_mona(&vf);
        assert!(text.starts_with("ws1s;\n"));
        assert!(text.contains("var2 Llt_a, Llt_blank;"));
        assert!(text.contains("ex1 x: ((1 <= x & x < wend) & ("));
        // exactly-one-letter constraint present
        assert!(text.contains("~(p in Llt_blank)"));
    }

    #[test]
    fn bounded_backend_verdicts() {
        let sat = tiny_vf(
            Formula::exists("x", Sort::Pos, Formula::LetterAt("x".into(), 'a')),
            vec![],
        );
        let task = SolverTask { backend: Backend::Bounded, timeout: Duration::from_secs(5), maxlen: 3 };
        assert_eq!(run_solver(&sat, &task), Verdict::Invalid(Some("a".to_string())));
        let unsat = tiny_vf(Formula::False, vec![]);
        assert_eq!(run_solver(&unsat, &task), Verdict::Valid);
    }

    #[test]
    fn missing_binary_reported() {
        std::env::set_var("POLYCHECK_Z3", "/definitely/not/a/binary");
        let vf = tiny_vf(Formula::False, vec![]);
        let task = SolverTask { backend: Backend::Z3, timeout: Duration::from_secs(1), maxlen: 3 };
        match run_solver(&vf, &task) {
            Verdict::Unknown(UnknownReason::SolverMissing(_)) => {}
            other => panic!("expected solver-missing, got {:?}", other),
        }
        std::env::remove_var("POLYCHECK_Z3");
    }

    #[test]
    fn smt_model_decoding() {
        let model = r#"(
  (define-fun len () Int 2)
  (define-fun word ((x!0 Int)) Letter (ite (= x!0 0) lt_a lt_b))
)"#;
        let alphabet = vec!['a', 'b', BLANK];
        assert_eq!(decode_smt_model(model, &alphabet), Some("ab".to_string()));
    }

    #[test]
    fn mona_example_decoding() {
        let vf = tiny_vf(
            Formula::exists("x", Sort::Pos, Formula::LetterAt("x".into(), 'a')),
            vec!["t0".into()],
        );
        let output = "A satisfying example of least length (2) is:\nwend = 3\nLlt_a = {1,2}\nLlt_blank = {}\n";
        assert_eq!(decode_mona_example(output, &vf), Some("aa".to_string()));
    }
}
