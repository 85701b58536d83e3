//! Command-line front end: check, run, compile, verify and metrics.

use clap::{Args, Parser, Subcommand};
use polycheck::ast::pretty_program;
use polycheck::backends::{
    emit_mona, emit_smtlib, run_solvers, Backend, SolverTask, UnknownReason, Verdict,
};
use polycheck::fo::{eval_closed, pretty as pretty_formula, Formula};
use polycheck::hl_interp::{eval_program, run_word_to_word, Value};
use polycheck::interp_compile::{compile_interpretation, print_interpretation, Interpretation};
use polycheck::nested::NestedWord;
use polycheck::parser::parse_program;
use polycheck::pullback::{build_chi, naive_pullback, VerificationFormula};
use polycheck::rewrite::{rewrite_to_simple, PassId};
use polycheck::simple::{metrics_hl, metrics_simple, print_simple};
use polycheck::spec_dsl::parse_spec;
use polycheck::typecheck::{typecheck_program, Mode, TypedProgram};
use serde::Serialize;
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "polycheck",
    version,
    about = "Compiler and verifier for string-transformation for-programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check a program, reporting diagnostics.
    Check { file: String },
    /// Run a program on an input word using the reference interpreter.
    Run {
        file: String,
        #[arg(long)]
        input: String,
        /// Output format: `flat` ('#'-separated depth boundaries) or
        /// `json-like-nested`.
        #[arg(long, default_value = "flat")]
        format: String,
    },
    /// Compile a program and emit an intermediate or backend format.
    Compile {
        file: String,
        /// One of: simple, interp, smtlib, mona.
        #[arg(long, default_value = "simple")]
        emit: String,
        /// Print the program as it stands after the given rewriting pass
        /// (A..H) instead.
        #[arg(long)]
        dump_pass: Option<PassId>,
        /// Precondition (used by smtlib/mona emission).
        #[arg(long, default_value = "true")]
        pre: String,
        /// Postcondition (used by smtlib/mona emission).
        #[arg(long, default_value = "true")]
        post: String,
    },
    /// Decide a Hoare triple {pre} program {post}.
    Verify(VerifyArgs),
    /// Print size, loop-depth, boolean-depth and formula metrics.
    Metrics {
        file: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct VerifyArgs {
    file: String,
    #[arg(long)]
    pre: String,
    #[arg(long)]
    post: String,
    /// Comma-separated backends: bounded, z3, cvc5, mona.
    #[arg(long, default_value = "bounded")]
    backends: String,
    /// Per-solver wall-clock timeout in seconds.
    #[arg(long, default_value_t = 5.0)]
    timeout: f64,
    /// Word-length bound for the bounded backend.
    #[arg(long, default_value_t = 6)]
    maxlen: usize,
    /// Print the verification formula in spec-DSL syntax.
    #[arg(long)]
    dump_chi: bool,
    /// Use the naive (reference) pullback instead of the efficient one.
    #[arg(long)]
    naive_pullback: bool,
    /// Machine-readable report.
    #[arg(long)]
    json: bool,
}

fn user_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(3)
}

fn load(file: &str) -> Result<TypedProgram, String> {
    let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {}", file, e))?;
    let program = parse_program(&text).map_err(|e| format!("{}: {}", file, e))?;
    typecheck_program(&program, Mode::Surface).map_err(|e| format!("{}: {}", file, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { file } => match load(&file) {
            Ok(tp) => {
                println!("{}: ok ({} function(s))", file, tp.program.functions.len());
                ExitCode::SUCCESS
            }
            Err(e) => user_error(e),
        },
        Command::Run { file, input, format } => {
            let tp = match load(&file) {
                Ok(tp) => tp,
                Err(e) => return user_error(e),
            };
            match eval_program(&tp, &NestedWord::word(&input)) {
                Ok(Value::Word(w)) => {
                    match format.as_str() {
                        "flat" => println!("{}", w.render_flat()),
                        "json-like-nested" => println!("{}", w.render_structured()),
                        other => return user_error(format!("unknown format `{}`", other)),
                    }
                    ExitCode::SUCCESS
                }
                Ok(Value::Bool(b)) => {
                    println!("{}", b);
                    ExitCode::SUCCESS
                }
                Err(e) => user_error(e),
            }
        }
        Command::Compile { file, emit, dump_pass, pre, post } => {
            let tp = match load(&file) {
                Ok(tp) => tp,
                Err(e) => return user_error(e),
            };
            let out = match rewrite_to_simple(&tp) {
                Ok(out) => out,
                Err(e) => return user_error(e),
            };
            if let Some(pass) = dump_pass {
                let stage = out.stages.iter().find(|(p, _)| *p == pass).expect("pass exists");
                print!("{}", pretty_program(&stage.1));
                return ExitCode::SUCCESS;
            }
            match emit.as_str() {
                "simple" => {
                    print!("{}", print_simple(&out.simple));
                    ExitCode::SUCCESS
                }
                "interp" => {
                    let interp = compile_interpretation(&out.simple);
                    print!("{}", print_interpretation(&interp));
                    ExitCode::SUCCESS
                }
                "smtlib" | "mona" => {
                    let interp = compile_interpretation(&out.simple);
                    let vf = match chi_from(&pre, &post, &interp, false) {
                        Ok(vf) => vf,
                        Err(e) => return user_error(e),
                    };
                    if emit == "smtlib" {
                        print!("{}", emit_smtlib(&vf));
                    } else {
                        print!("{}", emit_mona(&vf));
                    }
                    ExitCode::SUCCESS
                }
                other => user_error(format!("unknown emit target `{}`", other)),
            }
        }
        Command::Verify(args) => cmd_verify(args),
        Command::Metrics { file, json } => cmd_metrics(&file, json),
    }
}

fn cmd_metrics(file: &str, json: bool) -> ExitCode {
    let tp = match load(file) {
        Ok(tp) => tp,
        Err(e) => return user_error(e),
    };
    let fp = metrics_hl(&tp.program);
    let out = match rewrite_to_simple(&tp) {
        Ok(out) => out,
        Err(e) => return user_error(e),
    };
    let sfp = metrics_simple(&out.simple);
    let interp = compile_interpretation(&out.simple);
    if json {
        #[derive(Serialize)]
        struct Row {
            fp_size: usize,
            fp_loop_depth: usize,
            fp_bool_depth: usize,
            sfp_size: usize,
            sfp_loop_depth: usize,
            sfp_bool_depth: usize,
            foi_size: usize,
            foi_qrank: usize,
        }
        let row = Row {
            fp_size: fp.size,
            fp_loop_depth: fp.loop_depth,
            fp_bool_depth: fp.bool_depth,
            sfp_size: sfp.size,
            sfp_loop_depth: sfp.loop_depth,
            sfp_bool_depth: sfp.bool_depth,
            foi_size: interp.size(),
            foi_qrank: interp.qrank(),
        };
        println!("{}", serde_json::to_string_pretty(&row).unwrap());
    } else {
        println!(
            "FP   size {:>8}  loop depth {:>2}  bool depth {:>2}",
            fp.size, fp.loop_depth, fp.bool_depth
        );
        println!(
            "S.FP size {:>8}  loop depth {:>2}  bool depth {:>2}",
            sfp.size, sfp.loop_depth, sfp.bool_depth
        );
        println!("FO-I size {:>8}  qrank      {:>2}", interp.size(), interp.qrank());
    }
    ExitCode::SUCCESS
}

fn chi_from(
    pre: &str,
    post: &str,
    interp: &Interpretation,
    naive: bool,
) -> Result<VerificationFormula, String> {
    let pre_f = parse_spec(pre).map_err(|e| format!("precondition: {}", e))?;
    let post_f = parse_spec(post).map_err(|e| format!("postcondition: {}", e))?;
    if naive {
        let pulled = naive_pullback(interp, &post_f);
        let chi = Formula::and2(pre_f, Formula::not(pulled));
        let qrank = chi.qrank();
        let size = chi.size();
        Ok(VerificationFormula { chi, qrank, size, tags: interp.tag_names() })
    } else {
        build_chi(&pre_f, interp, &post_f).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct BackendReport {
    backend: String,
    verdict: String,
    counterexample: Option<String>,
    detail: Option<String>,
}

#[derive(Serialize)]
struct VerifyReport {
    file: String,
    pre: String,
    post: String,
    verdict: String,
    counterexample: Option<String>,
    chi_qrank: usize,
    chi_size: usize,
    fp_size: usize,
    sfp_size: usize,
    foi_size: usize,
    foi_qrank: usize,
    millis: u128,
    backends: Vec<BackendReport>,
}

fn cmd_verify(args: VerifyArgs) -> ExitCode {
    let tp = match load(&args.file) {
        Ok(tp) => tp,
        Err(e) => return user_error(e),
    };
    if !tp.main_is_word_to_word() {
        return user_error("verification requires main of type [Char] -> [Char]");
    }
    let pre_f = match parse_spec(&args.pre) {
        Ok(f) => f,
        Err(e) => return user_error(format!("precondition: {}", e)),
    };
    let post_f = match parse_spec(&args.post) {
        Ok(f) => f,
        Err(e) => return user_error(format!("postcondition: {}", e)),
    };
    let rewritten = match rewrite_to_simple(&tp) {
        Ok(out) => out,
        Err(e) => return user_error(format!("rewriting: {}", e)),
    };
    let interp = compile_interpretation(&rewritten.simple);
    let vf = match chi_from(&args.pre, &args.post, &interp, args.naive_pullback) {
        Ok(vf) => vf,
        Err(e) => return user_error(e),
    };
    if args.dump_chi {
        println!("chi: {}", pretty_formula(&vf.chi));
    }

    let mut tasks = Vec::new();
    for b in args.backends.split(',') {
        match b.trim().parse::<Backend>() {
            Ok(backend) => tasks.push(SolverTask {
                backend,
                timeout: Duration::from_secs_f64(args.timeout),
                maxlen: args.maxlen,
            }),
            Err(e) => return user_error(e),
        }
    }
    if tasks.is_empty() {
        return user_error("at least one backend is required");
    }
    if args.maxlen == 0 && tasks.iter().any(|t| t.backend == Backend::Bounded) {
        return user_error("--maxlen must be at least 1 for the bounded backend");
    }

    let started = std::time::Instant::now();
    let results = run_solvers(&vf, &tasks);
    let elapsed = started.elapsed();

    // never trust a solver model unreplayed
    let replay = |word: &str| -> bool {
        let chars: Vec<char> = word.chars().collect();
        if !eval_closed(&pre_f, &chars, &[]) {
            return false;
        }
        match run_word_to_word(&tp, word) {
            Ok(out) => {
                let ochars: Vec<char> = out.chars().collect();
                !eval_closed(&post_f, &ochars, &[])
            }
            Err(_) => false,
        }
    };

    let mut reports = Vec::new();
    let mut overall: Option<(Verdict, Option<String>)> = None;
    for (backend, verdict) in &results {
        let (vname, cex, detail) = match verdict {
            Verdict::Valid => ("valid".to_string(), None, None),
            Verdict::Invalid(Some(w)) => {
                if replay(w) {
                    ("invalid".to_string(), Some(w.clone()), None)
                } else {
                    (
                        "invalid".to_string(),
                        None,
                        Some(format!("model `{}` did not replay; discarded", w)),
                    )
                }
            }
            Verdict::Invalid(None) => ("invalid".to_string(), None, None),
            Verdict::Unknown(r) => (
                "unknown".to_string(),
                None,
                Some(match r {
                    UnknownReason::Timeout => "timeout".to_string(),
                    UnknownReason::Memout => "memout".to_string(),
                    UnknownReason::SolverUnknown(s) => format!("solver-unknown: {}", s),
                    UnknownReason::SolverMissing(b) => format!("solver-missing: {}", b),
                }),
            ),
        };
        if verdict.conclusive() && overall.is_none() {
            overall = Some((verdict.clone(), cex.clone()));
        }
        reports.push(BackendReport {
            backend: backend.to_string(),
            verdict: vname,
            counterexample: cex,
            detail,
        });
    }

    let fp = metrics_hl(&tp.program);
    let sfp = metrics_simple(&rewritten.simple);
    let (verdict_name, counterexample, code) = match &overall {
        Some((Verdict::Valid, _)) => ("valid".to_string(), None, ExitCode::SUCCESS),
        Some((Verdict::Invalid(_), cex)) => ("invalid".to_string(), cex.clone(), ExitCode::from(1)),
        _ => ("unknown".to_string(), None, ExitCode::from(2)),
    };

    if args.json {
        let report = VerifyReport {
            file: args.file.clone(),
            pre: args.pre.clone(),
            post: args.post.clone(),
            verdict: verdict_name,
            counterexample,
            chi_qrank: vf.qrank,
            chi_size: vf.size,
            fp_size: fp.size,
            sfp_size: sfp.size,
            foi_size: interp.size(),
            foi_qrank: interp.qrank(),
            millis: elapsed.as_millis(),
            backends: reports,
        };
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        println!("chi: qrank {}  size {}", vf.qrank, vf.size);
        println!(
            "metrics: FP size {} / S.FP size {} / FO-I size {} qrank {}",
            fp.size,
            sfp.size,
            interp.size(),
            interp.qrank()
        );
        for r in &reports {
            match (&r.counterexample, &r.detail) {
                (Some(c), _) => println!("{}: {} (counterexample: {:?})", r.backend, r.verdict, c),
                (None, Some(d)) => println!("{}: {} ({})", r.backend, r.verdict, d),
                (None, None) => println!("{}: {}", r.backend, r.verdict),
            }
        }
        match (&verdict_name[..], &counterexample) {
            ("invalid", Some(c)) => println!("verdict: invalid, counterexample {:?}", c),
            (v, _) => println!("verdict: {}", v),
        }
    }
    code
}
