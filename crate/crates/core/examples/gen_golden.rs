//! Regenerates the golden backend-emission files (run manually after a
//! deliberate emitter change).

use polycheck::backends::{emit_mona, emit_smtlib};
use polycheck::interp_compile::compile_interpretation;
use polycheck::parser::parse_program;
use polycheck::pullback::build_chi;
use polycheck::rewrite::rewrite_to_simple;
use polycheck::spec_dsl::parse_spec;
use polycheck::typecheck::{typecheck_program, Mode};

fn main() {
    let root = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(root.join("../../corpus/asToBs.pr")).unwrap();
    let tp = typecheck_program(&parse_program(&text).unwrap(), Mode::Surface).unwrap();
    let interp = compile_interpretation(&rewrite_to_simple(&tp).unwrap().simple);
    let pre = parse_spec("true").unwrap();
    let post = parse_spec("forall x. not label(x) == 'a'").unwrap();
    let vf = build_chi(&pre, &interp, &post).unwrap();
    let dir = root.join("tests/golden");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("asToBs_no_a.smt2"), emit_smtlib(&vf)).unwrap();
    std::fs::write(dir.join("asToBs_no_a.mona"), emit_mona(&vf)).unwrap();
    println!("golden files written to {:?}", dir);
}
