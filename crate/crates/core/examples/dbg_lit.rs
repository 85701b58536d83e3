use polycheck::parser::parse_program;
use polycheck::typecheck::{typecheck_program, Mode};
use polycheck::rewrite::rewrite_to_simple;
use polycheck::interp_compile::{compile_interpretation, eval_interpretation, print_interpretation};
use polycheck::simple::{eval_simple, print_simple};

fn main() {
    let text = r#"
def main(w : [Char]) : [Char] :=
    if w === "aa" then
        return "b"
    endif
    for (i, c) in enumerate(w) do
        yield c
    done
"#;
    let tp = typecheck_program(&parse_program(text).unwrap(), Mode::Surface).unwrap();
    let out = rewrite_to_simple(&tp).unwrap();
    println!("=== simple ===\n{}", print_simple(&out.simple));
    println!("simple on aa: {:?}", eval_simple(&out.simple, "aa").unwrap());
    let interp = compile_interpretation(&out.simple);
    println!("interp on aa: {:?}", eval_interpretation(&interp, "aa"));
    println!("interp on ab: {:?}", eval_interpretation(&interp, "ab"));
    println!("=== interp ===\n{}", print_interpretation(&interp));
}
