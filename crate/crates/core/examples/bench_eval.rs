use polycheck::parser::parse_program;
use polycheck::typecheck::{typecheck_program, Mode};
use polycheck::rewrite::rewrite_to_simple;
use polycheck::interp_compile::{compile_interpretation, eval_interpretation};
use polycheck::hl_interp::run_word_to_word;
use std::time::Instant;

fn main() {
    for name in ["subwords_ab", "litteral_test", "map_reverse", "compress_as"] {
        let text = std::fs::read_to_string(format!("corpus/{}.pr", name)).unwrap();
        let tp = typecheck_program(&parse_program(&text).unwrap(), Mode::Surface).unwrap();
        let out = rewrite_to_simple(&tp).unwrap();
        let interp = compile_interpretation(&out.simple);
        let word: String = "ab#a b ab#ab".chars().take(12).collect();
        let t = Instant::now();
        let got = eval_interpretation(&interp, &word);
        let expect = run_word_to_word(&tp, &word).unwrap();
        println!("{}: len12 eval {:?} match={} tags={} ar={}", name, t.elapsed(), got == expect, interp.tags.len(), interp.max_arity());
        let t = Instant::now();
        let mut n = 0;
        for w in ["ab", "ba#", "aabb", "a b a"] {
            let _ = eval_interpretation(&interp, w);
            n += 1;
        }
        println!("  {} short evals in {:?}", n, t.elapsed());
    }
}
