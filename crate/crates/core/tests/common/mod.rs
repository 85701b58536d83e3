//! Shared helpers for the integration suites.

use polycheck::hl_interp::support_constants;
use polycheck::nested::BLANK;
use polycheck::parser::parse_program;
use polycheck::typecheck::{typecheck_program, Mode, TypedProgram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Corpus programs cheap enough for the exhaustive suites (everything but
/// the bibtex-scale one).
pub const FAST_CORPUS: &[&str] = &[
    "identity",
    "reverse",
    "asToBs",
    "prefixes",
    "reverse_add_hash",
    "get_first_word",
    "get_last_word",
    "compress_as",
    "map_reverse",
    "subwords_ab",
    "litteral_test",
];

pub const FULL_CORPUS: &[&str] = &[
    "identity",
    "reverse",
    "asToBs",
    "prefixes",
    "reverse_add_hash",
    "get_first_word",
    "get_last_word",
    "compress_as",
    "map_reverse",
    "subwords_ab",
    "litteral_test",
    "bibtex",
];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load_corpus(name: &str) -> TypedProgram {
    let path = corpus_dir().join(format!("{}.pr", name));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{:?}: {}", path, e));
    let program = parse_program(&text).unwrap_or_else(|e| panic!("{}: {}", name, e));
    typecheck_program(&program, Mode::Surface).unwrap_or_else(|e| panic!("{}: {}", name, e))
}

/// The program's support plus the blank letter.
pub fn test_alphabet(tp: &TypedProgram) -> Vec<char> {
    let mut letters: Vec<char> = support_constants(&tp.program).into_iter().collect();
    letters.push(BLANK);
    letters
}

/// All words over the alphabet of length at most `maxlen`.
pub fn all_words(alphabet: &[char], maxlen: usize) -> Vec<String> {
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

/// `count` random words over the alphabet with lengths up to `maxlen`.
pub fn random_words(alphabet: &[char], maxlen: usize, count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let len = rng.gen_range(0..=maxlen);
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        })
        .collect()
}

/// The word corpus used by the semantic-equivalence criteria: everything up
/// to length 5 over support plus blank, and 200 random words up to length 12.
pub fn word_corpus(tp: &TypedProgram, seed: u64) -> Vec<String> {
    let alphabet = test_alphabet(tp);
    let mut words = all_words(&alphabet, 5);
    words.extend(random_words(&alphabet, 12, 200, seed));
    words
}
