//! Nested words: the value domain of the language. A nested word of depth 0
//! is a character, depth 1 a word, depth 2 a list of words, and so on, with
//! uniform depth across all elements of a list.

use std::fmt;

/// A letter of the (conceptually infinite) alphabet.
pub type Letter = char;

/// Reserved letter standing for "any character outside the program's support".
/// A private-use codepoint so it can never collide with program constants.
pub const BLANK: Letter = '\u{E000}';

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NestedWord {
    Char(Letter),
    List(Vec<NestedWord>),
}

impl NestedWord {
    /// Build a depth-1 word from a string.
    pub fn word(s: &str) -> Self {
        NestedWord::List(s.chars().map(NestedWord::Char).collect())
    }

    /// Depth of the value: 0 for characters, 1 + element depth for lists.
    /// An empty list has depth 1 by convention.
    pub fn depth(&self) -> usize {
        match self {
            NestedWord::Char(_) => 0,
            NestedWord::List(es) => 1 + es.first().map_or(0, |e| e.depth()),
        }
    }

    /// Check the uniform-depth invariant.
    pub fn is_uniform(&self) -> bool {
        match self {
            NestedWord::Char(_) => true,
            NestedWord::List(es) => {
                es.iter().all(|e| e.is_uniform())
                    && es.windows(2).all(|p| p[0].depth() == p[1].depth())
            }
        }
    }

    pub fn as_list(&self) -> Option<&[NestedWord]> {
        match self {
            NestedWord::List(es) => Some(es),
            NestedWord::Char(_) => None,
        }
    }

    pub fn as_char(&self) -> Option<Letter> {
        match self {
            NestedWord::Char(c) => Some(*c),
            NestedWord::List(_) => None,
        }
    }

    /// Extract a depth-1 word as a string (None if not depth 1).
    pub fn to_flat_string(&self) -> Option<String> {
        match self {
            NestedWord::List(es) => es.iter().map(|e| e.as_char()).collect(),
            NestedWord::Char(_) => None,
        }
    }

    /// Apply a letter renaming pointwise.
    pub fn rename(&self, f: &impl Fn(Letter) -> Letter) -> NestedWord {
        match self {
            NestedWord::Char(c) => NestedWord::Char(f(*c)),
            NestedWord::List(es) => NestedWord::List(es.iter().map(|e| e.rename(f)).collect()),
        }
    }

    /// Render with `#` separators at depth boundaries: depth-1 values print
    /// their characters, deeper values print elements followed by `#`.
    pub fn render_flat(&self) -> String {
        let mut out = String::new();
        self.render_flat_into(&mut out);
        out
    }

    fn render_flat_into(&self, out: &mut String) {
        match self {
            NestedWord::Char(c) => out.push(*c),
            NestedWord::List(es) => {
                let deep = self.depth() >= 2;
                for e in es {
                    e.render_flat_into(out);
                    if deep {
                        out.push('#');
                    }
                }
            }
        }
    }

    /// Structured rendering: characters quoted, lists bracketed.
    pub fn render_structured(&self) -> String {
        match self {
            NestedWord::Char(c) => format!("'{}'", c),
            NestedWord::List(es) => {
                if self.depth() == 1 {
                    format!("\"{}\"", es.iter().filter_map(|e| e.as_char()).collect::<String>())
                } else {
                    let inner: Vec<String> = es.iter().map(|e| e.render_structured()).collect();
                    format!("[{}]", inner.join(", "))
                }
            }
        }
    }
}

impl fmt::Display for NestedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_flat())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_uniformity() {
        let w = NestedWord::word("abc");
        assert_eq!(w.depth(), 1);
        assert!(w.is_uniform());
        let ww = NestedWord::List(vec![NestedWord::word("ab"), NestedWord::word("")]);
        assert_eq!(ww.depth(), 2);
        assert!(ww.is_uniform());
        let bad = NestedWord::List(vec![NestedWord::Char('a'), NestedWord::word("b")]);
        assert!(!bad.is_uniform());
    }

    #[test]
    fn flat_rendering_uses_hash_separators() {
        let ww = NestedWord::List(vec![NestedWord::word("ab"), NestedWord::word("c")]);
        assert_eq!(ww.render_flat(), "ab#c#");
        assert_eq!(NestedWord::word("ab").render_flat(), "ab");
    }
}
