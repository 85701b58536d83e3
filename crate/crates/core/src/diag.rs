//! Diagnostics: source spans, error categories, and the crate-wide error type.

use std::fmt;

/// A line/column position in a source file (1-based; 0:0 means "unknown").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }

    pub fn is_known(&self) -> bool {
        self.line != 0
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// The restriction a type error violates. Each category corresponds to one of
/// the language restrictions enforced by the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Unknown or forward function reference (the grammar itself has no
    /// `while` and no recursion, so this is how R.I surfaces).
    WhileOrRecursion,
    /// Assignment to anything that is not a mutable boolean (R.II).
    MutationViolation,
    /// Equality between two nested words where neither side is a constant (R.III).
    NestedWordEquality,
    /// Comparison of positions with different origins (R.IV).
    CrossListComparison,
    /// Re-binding of a name already in scope (R.V).
    Shadowing,
    /// A function parameter of boolean type (R.VI).
    BooleanArgument,
    /// Assignment of `False` or re-declaration of a boolean (R.VII).
    BooleanReset,
    /// A `return` of a character value outside yield position (rewriting, step F).
    ReturnDepthZero,
    /// Plain syntax error.
    Syntax,
    /// Unbound variable or function.
    Unbound,
    /// Any other typing error.
    Type,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::WhileOrRecursion => "WhileOrRecursion",
            Category::MutationViolation => "MutationViolation",
            Category::NestedWordEquality => "NestedWordEquality",
            Category::CrossListComparison => "CrossListComparison",
            Category::Shadowing => "Shadowing",
            Category::BooleanArgument => "BooleanArgument",
            Category::BooleanReset => "BooleanReset",
            Category::ReturnDepthZero => "ReturnDepthZero",
            Category::Syntax => "SyntaxError",
            Category::Unbound => "UnboundVariable",
            Category::Type => "TypeError",
        };
        f.write_str(s)
    }
}

/// A diagnostic with category, message and source span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub category: Category,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn new(category: Category, message: impl Into<String>, span: Span) -> Self {
        Diagnostic { category, message: message.into(), span }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.span.is_known() {
            write!(f, "{}: {} ({})", self.span, self.message, self.category)
        } else {
            write!(f, "{} ({})", self.message, self.category)
        }
    }
}

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {0}")]
    Parse(Diagnostic),
    #[error("type error at {0}")]
    Type(Diagnostic),
    #[error("rewriting failed: {0}")]
    Rewrite(Diagnostic),
    #[error("internal bound violation: {0}")]
    BoundViolation(String),
    #[error("internal invariant violation: {0}")]
    Internal(String),
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        match self {
            Error::Parse(d) | Error::Type(d) | Error::Rewrite(d) => Some(d),
            _ => None,
        }
    }

    pub fn category(&self) -> Option<Category> {
        self.diagnostic().map(|d| d.category)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
