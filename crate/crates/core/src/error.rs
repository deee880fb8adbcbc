use std::path::PathBuf;

use thiserror::Error;

use crate::relational::Tuple;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Location of a syntax error inside a source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: Position, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("predicate `{0}` declared more than once")]
    DuplicatePredicate(String),

    #[error("predicate `{predicate}` has arity {expected}, got {found} arguments")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },

    #[error("constant `{0}` is outside the declared universe")]
    ConstantOutsideUniverse(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("`{0}` is neither a bound variable nor a constant of the universe")]
    UnboundVariable(String),

    #[error("unsafe rule: head variable `{variable}` of `{head}` does not occur in the body")]
    UnsafeRule { head: String, variable: String },

    #[error("rule for `{0}` uses negation; only positive programs are supported")]
    NonPositiveRule(String),

    #[error("relation `{relation}` has no column `{column}`")]
    UnknownColumn { relation: String, column: String },

    #[error("tuple {0} is not in the partition's tuple set")]
    UnknownPartitionTuple(Tuple),

    #[error("expected {expected} query, got {found} query")]
    WrongQueryKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("binding mismatch: {0}")]
    BindingMismatch(String),

    #[error("value `{value}` in {relation}.{column} is not numeric")]
    NonNumeric {
        relation: String,
        column: String,
        value: String,
    },

    #[error("fixed-denominator AVG over empty relation `{0}`")]
    EmptyAverage(String),

    #[error("variable X[{0}] occurs both positively and negatively in the D-lineage")]
    MixedPolarity(Tuple),

    #[error("tuple {0} is exogenous")]
    ExogenousTuple(Tuple),

    #[error("tuple {0} is not a variable of the outcome space")]
    NotInOutcomeSpace(Tuple),

    #[error("intervention on {0} contradicts its pinned or already-assigned value")]
    InconsistentIntervention(Tuple),

    #[error("assignment has no value for {0}")]
    MissingAssignment(Tuple),

    #[error("{what}: size {size} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("query is not monotone")]
    NonMonotone,

    #[error("query is false in the instance")]
    QueryFalse,

    #[error("query has zero variance; correlation is undefined")]
    ZeroVariance,
}
