use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid renaming: {0}")]
    InvalidRenaming(String),

    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),

    #[error("product table has no entry for the minimal pair {0}")]
    TableIncomplete(String),

    #[error("support overflow: {0}")]
    SupportOverflow(String),

    #[error("reducedness violation: {0}")]
    Reducedness(String),

    #[error("unknown letter `{0}`")]
    UnknownLetter(String),

    #[error("word too long for subset enumeration: length {len}, bound {bound}")]
    WordTooLong { len: usize, bound: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("grammar violation: {0}")]
    Grammar(String),

    #[error("state budget exceeded ({0} states)")]
    StateBudget(usize),

    #[error("projectability violation: {0}")]
    Projectability(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("not supported: {0}")]
    Unsupported(String),
}
