use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("resource cap exceeded: {what} needs {}, cap is {cap}", show_needed(*needed))]
    ResourceCap {
        what: &'static str,
        needed: u128,
        cap: usize,
    },
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("radius mismatch: {0} vs {1}")]
    RadiusMismatch(usize, usize),
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("insufficient radius: need {needed}, pattern has {actual}")]
    InsufficientRadius { needed: usize, actual: usize },
    #[error("modulus mismatch: map expects radius {expected}, window set has {actual}")]
    ModulusMismatch { expected: usize, actual: usize },
    #[error("group is infinite; operation needs a finite quotient")]
    NotFinite,
    #[error("element {0} out of range")]
    OutOfRange(usize),
    #[error("invalid group: {0}")]
    InvalidGroup(String),
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),
    #[error("map is not local with memory radius {0}")]
    NotLocal(usize),
    #[error("map is not shift-equivariant")]
    NotEquivariant,
    #[error("matrix is not invertible (rank {rank} of {size})")]
    NotInvertible { rank: usize, size: usize },
    #[error("one-sided inverse check failed: {0}")]
    NotOneSidedInverse(String),
    #[error("window does not determine the configuration: {0}")]
    IncompleteWindow(String),
    #[error("restriction is not an embedding within search radius {0}")]
    NotEmbedding(usize),
    #[error("stage `{stage}` failed: {detail}")]
    StageFailed { stage: &'static str, detail: String },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

fn show_needed(n: u128) -> String {
    if n == u128::MAX {
        "more than 2^128".into()
    } else {
        n.to_string()
    }
}
