use thiserror::Error;

/// Every failure the library reports. The `code` method gives the stable
/// short name used in CLI output and tests.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("undeclared location `{name}` at {line}:{col}")]
    UndeclaredLocation { name: String, line: usize, col: usize },

    #[error("undeclared register `{name}` in thread {tid}")]
    UndeclaredRegister { name: String, tid: u32 },

    #[error("label `{label}` is not defined in thread {tid}")]
    DanglingLabel { label: String, tid: u32 },

    #[error("transition not enabled: {0}")]
    NotEnabled(String),

    #[error("relation is cyclic")]
    Cyclic,

    #[error("event set is not closed under po and rf: {0}")]
    NotPrefixClosed(String),

    #[error("thread {tid} needs more than {limit} events outside a spinloop")]
    BoundExceeded { tid: u32, limit: usize },

    #[error("unsupported loop structure: {0}")]
    UnsupportedLoop(String),

    #[error("write {0} was never propagated to memory")]
    UnpropagatedWrite(String),

    #[error("graph is not consistent under {0}")]
    InconsistentInput(String),

    #[error("thread {tid} loops without touching memory")]
    SilentDivergence { tid: u32 },

    #[error("value {value} is outside the configured value domain")]
    ValueOutOfDomain { value: i64 },

    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "E_SYNTAX",
            Error::UndeclaredLocation { .. } => "E_UNDECLARED_LOCATION",
            Error::UndeclaredRegister { .. } => "E_UNDECLARED_REGISTER",
            Error::DanglingLabel { .. } => "E_DANGLING_LABEL",
            Error::NotEnabled(_) => "E_NOT_ENABLED",
            Error::Cyclic => "E_CYCLIC",
            Error::NotPrefixClosed(_) => "E_NOT_PREFIX_CLOSED",
            Error::BoundExceeded { .. } => "E_BOUND_EXCEEDED",
            Error::UnsupportedLoop(_) => "E_UNSUPPORTED_LOOP",
            Error::UnpropagatedWrite(_) => "E_UNPROPAGATED_WRITE",
            Error::InconsistentInput(_) => "E_INCONSISTENT_INPUT",
            Error::SilentDivergence { .. } => "E_SILENT_DIVERGENCE",
            Error::ValueOutOfDomain { .. } => "E_VALUE_OUT_OF_DOMAIN",
            Error::MalformedGraph(_) => "E_MALFORMED_GRAPH",
            Error::MalformedTrace(_) => "E_MALFORMED_TRACE",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
