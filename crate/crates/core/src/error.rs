use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error surfaced in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Load,
    Query,
    Partition,
    GroupMining,
    TreatmentMining,
    Selection,
    Render,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Load => "load",
            Phase::Query => "query",
            Phase::Partition => "partition",
            Phase::GroupMining => "grouping-pattern mining",
            Phase::TreatmentMining => "treatment mining",
            Phase::Selection => "selection",
            Phase::Render => "render",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("query produced an empty view")]
    EmptyView,

    #[error("DAG syntax error on line {line}: {message}")]
    DagSyntax { line: usize, message: String },

    #[error("DAG contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("pattern error: {0}")]
    Pattern(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance exceeds enumeration bounds: {0}")]
    Size(String),

    #[error("numeric failure during estimation: {0}")]
    Estimation(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("{phase}: {source}")]
    InPhase {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_phase(self, phase: Phase) -> Error {
        match self {
            e @ Error::InPhase { .. } => e,
            e => Error::InPhase {
                phase,
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with phase labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::InPhase { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 1 usage, 2 data or DAG, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::EmptyView
            | Error::DagSyntax { .. }
            | Error::Cycle(_)
            | Error::Pattern(_) => 2,
            Error::Size(_) | Error::Estimation(_) | Error::Solver(_) => 3,
            Error::InPhase { .. } => unreachable!(),
        }
    }
}

pub(crate) trait PhaseExt<T> {
    fn phase(self, phase: Phase) -> Result<T>;
}

impl<T> PhaseExt<T> for Result<T> {
    fn phase(self, phase: Phase) -> Result<T> {
        self.map_err(|e| e.in_phase(phase))
    }
}
