use std::fmt;

/// Module in which a failure originated, carried through the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Econ,
    Predict,
    Mpc,
    Auction,
    Consensus,
    Secure,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Econ => "econ",
            Stage::Predict => "predict",
            Stage::Mpc => "mpc",
            Stage::Auction => "auction",
            Stage::Consensus => "consensus",
            Stage::Secure => "secure",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("clearing mismatch: bids sum to {bids} but {pool} coins are auctioned")]
    ClearingMismatch { bids: f64, pool: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("infeasible problem: {0}")]
    InfeasibleProblem(String),
    #[error("degenerate scenario set: {0} scenarios, at least 2 required")]
    DegenerateScenarioSet(usize),
    #[error("subproblem failure: {0}")]
    SubproblemFailure(String),
    #[error("iteration limit of {iterations} reached (residuals {primal:.3e} / {dual:.3e})")]
    IterationLimit {
        iterations: usize,
        primal: f64,
        dual: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("deviation detected: node {node} at round {round}")]
    DeviationDetected { node: usize, round: usize },
    #[error("commitment mismatch for node {node}: {what}")]
    CommitmentMismatch { node: usize, what: String },
    #[error("epoch {epoch} ({stage}): {source}")]
    AtEpoch {
        epoch: usize,
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn at_epoch(self, epoch: usize, stage: Stage) -> Self {
        Error::AtEpoch {
            epoch,
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping epoch context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtEpoch { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
