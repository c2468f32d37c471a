use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed dataset: {0}")]
    Structure(String),
    #[error("dataset failed validation with {0} violation(s)")]
    InvalidData(usize),
    #[error("time {t} out of range 1..={tau}")]
    TimeOutOfRange { t: usize, tau: usize },
    #[error("exposure kind mismatch: {0}")]
    KindMismatch(String),
    #[error("empty risk set at t={t}")]
    EmptyRiskSet { t: usize },
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("learner `{name}` failed: {reason}")]
    LearnerFailed { name: String, reason: String },
    #[error("all candidate learners failed: {0}")]
    AllLearnersFailed(String),
    #[error("t={t}, fold {fold}: {source}")]
    InFold {
        t: usize,
        fold: usize,
        source: Box<Error>,
    },
    #[error("targeting step did not converge at t={t}")]
    TiltNonConvergence { t: usize },
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("state space of {0} paths exceeds the enumeration limit")]
    StateSpace(u128),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn in_fold(self, t: usize, fold: usize) -> Self {
        Error::InFold {
            t,
            fold,
            source: Box::new(self),
        }
    }
}
