use thiserror::Error;

pub type Result<T> = std::result::Result<T, FairnessError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairnessError {
    /// A ratio was requested whose denominator is zero for this group.
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(&'static str),

    #[error("group has no records")]
    EmptyGroup,

    /// Arguments outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("record {index} in group `{group}` has no score")]
    MissingScore { group: String, index: usize },

    /// A group cannot support a ROC curve (missing a class, or absent).
    #[error("group `{group}` is degenerate: {reason}")]
    DegenerateGroup { group: String, reason: String },

    #[error("no decision rule for group `{0}`")]
    MissingRule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FairnessError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FairnessError::Domain(msg.into())
    }
}
