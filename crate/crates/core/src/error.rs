use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FtsError {
    #[error("clause {clause}: constraint {constraint}: {reason}")]
    MalformedConstraint {
        clause: String,
        constraint: String,
        reason: String,
    },
    #[error("duplicate clause name {0}")]
    DuplicateClause(String),
    #[error("inconsistent clause: {0}")]
    InconsistentClause(String),
    #[error("bad initial clause: {0}")]
    BadInitial(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {0} has neither a test nor a membership check")]
    Unverifiable(String),
    #[error("unknown value type {0}")]
    UnknownType(String),
    #[error("invalid problem description: {0}")]
    InvalidSpec(String),
}
