//! Error types shared across the crate.

use crate::model::{FileRef, NodeId};

/// Crate-wide error type.
///
/// Configuration problems carry the specific violated constraint so the CLI
/// can surface actionable messages.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A run parameter violates a divisibility or range constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation argument is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two bit strings that must have equal length do not.
    #[error("payload length mismatch: {left} bits vs {right} bits")]
    PayloadLength { left: usize, right: usize },

    /// A payload length is incompatible with the requested group operation.
    #[error("payload of {bits} bits is not valid for group {group}: {reason}")]
    PayloadAlignment {
        bits: usize,
        group: &'static str,
        reason: &'static str,
    },

    /// A map request touched a file outside the node's local storage.
    #[error("node {node} does not store file {file}")]
    PlacementViolation { node: NodeId, file: FileRef },

    /// A function and a file from different jobs were combined.
    #[error("cross-job map: function belongs to job {function_job}, file to job {file_job}")]
    CrossJob { function_job: u32, file_job: u32 },

    /// A multicast listed its own sender among the recipients.
    #[error("node {0} cannot be a recipient of its own broadcast")]
    SelfDelivery(NodeId),

    /// A multicast had an empty recipient set.
    #[error("multicast requires at least one recipient")]
    NoRecipients,

    /// A node took part in an exchange it does not belong to.
    #[error("node {node} is not a member of subset {subset:?}")]
    NotAMember { node: NodeId, subset: Vec<NodeId> },

    /// A coded exchange received malformed or inconsistent contributions.
    #[error("shuffle protocol violated: {0}")]
    Protocol(String),

    /// Final reduction was attempted with missing or duplicate partial sums.
    #[error("incomplete shuffle: {0}")]
    IncompleteShuffle(String),
}

pub type Result<T> = std::result::Result<T, Error>;
