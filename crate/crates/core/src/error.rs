use alloc::string::String;

use crate::markov::JointState;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("invalid filter criteria: {0}")]
    InvalidCriteria(String),
    #[error("no eligible servers")]
    NoEligibleServers,
    #[error("inconsistent panel: {0}")]
    InconsistentPanel(String),
    #[error("window {0} is not part of the panel")]
    UnknownWindow(u32),
    #[error("median split over an empty support")]
    EmptySupport,
    #[error("layer snapshots are inconsistent: {0}")]
    LayerMismatch(String),
    #[error("sequences need at least two windows, got {0}")]
    TooFewWindows(usize),
    #[error("state {0} has zero occupancy")]
    UndefinedRow(JointState),
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("bootstrap needs at least {min} replicates, got {got}")]
    TooFewReplicates { min: usize, got: usize },
    #[error("bootstrap needs at least two dyads, got {0}")]
    TooFewDyads(usize),
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("cannot fabricate raw logs: {0}")]
    Fabrication(String),
}
