use thiserror::Error;

/// Errors surfaced by topology validation, channel setup and state updates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link ({0} -> {1})")]
    DuplicateLink(String, String),
    #[error("link ({0} -> {1}) references unknown node `{2}`")]
    UnknownNode(String, String, String),
    #[error("link ({0} -> {1}) directly connects a source and a destination")]
    SourceDestinationLink(String, String),
    #[error("source `{0}` has no outgoing link")]
    SourceWithoutEgress(String),
    #[error("destination `{0}` has no incoming link")]
    DestinationWithoutIngress(String),
    #[error("commodity source `{0}` must be declared with the source role")]
    BadSourceRole(String),
    #[error("commodity destination `{0}` must be declared with the destination role")]
    BadDestinationRole(String),
    #[error("source `{0}` declared more than once")]
    DuplicateCommodity(String),
    #[error("no commodities declared")]
    NoCommodities,
    #[error("channel parameter out of range: {0}")]
    BadChannelParam(String),
    #[error("channel parameters cover {got} links, topology has {want}")]
    ChannelLinkMismatch { got: usize, want: usize },
    #[error("all-links-concurrent interference requires constant link rates")]
    WiredModeNeedsConstantRates,
    #[error("negative input to queue update: {0}")]
    NegativeInput(String),
    #[error("partial-message queue for source `{0}` is empty; no message in flight")]
    NoMessageInFlight(String),
    #[error("message boundary for source `{0}` requires an empty partial-message queue")]
    MessageStillInFlight(String),
    #[error("control parameter out of range: {0}")]
    BadControlParam(String),
    #[error("run configuration invalid: {0}")]
    BadRunConfig(String),
    #[error("trace window {start}..{end} is empty or out of range (trace has {len} blocks)")]
    BadTraceWindow { start: usize, end: usize, len: usize },
    #[error("need at least {want} completed messages, trace has {got}")]
    TooFewMessages { want: usize, got: usize },
    #[error("xor shares differ in length ({0} vs {1})")]
    ShareLengthMismatch(usize, usize),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, Error>;
