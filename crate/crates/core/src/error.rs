use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A payload does not fit the available carrier or message space.
    #[error("capacity exceeded: required {required} bytes, available {available}")]
    Capacity { required: usize, available: usize },

    /// MIC or signature verification failed. Reveals nothing about content.
    #[error("authentication failure")]
    AuthenticationFailure,

    /// An envelope or signed message could not be parsed at all.
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(String),

    /// An image does not carry a decodable stego payload.
    #[error("malformed stego carrier: {0}")]
    MalformedStego(String),

    /// The channel is closed or the peer is gone.
    #[error("channel disconnected")]
    Disconnected,

    /// A pairing run aborted before key distribution completed.
    #[error("pairing failed: {0}")]
    PairingFailed(PairingFailure),

    /// The per-session message counter is exhausted.
    #[error("message counter exhausted")]
    CounterExhausted,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("png error: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Why a pairing run aborted. Confirm mismatches and key-distribution MIC
/// failures are distinct states so the audit trail can tell them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingFailure {
    ConfirmMismatch,
    KeyDistributionAuth,
    OutOfOrderFrame,
    ChannelClosed,
}

impl std::fmt::Display for PairingFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PairingFailure::ConfirmMismatch => "confirm value mismatch",
            PairingFailure::KeyDistributionAuth => "key distribution MIC failure",
            PairingFailure::OutOfOrderFrame => "out-of-order SMP frame",
            PairingFailure::ChannelClosed => "channel closed mid-pairing",
        };
        f.write_str(s)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
