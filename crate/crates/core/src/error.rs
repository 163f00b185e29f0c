use thiserror::Error;

use crate::expiration::Timestamp16;

/// Errors raised when building a table or deriving bucket indices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("capacity {0} is not 8 x a power of two of at least 1024 entries")]
    InvalidCapacity(usize),
    #[error("bucket count {0} is not a power of two of at least 128")]
    InvalidBucketCount(usize),
    #[error("max delay {max_delay} plus scan period {scan_period} exceeds the 16-bit clock range")]
    InvalidExpiryConfig { max_delay: u32, scan_period: u32 },
    #[error("time quantum must be a positive finite number of seconds, got {0}")]
    InvalidQuantum(f64),
}

/// Errors raised by mutating operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InsertError {
    /// Neither candidate bucket had room and no bounded cuckoo path freed a slot.
    #[error("no free slot reachable; table is effectively full")]
    TableFull,
    #[error("expiration {expires:?} is not within (now, now + 1024] for now = {now:?}")]
    ExpirationOutOfRange { now: Timestamp16, expires: Timestamp16 },
    #[error("table has timers enabled but no timing was supplied")]
    MissingTiming,
    #[error("table has timers disabled but a timing was supplied")]
    UnexpectedTiming,
}

/// Returned by operations a table variant does not implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("operation `{0}` is not supported by this table variant")]
pub struct UnsupportedOperation(pub &'static str);
