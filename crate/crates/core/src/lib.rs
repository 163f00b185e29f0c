//! Bucketized cuckoo hash table for connection-tracking workloads.
//!
//! * 8-slot buckets whose lookup-path metadata fits one cacheline, with keys
//!   and values in a parallel array addressed implicitly.
//! * Three lookup strategies: pessimistic, optimistic, and bloom-guided,
//!   where a small per-bucket filter of displaced keys lets most negative
//!   lookups finish after reading a single bucket.
//! * Optional 16-bit per-entry expiration timers with lazy deletion.
//! * A Horton-style remap-array table as a comparison baseline.
//! * Workload generation and benchmark runners.

mod batch;
pub mod bucket;
mod counters;
pub mod error;
pub mod expiration;
pub mod hashing;
pub mod horton;
pub mod oracle;
pub mod prefetch;
pub mod table;
pub mod workload;

pub use bucket::{Compact, Header, Layout, Timed, SLOTS};
pub use counters::InstrumentationCounters;
pub use error::{ConfigError, InsertError, UnsupportedOperation};
pub use expiration::{is_valid, quantize, ExpiryConfig, Timestamp16, Timing};
pub use hashing::{derive, spread_tags, DefaultKeyHasher, HashedKey, Key, KeyHasher, LeadingBytesHasher, Value};
pub use horton::{HortonTable, RemapArray};
pub use prefetch::{CountingPrefetch, HardwarePrefetch, NoPrefetch, Prefetch, PrefetchTarget};
pub use table::{CuckooPath, CuckooTable, Entry, InsertOutcome, MemoryReport, Strategy, Table, TableStats, TimedTable};
