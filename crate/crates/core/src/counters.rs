//! Always-on instrumentation counters.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

/// Snapshot of a table's instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstrumentationCounters {
    pub primary_bucket_reads: u64,
    pub secondary_bucket_reads: u64,
    pub kv_reads: u64,
    pub bloom_positive: u64,
    pub bloom_true_positive: u64,
    pub bloom_false_positive: u64,
    pub inserts_primary: u64,
    pub inserts_secondary: u64,
    pub cuckoo_moves: u64,
    pub insert_failures: u64,
}

impl InstrumentationCounters {
    /// Fraction of lookups whose filter (or remap hint) wrongly sent them to
    /// the secondary bucket, over `lookups` probes.
    pub fn false_positive_rate(&self, lookups: u64) -> f64 {
        if lookups == 0 {
            0.0
        } else {
            self.bloom_false_positive as f64 / lookups as f64
        }
    }
}

/// Interior-mutable counters so read-only lookups can record activity.
#[derive(Debug, Default)]
pub(crate) struct Counters {
    pub primary_bucket_reads: Cell<u64>,
    pub secondary_bucket_reads: Cell<u64>,
    pub kv_reads: Cell<u64>,
    pub bloom_positive: Cell<u64>,
    pub bloom_true_positive: Cell<u64>,
    pub inserts_primary: Cell<u64>,
    pub inserts_secondary: Cell<u64>,
    pub cuckoo_moves: Cell<u64>,
    pub insert_failures: Cell<u64>,
}

#[inline(always)]
pub(crate) fn bump(c: &Cell<u64>) {
    c.set(c.get().saturating_add(1));
}

#[inline(always)]
pub(crate) fn add(c: &Cell<u64>, n: u64) {
    c.set(c.get().saturating_add(n));
}

impl Counters {
    pub fn snapshot(&self) -> InstrumentationCounters {
        let bloom_positive = self.bloom_positive.get();
        let bloom_true_positive = self.bloom_true_positive.get();
        InstrumentationCounters {
            primary_bucket_reads: self.primary_bucket_reads.get(),
            secondary_bucket_reads: self.secondary_bucket_reads.get(),
            kv_reads: self.kv_reads.get(),
            bloom_positive,
            bloom_true_positive,
            bloom_false_positive: bloom_positive - bloom_true_positive,
            inserts_primary: self.inserts_primary.get(),
            inserts_secondary: self.inserts_secondary.get(),
            cuckoo_moves: self.cuckoo_moves.get(),
            insert_failures: self.insert_failures.get(),
        }
    }

    pub fn reset(&self) {
        for c in [
            &self.primary_bucket_reads,
            &self.secondary_bucket_reads,
            &self.kv_reads,
            &self.bloom_positive,
            &self.bloom_true_positive,
            &self.inserts_primary,
            &self.inserts_secondary,
            &self.cuckoo_moves,
            &self.insert_failures,
        ] {
            c.set(0);
        }
    }
}
