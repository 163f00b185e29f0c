//! Batched lookups.
//!
//! A batch is processed in interleaved stages so the memory accesses of
//! different keys overlap:
//!
//! 1. hash every key and prefetch its primary bucket;
//! 2. prefetch secondary buckets according to the strategy (all of them when
//!    pessimistic, none when optimistic, filter positives when bloom-guided);
//! 3. match tags in the primary buckets and prefetch candidate entries;
//! 4. compare full keys, then repeat steps 3-4 for the keys that still need
//!    their secondary bucket.

use crate::bucket::{slots, Layout, SLOTS};
use crate::counters::{add, bump};
use crate::expiration::Timestamp16;
use crate::hashing::{HashedKey, Key, KeyHasher, Value};
use crate::prefetch::{Prefetch, PrefetchTarget};
use crate::table::{CuckooTable, Strategy};

/// Keys handled per pipeline pass; longer batches are split.
pub const MAX_BATCH: usize = 64;

impl<L: Layout, H: KeyHasher, P: Prefetch> CuckooTable<L, H, P> {
    /// Looks up every key; results match calling [`lookup`](Self::lookup)
    /// on each key in turn.
    pub fn lookup_batch(&self, keys: &[Key], now: Option<Timestamp16>) -> Vec<Option<Value>> {
        let mut out = vec![None; keys.len()];
        self.lookup_batch_into(keys, now, &mut out);
        out
    }

    /// Allocation-free form of [`lookup_batch`](Self::lookup_batch).
    pub fn lookup_batch_into(&self, keys: &[Key], now: Option<Timestamp16>, out: &mut [Option<Value>]) {
        assert_eq!(keys.len(), out.len(), "output length must match key count");
        for (keys, out) in keys.chunks(MAX_BATCH).zip(out.chunks_mut(MAX_BATCH)) {
            self.lookup_chunk(keys, now, out);
        }
    }

    fn lookup_chunk(&self, keys: &[Key], now: Option<Timestamp16>, out: &mut [Option<Value>]) {
        let n = keys.len();
        let mut hashed = [HashedKey::default(); MAX_BATCH];
        let mut candidates = [0u8; MAX_BATCH];
        let mut pending = [0u8; MAX_BATCH];
        let mut pending_len = 0;

        for (h, key) in hashed.iter_mut().zip(keys) {
            *h = self.hashed(key);
            self.prefetcher.prefetch(PrefetchTarget::PrimaryBucket, &self.lines[h.primary_index]);
        }

        match self.strategy {
            Strategy::Pessimistic => {
                for h in &hashed[..n] {
                    self.prefetcher.prefetch(PrefetchTarget::SecondaryBucket, &self.lines[h.secondary_index]);
                }
            }
            Strategy::Optimistic => {}
            Strategy::BloomGuided => {
                for h in &hashed[..n] {
                    if !h.is_degenerate() && self.header(h.primary_index).bloom_contains(h.bloom_mask()) {
                        self.prefetcher.prefetch(PrefetchTarget::SecondaryBucket, &self.lines[h.secondary_index]);
                    }
                }
            }
        }

        add(&self.counters.primary_bucket_reads, n as u64);
        for i in 0..n {
            let h = &hashed[i];
            candidates[i] = self.candidates(h.primary_index, h.tag, now);
            self.prefetch_entries(h.primary_index, candidates[i]);
        }

        for i in 0..n {
            let h = &hashed[i];
            out[i] = self
                .probe(h.primary_index, candidates[i], &keys[i])
                .map(|s| self.kv[h.primary_index * SLOTS + s].value);
            if out[i].is_none() && self.consult_secondary(h) {
                pending[pending_len] = i as u8;
                pending_len += 1;
            }
        }
        if pending_len == 0 {
            return;
        }

        add(&self.counters.secondary_bucket_reads, pending_len as u64);
        for &i in &pending[..pending_len] {
            let i = i as usize;
            let h = &hashed[i];
            candidates[i] = self.candidates(h.secondary_index, h.tag, now);
            self.prefetch_entries(h.secondary_index, candidates[i]);
        }
        for &i in &pending[..pending_len] {
            let i = i as usize;
            let b = hashed[i].secondary_index;
            out[i] = self.probe(b, candidates[i], &keys[i]).map(|s| self.kv[b * SLOTS + s].value);
            if out[i].is_some() && self.strategy == Strategy::BloomGuided {
                bump(&self.counters.bloom_true_positive);
            }
        }
    }

    #[inline]
    fn prefetch_entries(&self, b: usize, candidates: u8) {
        for s in slots(candidates) {
            self.prefetcher.prefetch(PrefetchTarget::Entry, &self.kv[b * SLOTS + s]);
        }
    }
}
