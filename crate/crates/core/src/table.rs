//! The bucketized cuckoo hash table.
//!
//! Buckets hold eight slots of metadata; keys and values live in a parallel
//! array at index `bucket * 8 + slot`. A key may sit in its primary or its
//! secondary bucket. Each primary bucket carries a 64-bit bloom filter of the
//! keys displaced from it, plus a counter of how many are currently
//! displaced; when that counter drops to zero the filter is cleared.
//!
//! A table is owned by a single thread. It may be sent to another thread but
//! is not `Sync`, and there is no internal locking.

use std::mem::size_of;

use serde::{Deserialize, Serialize};

use crate::bucket::{lowest, slots, Compact, Header, Layout, Timed, SLOTS};
use crate::counters::{bump, Counters, InstrumentationCounters};
use crate::error::{ConfigError, InsertError};
use crate::expiration::{Timestamp16, Timing};
use crate::hashing::{check_bucket_count, match_mask, spread_tags, DefaultKeyHasher, HashedKey, Key, KeyHasher, Value};
use crate::prefetch::{HardwarePrefetch, Prefetch};

/// Smallest supported capacity, in entries.
pub const MIN_CAPACITY: usize = 1024;
/// Longest cuckoo path searched by an insert, in moves.
pub const MAX_PATH_DEPTH: usize = 4;
/// Extra free slots a resident's alternate bucket needs, relative to the new
/// key's secondary, before a full primary makes room by relocating.
pub const RELOCATE_MARGIN: u32 = 3;

/// How lookups decide whether to touch the secondary bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Prefetch both buckets up front.
    Pessimistic,
    /// Prefetch only the primary bucket; read the secondary on a miss.
    Optimistic,
    /// Read the secondary bucket only when the primary's filter says it may
    /// hold the key.
    BloomGuided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Updated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(C)]
pub struct Entry {
    pub key: Key,
    pub value: Value,
}

const _: () = assert!(size_of::<Entry>() == 32);

/// A sequence of relocations that frees a slot in one of the start buckets.
///
/// `moves[i]` names an occupied slot whose entry moves to the bucket of
/// `moves[i + 1]` (or of `target` for the last move); applying the moves
/// back to front leaves `moves[0]` free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuckooPath {
    pub moves: Vec<(usize, usize)>,
    pub target: (usize, usize),
}

impl CuckooPath {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }
}

/// Structural statistics computed by a full scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub capacity: usize,
    pub num_buckets: usize,
    pub live_entries: usize,
    pub in_secondary: usize,
    pub load_factor: f64,
    pub ratio_in_secondary: f64,
    /// `moved_counter_histogram[v]` buckets have a moved counter equal to `v`.
    pub moved_counter_histogram: Vec<u64>,
    pub nonzero_filters: usize,
    pub counters: InstrumentationCounters,
}

impl TableStats {
    pub fn moved_zero_fraction(&self) -> f64 {
        self.moved_counter_histogram.first().copied().unwrap_or(0) as f64 / self.num_buckets as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub capacity: usize,
    /// Size of the unit read on the lookup path for one bucket.
    pub lookup_line_bytes: usize,
    /// All bucket metadata per bucket, including insert-only spill.
    pub bucket_bytes_per_bucket: usize,
    pub bucket_bytes: usize,
    pub kv_bytes: usize,
    pub bytes_per_entry: f64,
}

pub struct CuckooTable<L: Layout = Compact, H = DefaultKeyHasher, P = HardwarePrefetch> {
    pub(crate) lines: Vec<L::Line>,
    pub(crate) spill: Vec<L::Spill>,
    pub(crate) kv: Vec<Entry>,
    pub(crate) mask: usize,
    pub(crate) strategy: Strategy,
    pub(crate) hasher: H,
    pub(crate) prefetcher: P,
    pub(crate) counters: Counters,
    pub(crate) occupied: usize,
    pub(crate) last_scan: Option<Timestamp16>,
}

/// Table without timers.
pub type Table<H = DefaultKeyHasher, P = HardwarePrefetch> = CuckooTable<Compact, H, P>;
/// Table with per-entry 16-bit expiration timers.
pub type TimedTable<H = DefaultKeyHasher, P = HardwarePrefetch> = CuckooTable<Timed, H, P>;

pub(crate) fn check_capacity(capacity: usize) -> Result<usize, ConfigError> {
    if capacity < MIN_CAPACITY || !capacity.is_multiple_of(SLOTS) || !(capacity / SLOTS).is_power_of_two() {
        return Err(ConfigError::InvalidCapacity(capacity));
    }
    let buckets = capacity / SLOTS;
    check_bucket_count(buckets)?;
    Ok(buckets)
}

impl<L: Layout> CuckooTable<L> {
    pub fn new(capacity: usize, strategy: Strategy) -> Result<Self, ConfigError> {
        Self::with_parts(capacity, strategy, DefaultKeyHasher, HardwarePrefetch)
    }
}

impl<L: Layout, H: KeyHasher, P: Prefetch> CuckooTable<L, H, P> {
    pub fn with_parts(capacity: usize, strategy: Strategy, hasher: H, prefetcher: P) -> Result<Self, ConfigError> {
        let buckets = check_capacity(capacity)?;
        Ok(CuckooTable {
            lines: vec![L::Line::default(); buckets],
            spill: vec![L::Spill::default(); buckets],
            kv: vec![Entry::default(); capacity],
            mask: buckets - 1,
            strategy,
            hasher,
            prefetcher,
            counters: Counters::default(),
            occupied: 0,
            last_scan: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.kv.len()
    }

    pub fn num_buckets(&self) -> usize {
        self.lines.len()
    }

    pub fn timers_enabled(&self) -> bool {
        L::TIMERS
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn set_strategy(&mut self, strategy: Strategy) {
        self.strategy = strategy;
    }

    pub fn hasher(&self) -> &H {
        &self.hasher
    }

    pub fn prefetcher(&self) -> &P {
        &self.prefetcher
    }

    /// Occupied slots, including expired entries not yet reclaimed.
    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub fn load_factor(&self) -> f64 {
        self.occupied as f64 / self.capacity() as f64
    }

    pub fn counters(&self) -> InstrumentationCounters {
        self.counters.snapshot()
    }

    pub fn reset_counters(&self) {
        self.counters.reset();
    }

    pub fn hashed(&self, key: &Key) -> HashedKey {
        HashedKey::from_raw(self.hasher.hash_key(key), self.mask)
    }

    /// Lookup-path metadata of bucket `b`.
    pub fn header(&self, b: usize) -> &Header {
        L::header(&self.lines[b])
    }

    pub(crate) fn header_mut(&mut self, b: usize) -> &mut Header {
        L::header_mut(&mut self.lines[b])
    }

    pub(crate) fn alt(&self, b: usize, s: usize) -> usize {
        L::alt(&self.lines[b], &self.spill[b], s) as usize
    }

    pub(crate) fn entry(&self, b: usize, s: usize) -> &Entry {
        &self.kv[b * SLOTS + s]
    }

    #[inline]
    pub(crate) fn live_mask(&self, b: usize, now: Option<Timestamp16>) -> u8 {
        L::live_mask(&self.lines[b], now)
    }

    #[inline]
    fn free_slot(&self, b: usize, now: Option<Timestamp16>) -> Option<usize> {
        lowest(!self.live_mask(b, now))
    }

    /// Tag-filtered full-key search in bucket `b`, counting key reads.
    #[inline]
    pub(crate) fn probe(&self, b: usize, candidates: u8, key: &Key) -> Option<usize> {
        for s in slots(candidates) {
            bump(&self.counters.kv_reads);
            if self.kv[b * SLOTS + s].key == *key {
                return Some(s);
            }
        }
        None
    }

    #[inline]
    pub(crate) fn candidates(&self, b: usize, tag: u16, now: Option<Timestamp16>) -> u8 {
        let line = &self.lines[b];
        match_mask(&L::header(line).tags, &spread_tags(tag)) & L::live_mask(line, now)
    }

    /// Whether a lookup that missed in the primary bucket goes on to read the
    /// secondary one. Counts filter positives under [`Strategy::BloomGuided`].
    #[inline]
    pub(crate) fn consult_secondary(&self, h: &HashedKey) -> bool {
        if h.is_degenerate() {
            return false;
        }
        match self.strategy {
            Strategy::BloomGuided => {
                let hit = self.header(h.primary_index).bloom_contains(h.bloom_mask());
                if hit {
                    bump(&self.counters.bloom_positive);
                }
                hit
            }
            Strategy::Pessimistic | Strategy::Optimistic => true,
        }
    }

    /// Looks up `key`. `now` is ignored when timers are disabled; on a timed
    /// table, `None` treats every occupied slot as live.
    pub fn lookup(&self, key: &Key, now: Option<Timestamp16>) -> Option<Value> {
        let h = self.hashed(key);
        let p = h.primary_index;
        if self.strategy == Strategy::Pessimistic {
            self.prefetcher.prefetch(crate::prefetch::PrefetchTarget::SecondaryBucket, &self.lines[h.secondary_index]);
        }
        bump(&self.counters.primary_bucket_reads);
        if let Some(s) = self.probe(p, self.candidates(p, h.tag, now), key) {
            return Some(self.kv[p * SLOTS + s].value);
        }
        if !self.consult_secondary(&h) {
            return None;
        }
        let b = h.secondary_index;
        bump(&self.counters.secondary_bucket_reads);
        let found = self.probe(b, self.candidates(b, h.tag, now), key);
        if found.is_some() && self.strategy == Strategy::BloomGuided {
            bump(&self.counters.bloom_true_positive);
        }
        found.map(|s| self.kv[b * SLOTS + s].value)
    }

    pub fn contains(&self, key: &Key, now: Option<Timestamp16>) -> bool {
        self.locate(key, &self.hashed(key), now).is_some()
    }

    /// Finds a live copy of `key` without touching counters. The secondary
    /// bucket is skipped when the filter rules it out, which is always sound.
    pub(crate) fn locate(&self, key: &Key, h: &HashedKey, now: Option<Timestamp16>) -> Option<(usize, usize)> {
        let find = |b: usize| {
            slots(self.candidates(b, h.tag, now)).find(|&s| self.kv[b * SLOTS + s].key == *key).map(|s| (b, s))
        };
        find(h.primary_index).or_else(|| {
            let may_be_moved = self.header(h.primary_index).bloom_contains(h.bloom_mask());
            (!h.is_degenerate() && may_be_moved).then(|| find(h.secondary_index)).flatten()
        })
    }

    fn check_timing(timing: Option<Timing>) -> Result<Option<Timestamp16>, InsertError> {
        match (L::TIMERS, timing) {
            (true, None) => Err(InsertError::MissingTiming),
            (false, Some(_)) => Err(InsertError::UnexpectedTiming),
            (_, Some(t)) if !t.in_range() => Err(InsertError::ExpirationOutOfRange { now: t.now, expires: t.expires }),
            (_, t) => Ok(t.map(|t| t.now)),
        }
    }

    /// Inserts or updates `key`.
    ///
    /// Timed tables require a [`Timing`] whose expiration lies within
    /// `(now, now + 1024]`; untimed tables require `None`. Expired slots are
    /// reused as if free. On [`InsertError::TableFull`] the table is left
    /// logically unchanged.
    pub fn insert(&mut self, key: Key, value: Value, timing: Option<Timing>) -> Result<InsertOutcome, InsertError> {
        let now = Self::check_timing(timing)?;
        let expires = timing.map(|t| t.expires).unwrap_or_default();
        let h = self.hashed(&key);

        if let Some((b, s)) = self.locate(&key, &h, now) {
            self.kv[b * SLOTS + s].value = value;
            L::set_timer(&mut self.lines[b], s, expires);
            return Ok(InsertOutcome::Updated);
        }

        let p = h.primary_index;
        let sec = h.secondary_index;
        let slot = if let Some(s) = self.free_slot(p, now) {
            Some((p, s))
        } else if let Some(s) = self.make_room_in_primary(p, sec, now) {
            Some((p, s))
        } else if !h.is_degenerate() {
            self.free_slot(sec, now).map(|s| (sec, s))
        } else {
            None
        };
        let (b, s) = match slot {
            Some(found) => found,
            None => match self.cuckoo_path_search([p, sec], now) {
                Some(path) => self.apply_path(&path),
                None => {
                    bump(&self.counters.insert_failures);
                    return Err(InsertError::TableFull);
                }
            },
        };
        self.place(b, s, &h, Entry { key, value }, expires);
        if b == p {
            bump(&self.counters.inserts_primary);
        } else {
            bump(&self.counters.inserts_secondary);
        }
        Ok(InsertOutcome::Inserted)
    }

    /// With `p` full, relocates one of its residents to its alternate bucket
    /// instead of sending the new key to `sec`: always when a displaced
    /// resident can go home, otherwise when the resident's alternate has more
    /// than [`RELOCATE_MARGIN`] free slots beyond those of `sec`.
    fn make_room_in_primary(&mut self, p: usize, sec: usize, now: Option<Timestamp16>) -> Option<usize> {
        let free_in = |t: &Self, b: usize| SLOTS as u32 - t.live_mask(b, now).count_ones();
        let mut best: Option<(u32, usize, usize)> = None;
        let sec_free = if sec == p { 0 } else { free_in(self, sec) };
        let header = self.header(p);
        for s in slots(self.live_mask(p, now)) {
            let a = self.alt(p, s);
            if a == p {
                continue;
            }
            let f = free_in(self, a);
            if f == 0 {
                continue;
            }
            let homecoming = header.in_secondary & (1 << s) != 0;
            let score = if homecoming { u32::MAX } else { f };
            if best.is_none_or(|(bs, _, _)| score > bs) {
                best = Some((score, s, a));
            }
        }
        let (score, s, a) = best?;
        if score <= sec_free + RELOCATE_MARGIN && score != u32::MAX {
            return None;
        }
        let to = self.free_slot(a, now)?;
        self.relocate((p, s), (a, to));
        Some(s)
    }

    /// Writes a new entry into slot `s` of bucket `b`, reclaiming an expired
    /// occupant first.
    fn place(&mut self, b: usize, s: usize, h: &HashedKey, entry: Entry, expires: Timestamp16) {
        if self.header(b).busy & (1 << s) != 0 {
            self.evict(b, s);
        }
        let in_secondary = b != h.primary_index;
        let other = if in_secondary { h.primary_index } else { h.secondary_index };
        let line = &mut self.lines[b];
        L::header_mut(line).set_slot(s, h.tag, in_secondary);
        L::set_alt(line, &mut self.spill[b], s, other as u32);
        L::set_timer(line, s, expires);
        self.kv[b * SLOTS + s] = entry;
        if in_secondary {
            self.header_mut(h.primary_index).add_moved(h.bloom_mask());
        }
        self.occupied += 1;
    }

    /// Frees an occupied slot with the displaced-entry bookkeeping.
    pub(crate) fn evict(&mut self, b: usize, s: usize) {
        let header = self.header(b);
        debug_assert!(header.busy & (1 << s) != 0);
        if header.in_secondary & (1 << s) != 0 {
            let primary = self.alt(b, s);
            self.header_mut(primary).remove_moved();
        }
        self.header_mut(b).clear_slot(s);
        self.occupied -= 1;
    }

    /// Removes `key` if it is live; returns whether it was.
    pub fn delete(&mut self, key: &Key, now: Option<Timestamp16>) -> bool {
        let h = self.hashed(key);
        match self.locate(key, &h, now) {
            Some((b, s)) => {
                self.evict(b, s);
                true
            }
            None => false,
        }
    }

    /// Breadth-first search, from the given start buckets, for the shortest
    /// chain of at most [`MAX_PATH_DEPTH`] relocations ending in a bucket
    /// with a free or expired slot. Ties go to the lowest slot index.
    pub fn cuckoo_path_search(&mut self, starts: [usize; 2], now: Option<Timestamp16>) -> Option<CuckooPath> {
        #[derive(Clone, Copy)]
        struct Node {
            bucket: usize,
            parent: usize,
            slot: usize,
            depth: usize,
        }
        const ROOT: usize = usize::MAX;

        let mut nodes: Vec<Node> = Vec::with_capacity(2 * SLOTS * 2);
        let mut found = None;
        for &b in starts.iter() {
            if self.header(b).scratch == 0 {
                self.header_mut(b).scratch = 1;
                nodes.push(Node { bucket: b, parent: ROOT, slot: 0, depth: 0 });
            }
        }
        let mut head = 0;
        'search: while head < nodes.len() {
            let node = nodes[head];
            head += 1;
            if node.depth >= MAX_PATH_DEPTH {
                continue;
            }
            for s in slots(self.live_mask(node.bucket, now)) {
                let a = self.alt(node.bucket, s);
                if a == node.bucket || self.header(a).scratch != 0 {
                    continue;
                }
                self.header_mut(a).scratch = 1;
                nodes.push(Node { bucket: a, parent: head - 1, slot: s, depth: node.depth + 1 });
                if let Some(free) = self.free_slot(a, now) {
                    found = Some((nodes.len() - 1, free));
                    break 'search;
                }
            }
        }
        for n in &nodes {
            self.header_mut(n.bucket).scratch = 0;
        }

        let (mut at, free) = found?;
        let target = (nodes[at].bucket, free);
        let mut moves = Vec::with_capacity(nodes[at].depth);
        while nodes[at].parent != ROOT {
            let n = nodes[at];
            moves.push((nodes[n.parent].bucket, n.slot));
            at = n.parent;
        }
        moves.reverse();
        Some(CuckooPath { moves, target })
    }

    /// Applies `path` back to front and returns the slot it freed.
    pub fn apply_path(&mut self, path: &CuckooPath) -> (usize, usize) {
        let mut dst = path.target;
        for &src in path.moves.iter().rev() {
            self.relocate(src, dst);
            dst = src;
        }
        dst
    }

    /// Moves the entry at `from` into `to`, which must be in the entry's
    /// other bucket.
    fn relocate(&mut self, (fb, fs): (usize, usize), (tb, ts): (usize, usize)) {
        if self.header(tb).busy & (1 << ts) != 0 {
            self.evict(tb, ts);
        }
        let entry = self.kv[fb * SLOTS + fs];
        let h = self.hashed(&entry.key);
        debug_assert_eq!(self.alt(fb, fs), tb);
        let was_secondary = self.header(fb).in_secondary & (1 << fs) != 0;
        let now_secondary = tb != h.primary_index;
        let timer = L::timer(&self.lines[fb], fs);

        let line = &mut self.lines[tb];
        L::header_mut(line).set_slot(ts, h.tag, now_secondary);
        L::set_alt(line, &mut self.spill[tb], ts, fb as u32);
        L::set_timer(line, ts, timer);
        self.kv[tb * SLOTS + ts] = entry;
        self.header_mut(fb).clear_slot(fs);

        match (was_secondary, now_secondary) {
            (false, true) => self.header_mut(fb).add_moved(h.bloom_mask()),
            (true, false) => self.header_mut(tb).remove_moved(),
            _ => {}
        }
        bump(&self.counters.cuckoo_moves);
    }

    /// Frees every occupied slot that has expired at `now`, with the same
    /// bookkeeping as [`delete`](Self::delete). Returns the number freed.
    ///
    /// Timed tables must be scanned at least every 64512 time units or
    /// expired entries can wrap back into validity.
    pub fn scan_expire(&mut self, now: Timestamp16) -> usize {
        if let Some(last) = self.last_scan {
            let gap = now.wrapping_since(last) as u32;
            if cfg!(debug_assertions) && gap > crate::expiration::SCAN_PERIOD {
                log::warn!(
                    "expiration scan gap of {gap} units exceeds the {} unit period",
                    crate::expiration::SCAN_PERIOD
                );
            }
        }
        self.last_scan = Some(now);
        let mut freed = 0;
        for b in 0..self.lines.len() {
            let expired = self.header(b).busy & !self.live_mask(b, Some(now));
            for s in slots(expired) {
                self.evict(b, s);
                freed += 1;
            }
        }
        freed
    }

    /// Full-scan statistics. With `now`, expired entries are not counted as
    /// live.
    pub fn stats(&self, now: Option<Timestamp16>) -> TableStats {
        let mut live = 0;
        let mut in_secondary = 0;
        let mut histogram: Vec<u64> = vec![0];
        let mut nonzero_filters = 0;
        for b in 0..self.lines.len() {
            for s in slots(self.live_mask(b, now)) {
                live += 1;
                if self.hashed(&self.kv[b * SLOTS + s].key).primary_index != b {
                    in_secondary += 1;
                }
            }
            let header = self.header(b);
            let m = header.moved as usize;
            if histogram.len() <= m {
                histogram.resize(m + 1, 0);
            }
            histogram[m] += 1;
            nonzero_filters += (header.bloom != 0) as usize;
        }
        TableStats {
            capacity: self.capacity(),
            num_buckets: self.num_buckets(),
            live_entries: live,
            in_secondary,
            load_factor: live as f64 / self.capacity() as f64,
            ratio_in_secondary: if live == 0 { 0.0 } else { in_secondary as f64 / live as f64 },
            moved_counter_histogram: histogram,
            nonzero_filters,
            counters: self.counters(),
        }
    }

    pub fn memory_report(&self) -> MemoryReport {
        let per_bucket = size_of::<L::Line>() + size_of::<L::Spill>();
        let bucket_bytes = self.lines.len() * size_of::<L::Line>() + self.spill.len() * size_of::<L::Spill>();
        let kv_bytes = self.kv.len() * size_of::<Entry>();
        MemoryReport {
            capacity: self.capacity(),
            lookup_line_bytes: size_of::<L::Line>(),
            bucket_bytes_per_bucket: per_bucket,
            bucket_bytes,
            kv_bytes,
            bytes_per_entry: (bucket_bytes + kv_bytes) as f64 / self.capacity() as f64,
        }
    }

    /// Live `(key, value)` pairs, in bucket order.
    pub fn iter(&self, now: Option<Timestamp16>) -> impl Iterator<Item = (Key, Value)> + '_ {
        (0..self.lines.len()).flat_map(move |b| {
            slots(self.live_mask(b, now)).map(move |s| {
                let e = &self.kv[b * SLOTS + s];
                (e.key, e.value)
            })
        })
    }
}

impl<L: Layout, H, P> std::fmt::Debug for CuckooTable<L, H, P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CuckooTable")
            .field("capacity", &self.kv.len())
            .field("occupied", &self.occupied)
            .field("strategy", &self.strategy)
            .field("timers", &L::TIMERS)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::LeadingBytesHasher;
    use crate::oracle::full_scan_check;
    use crate::prefetch::NoPrefetch;

    const N: usize = 128; // buckets in the toy tables below
    const MASK: u64 = N as u64 - 1;

    type Toy = Table<LeadingBytesHasher, NoPrefetch>;

    fn toy(strategy: Strategy) -> Toy {
        Table::with_parts(N * SLOTS, strategy, LeadingBytesHasher, NoPrefetch).unwrap()
    }

    /// Key whose hash puts it in buckets `p` / `s` with the given tag and a
    /// distinguishing `id` in the bits above the secondary index.
    fn key(p: u64, s: u64, id: u64) -> Key {
        let raw = (p & MASK)
            | ((id & 0xFF_FFFF) << 8)
            | ((s & MASK) << 32)
            | ((id.wrapping_mul(0x9E37_79B9) & 0x1FF) << 39)
            | ((id & 0xFFFF) << 48);
        Key::from_words(raw, id)
    }

    fn val(v: u64) -> Value {
        Value::from_words(v, !v)
    }

    #[test]
    fn capacity_validation() {
        assert!(Table::<DefaultKeyHasher>::new(1 << 20, Strategy::BloomGuided).is_ok());
        for bad in [0, 8, 512, 1000, 1024 + 8, 3 * 1024] {
            assert_eq!(
                Table::<DefaultKeyHasher>::new(bad, Strategy::BloomGuided).unwrap_err(),
                ConfigError::InvalidCapacity(bad)
            );
        }
        let t = Table::<DefaultKeyHasher>::new(1 << 20, Strategy::BloomGuided).unwrap();
        assert_eq!(t.num_buckets(), 1 << 17);
        assert!((0..t.num_buckets()).all(|b| *t.header(b) == Header::default()));
        assert_eq!(t.counters(), InstrumentationCounters::default());
    }

    #[test]
    fn fresh_table_miss_reads_only_primary() {
        let t = Table::<DefaultKeyHasher>::new(1 << 20, Strategy::BloomGuided).unwrap();
        assert_eq!(t.lookup(&Key::from(42u128), None), None);
        let c = t.counters();
        assert_eq!((c.primary_bucket_reads, c.secondary_bucket_reads), (1, 0));
    }

    #[test]
    fn insert_lookup_update_delete() {
        let mut t = toy(Strategy::BloomGuided);
        let k = key(3, 9, 1);
        assert_eq!(t.insert(k, val(1), None), Ok(InsertOutcome::Inserted));
        assert_eq!(t.lookup(&k, None), Some(val(1)));
        assert_eq!(t.insert(k, val(2), None), Ok(InsertOutcome::Updated));
        assert_eq!(t.lookup(&k, None), Some(val(2)));
        assert_eq!(t.len(), 1);
        let c = t.counters();
        assert_eq!((c.inserts_primary, c.inserts_secondary, c.secondary_bucket_reads), (1, 0, 0));
        assert_eq!(t.header(3).bloom, 0);
        assert!(t.delete(&k, None));
        assert_eq!(t.header(3).moved, 0);
        assert_eq!(t.header(3).bloom, 0);
        assert!(!t.delete(&k, None));
        assert_eq!(t.lookup(&k, None), None);
        assert!(t.is_empty());
    }

    #[test]
    fn timing_contract() {
        let mut t = toy(Strategy::BloomGuided);
        let now = Timestamp16(5);
        assert_eq!(t.insert(key(1, 2, 1), val(0), Some(Timing::after(now, 10))), Err(InsertError::UnexpectedTiming));
        let mut timed = TimedTable::<LeadingBytesHasher, NoPrefetch>::with_parts(
            1024,
            Strategy::BloomGuided,
            LeadingBytesHasher,
            NoPrefetch,
        )
        .unwrap();
        assert_eq!(timed.insert(key(1, 2, 1), val(0), None), Err(InsertError::MissingTiming));
        assert_eq!(
            timed.insert(key(1, 2, 1), val(0), Some(Timing::after(now, 1025))),
            Err(InsertError::ExpirationOutOfRange { now, expires: Timestamp16(1030) })
        );
        assert_eq!(
            timed.insert(key(1, 2, 1), val(0), Some(Timing::after(now, 0))),
            Err(InsertError::ExpirationOutOfRange { now, expires: now })
        );
        assert!(timed.is_empty());
    }

    #[test]
    fn overflow_to_secondary_sets_filter_and_delete_resets_it() {
        let mut t = toy(Strategy::BloomGuided);
        for id in 0..8 {
            t.insert(key(5, 20 + id, id + 1), val(id), None).unwrap();
        }
        assert_eq!(t.header(5).busy, 0xFF);
        let moved = key(5, 60, 99);
        t.insert(moved, val(99), None).unwrap();
        let h = t.hashed(&moved);
        assert_eq!(t.header(60).busy.count_ones(), 1);
        assert_eq!(t.header(5).moved, 1);
        assert!(t.header(5).bloom_contains(h.bloom_mask()));
        assert_eq!(t.counters().inserts_secondary, 1);
        assert_eq!(t.lookup(&moved, None), Some(val(99)));
        assert!(full_scan_check(&t).is_empty());

        assert!(t.delete(&moved, None));
        assert_eq!(t.header(5).moved, 0);
        assert_eq!(t.header(5).bloom, 0);
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn full_primary_relocates_toward_emptier_bucket() {
        let mut t = toy(Strategy::BloomGuided);
        // Secondary 60 keeps 4 free slots; resident alternates are empty.
        for id in 0..4 {
            t.insert(key(60, 61, 200 + id), val(id), None).unwrap();
        }
        for id in 0..8 {
            t.insert(key(5, 20 + id, id + 1), val(id), None).unwrap();
        }
        let k = key(5, 60, 99);
        t.insert(k, val(99), None).unwrap();
        assert_eq!(t.locate(&k, &t.hashed(&k), None).map(|p| p.0), Some(5));
        assert_eq!(t.header(20).busy.count_ones(), 1);
        assert_eq!(t.header(60).busy.count_ones(), 4);
        assert_eq!(t.counters().cuckoo_moves, 1);
        assert_eq!(t.header(5).moved, 1);
        assert!(full_scan_check(&t).is_empty());

        // With the secondary emptier than the margin allows, the key overflows.
        let mut t = toy(Strategy::BloomGuided);
        for id in 0..3 {
            t.insert(key(60, 61, 200 + id), val(id), None).unwrap();
        }
        for id in 0..8 {
            t.insert(key(5, 20 + id, id + 1), val(id), None).unwrap();
        }
        t.insert(k, val(99), None).unwrap();
        assert_eq!(t.header(60).busy.count_ones(), 4);
        assert_eq!(t.counters().cuckoo_moves, 0);
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn degenerate_key_never_counts_as_moved() {
        let mut t = toy(Strategy::BloomGuided);
        for id in 0..8 {
            assert!(t.insert(key(7, 7, id + 1), val(id), None).is_ok());
        }
        assert_eq!(t.header(7).in_secondary, 0);
        assert_eq!(t.header(7).moved, 0);
        // Both buckets are the same full bucket; every occupant's alternate
        // is itself, so no path exists.
        assert_eq!(t.insert(key(7, 7, 42), val(0), None), Err(InsertError::TableFull));
        assert_eq!(t.counters().insert_failures, 1);
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn cuckoo_move_of_one_entry() {
        let mut t = toy(Strategy::BloomGuided);
        // Fill bucket 10 with primaries whose alternates are 11..18, then
        // bucket 20 with primaries whose alternates are 21..28.
        for id in 0..8 {
            t.insert(key(10, 11 + id, id + 1), val(id), None).unwrap();
            t.insert(key(20, 21 + id, id + 100), val(id), None).unwrap();
        }
        let k = key(10, 20, 500);
        let path = t.cuckoo_path_search([10, 20], None).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.moves[0], (10, 0));
        assert_eq!(path.target.0, 11);
        assert!((0..N).all(|b| t.header(b).scratch == 0));

        t.insert(k, val(500), None).unwrap();
        let c = t.counters();
        assert_eq!(c.cuckoo_moves, 1);
        assert_eq!(c.inserts_primary, 17);
        // The displaced entry now lives in its secondary bucket 11.
        let displaced = key(10, 11, 1);
        let h = t.hashed(&displaced);
        assert_eq!(t.header(10).moved, 1);
        assert!(t.header(10).bloom_contains(h.bloom_mask()));
        assert_eq!(t.lookup(&displaced, None), Some(val(0)));
        assert_eq!(t.lookup(&k, None), Some(val(500)));
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn move_back_to_primary_decrements_counter() {
        let mut t = toy(Strategy::BloomGuided);
        // x has primary 30, secondary 31; fill 30 so x lands in 31.
        for id in 0..8 {
            t.insert(key(30, 40 + id, id + 1), val(id), None).unwrap();
        }
        let x = key(30, 31, 77);
        t.insert(x, val(77), None).unwrap();
        assert_eq!(t.header(30).moved, 1);
        // Free a slot in 30, then fill bucket 31 and a key whose buckets are
        // 31 and 50 (full) so the only path moves x back to 30.
        assert!(t.delete(&key(30, 40, 1), None));
        for id in 0..7 {
            t.insert(key(31, 60 + id, id + 200), val(id), None).unwrap();
        }
        for id in 0..8 {
            t.insert(key(50, 70 + id, id + 300), val(id), None).unwrap();
        }
        // Bucket 31: x (secondary) at slot 0, then 7 primaries with alts 60..66.
        assert_eq!(t.header(31).busy, 0xFF);
        let y = key(31, 50, 999);
        t.insert(y, val(999), None).unwrap();
        assert_eq!(t.counters().cuckoo_moves, 1);
        assert_eq!(t.header(30).moved, 0);
        assert_eq!(t.header(30).bloom, 0);
        assert_eq!(t.lookup(&x, None), Some(val(77)));
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn no_path_on_saturated_pair() {
        // Two buckets whose occupants all alternate between each other.
        let mut t = toy(Strategy::BloomGuided);
        for id in 0..8 {
            t.insert(key(1, 2, id + 1), val(id), None).unwrap();
            t.insert(key(2, 1, id + 100), val(id), None).unwrap();
        }
        // Exhaustive: no occupant of either bucket has an alternate outside
        // the pair, so no single move (or chain) can free space.
        for b in [1, 2] {
            for s in 0..SLOTS {
                assert!([1, 2].contains(&t.alt(b, s)));
            }
        }
        assert!(t.cuckoo_path_search([1, 2], None).is_none());
        let before: Vec<_> = t.iter(None).collect();
        assert_eq!(t.insert(key(1, 2, 5000), val(0), None), Err(InsertError::TableFull));
        assert_eq!(t.iter(None).collect::<Vec<_>>(), before);
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn stats_and_memory() {
        let t = Table::<DefaultKeyHasher>::new(1 << 20, Strategy::BloomGuided).unwrap();
        let st = t.stats(None);
        assert_eq!(st.ratio_in_secondary, 0.0);
        assert_eq!(st.moved_counter_histogram, vec![1 << 17]);
        let m = t.memory_report();
        assert_eq!(m.lookup_line_bytes, 64);
        assert_eq!(m.bucket_bytes_per_bucket, 64);
        assert_eq!(m.kv_bytes, 32 << 20);
        assert_eq!(m.bytes_per_entry, 40.0);

        let timed = TimedTable::<DefaultKeyHasher>::new(1 << 16, Strategy::BloomGuided).unwrap();
        let m = timed.memory_report();
        assert_eq!(m.lookup_line_bytes, 64);
        assert_eq!(m.bucket_bytes_per_bucket, 128);
        assert_eq!(m.bytes_per_entry, 48.0);
    }
}
