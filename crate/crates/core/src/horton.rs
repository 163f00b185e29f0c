//! Horton-style baseline: the same bucket and key/value layout, with a remap
//! array in place of the bloom filter and moved counter.
//!
//! Each bucket's remap array has 21 three-bit entries. A key's remap tag
//! selects one entry; zero means no key with that remap tag was displaced
//! from this bucket, otherwise the entry names which of seven secondary
//! hash functions locates the displaced keys. Lookups therefore read at most
//! one extra bucket, and none when the entry is zero.
//!
//! Only insert and lookup are supported; remap entries cannot be cleared
//! safely without per-entry reference counts.

use std::mem::size_of;

use crate::bucket::{lowest, slots, SLOTS};
use crate::counters::{add, bump, Counters, InstrumentationCounters};
use crate::error::{ConfigError, InsertError, UnsupportedOperation};
use crate::hashing::{check_bucket_count, match_mask, spread_tags, DefaultKeyHasher, Key, KeyHasher, Value};
use crate::prefetch::{HardwarePrefetch, Prefetch, PrefetchTarget};
use crate::table::{check_capacity, Entry, InsertOutcome, MemoryReport};

pub const REMAP_ENTRIES: usize = 21;
pub const REMAP_BITS: usize = 3;
/// Secondary hash functions addressable by a nonzero remap entry.
pub const CANDIDATES: usize = (1 << REMAP_BITS) - 1;

/// 21 packed 3-bit entries (63 bits).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(transparent)]
pub struct RemapArray(pub u64);

impl RemapArray {
    #[inline]
    pub fn get(&self, index: usize) -> u8 {
        debug_assert!(index < REMAP_ENTRIES);
        ((self.0 >> (index * REMAP_BITS)) & 0b111) as u8
    }

    #[inline]
    pub fn set(&mut self, index: usize, function: u8) {
        debug_assert!(index < REMAP_ENTRIES && (function as usize) <= CANDIDATES);
        let shift = index * REMAP_BITS;
        self.0 = (self.0 & !(0b111 << shift)) | ((function as u64) << shift);
    }

    pub fn used(&self) -> usize {
        (0..REMAP_ENTRIES).filter(|&i| self.get(i) != 0).count()
    }
}

/// Per-key indices for the Horton table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HortonHashed {
    pub raw: u64,
    pub primary_index: usize,
    pub tag: u16,
    pub rtag: usize,
    /// `candidates[k]` is the bucket chosen by secondary function `k + 1`.
    pub candidates: [usize; CANDIDATES],
}

// Odd multipliers, one per secondary function.
const MIXERS: [u64; CANDIDATES] = [
    0x9E37_79B9_7F4A_7C15,
    0xC2B2_AE3D_27D4_EB4F,
    0x1656_67B1_9E37_79F9,
    0xD6E8_FEB8_6659_FD93,
    0xFF51_AFD7_ED55_8CCD,
    0xC4CE_B9FE_1A85_EC53,
    0x8CB9_2BA7_2F3D_8DD7,
];

#[inline]
fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    k ^= k >> 33;
    k = k.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
    k ^ (k >> 33)
}

impl HortonHashed {
    #[inline]
    pub fn from_raw(raw: u64, mask: usize) -> Self {
        let secondary = (raw >> 32) as u32;
        let mut candidates = [0usize; CANDIDATES];
        for (c, m) in candidates.iter_mut().zip(MIXERS) {
            *c = (fmix64(raw.wrapping_mul(m)) as usize) & mask;
        }
        HortonHashed {
            raw,
            primary_index: (raw as usize) & mask,
            tag: (raw >> 48) as u16,
            rtag: secondary as usize % REMAP_ENTRIES,
            candidates,
        }
    }

    /// Bucket named by remap entry value `function` (1-based).
    #[inline]
    pub fn candidate(&self, function: u8) -> usize {
        self.candidates[function as usize - 1]
    }
}

pub fn horton_derive<H: KeyHasher + ?Sized>(
    key: &Key,
    num_buckets: usize,
    hasher: &H,
) -> Result<HortonHashed, ConfigError> {
    let mask = check_bucket_count(num_buckets)?;
    Ok(HortonHashed::from_raw(hasher.hash_key(key), mask))
}

#[derive(Debug, Clone, Copy, Default)]
#[repr(C, align(64))]
pub struct HortonLine {
    pub tags: [u16; SLOTS],
    pub remap: RemapArray,
    pub busy: u8,
    /// Slots holding an entry remapped here from another bucket.
    pub remapped: u8,
}

const _: () = assert!(size_of::<HortonLine>() == 64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HortonStats {
    pub live_entries: usize,
    pub in_secondary: usize,
    pub ratio_in_secondary: f64,
    /// Mean fraction of nonzero remap entries per bucket.
    pub remap_occupancy: f64,
}

pub struct HortonTable<H = DefaultKeyHasher, P = HardwarePrefetch> {
    lines: Vec<HortonLine>,
    kv: Vec<Entry>,
    mask: usize,
    hasher: H,
    prefetcher: P,
    counters: Counters,
    occupied: usize,
}

impl HortonTable {
    pub fn new(capacity: usize) -> Result<Self, ConfigError> {
        Self::with_parts(capacity, DefaultKeyHasher, HardwarePrefetch)
    }
}

impl<H: KeyHasher, P: Prefetch> HortonTable<H, P> {
    pub fn with_parts(capacity: usize, hasher: H, prefetcher: P) -> Result<Self, ConfigError> {
        let buckets = check_capacity(capacity)?;
        Ok(HortonTable {
            lines: vec![HortonLine::default(); buckets],
            kv: vec![Entry::default(); capacity],
            mask: buckets - 1,
            hasher,
            prefetcher,
            counters: Counters::default(),
            occupied: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.kv.len()
    }

    pub fn num_buckets(&self) -> usize {
        self.lines.len()
    }

    pub fn len(&self) -> usize {
        self.occupied
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    pub fn line(&self, b: usize) -> &HortonLine {
        &self.lines[b]
    }

    pub fn prefetcher(&self) -> &P {
        &self.prefetcher
    }

    /// Remap hits are reported through the `bloom_*` counters.
    pub fn counters(&self) -> InstrumentationCounters {
        self.counters.snapshot()
    }

    pub fn reset_counters(&self) {
        self.counters.reset();
    }

    pub fn hashed(&self, key: &Key) -> HortonHashed {
        HortonHashed::from_raw(self.hasher.hash_key(key), self.mask)
    }

    #[inline]
    fn candidates_in(&self, b: usize, tag: u16) -> u8 {
        let line = &self.lines[b];
        match_mask(&line.tags, &spread_tags(tag)) & line.busy
    }

    fn find(&self, b: usize, tag: u16, key: &Key) -> Option<usize> {
        slots(self.candidates_in(b, tag)).find(|&s| self.kv[b * SLOTS + s].key == *key)
    }

    fn locate(&self, key: &Key, h: &HortonHashed) -> Option<(usize, usize)> {
        let p = h.primary_index;
        if let Some(s) = self.find(p, h.tag, key) {
            return Some((p, s));
        }
        match self.lines[p].remap.get(h.rtag) {
            0 => None,
            f => {
                let c = h.candidate(f);
                self.find(c, h.tag, key).map(|s| (c, s))
            }
        }
    }

    fn free_slot(&self, b: usize) -> Option<usize> {
        lowest(!self.lines[b].busy)
    }

    /// Least-loaded candidate with a free slot; ties go to the lowest
    /// function index. Returns the 1-based function index.
    fn least_loaded(&self, h: &HortonHashed) -> Option<u8> {
        (1..=CANDIDATES as u8)
            .filter(|&f| self.lines[h.candidate(f)].busy != 0xFF)
            .min_by_key(|&f| self.lines[h.candidate(f)].busy.count_ones())
    }

    fn write(&mut self, b: usize, s: usize, tag: u16, remapped: bool, entry: Entry) {
        let line = &mut self.lines[b];
        let bit = 1u8 << s;
        line.tags[s] = tag;
        line.busy |= bit;
        if remapped {
            line.remapped |= bit;
        } else {
            line.remapped &= !bit;
        }
        self.kv[b * SLOTS + s] = entry;
    }

    /// Where a key displaced from its primary bucket must go: the recorded
    /// candidate if its remap entry is set, else the least-loaded one.
    fn remap_target(&self, h: &HortonHashed) -> Option<(u8, usize)> {
        let f = match self.lines[h.primary_index].remap.get(h.rtag) {
            0 => self.least_loaded(h)?,
            f => f,
        };
        let b = h.candidate(f);
        self.free_slot(b).map(|s| (f, b * SLOTS + s))
    }

    fn place_remapped(&mut self, h: &HortonHashed, function: u8, flat: usize, entry: Entry) {
        self.lines[h.primary_index].remap.set(h.rtag, function);
        self.write(flat / SLOTS, flat % SLOTS, h.tag, true, entry);
    }

    pub fn insert(&mut self, key: Key, value: Value) -> Result<InsertOutcome, InsertError> {
        let h = self.hashed(&key);
        if let Some((b, s)) = self.locate(&key, &h) {
            self.kv[b * SLOTS + s].value = value;
            return Ok(InsertOutcome::Updated);
        }
        let p = h.primary_index;
        let entry = Entry { key, value };
        if let Some(s) = self.free_slot(p) {
            self.write(p, s, h.tag, false, entry);
            bump(&self.counters.inserts_primary);
        } else if let Some((f, flat)) = self.remap_target(&h) {
            self.place_remapped(&h, f, flat, entry);
            bump(&self.counters.inserts_secondary);
        } else {
            // Single-level eviction: push one primary-resident entry of the
            // full primary bucket to its own remap target.
            let victim = slots(!self.lines[p].remapped).find_map(|s| {
                let hv = self.hashed(&self.kv[p * SLOTS + s].key);
                self.remap_target(&hv).map(|t| (s, hv, t))
            });
            let Some((s, hv, (f, flat))) = victim else {
                bump(&self.counters.insert_failures);
                return Err(InsertError::TableFull);
            };
            let moved = self.kv[p * SLOTS + s];
            self.place_remapped(&hv, f, flat, moved);
            self.write(p, s, h.tag, false, entry);
            bump(&self.counters.cuckoo_moves);
            bump(&self.counters.inserts_primary);
        }
        self.occupied += 1;
        Ok(InsertOutcome::Inserted)
    }

    pub fn delete(&mut self, _key: &Key) -> Result<bool, UnsupportedOperation> {
        Err(UnsupportedOperation("delete"))
    }

    pub fn lookup(&self, key: &Key) -> Option<Value> {
        let mut out = [None];
        self.lookup_batch_into(std::slice::from_ref(key), &mut out);
        out[0]
    }

    pub fn lookup_batch(&self, keys: &[Key]) -> Vec<Option<Value>> {
        let mut out = vec![None; keys.len()];
        self.lookup_batch_into(keys, &mut out);
        out
    }

    pub fn lookup_batch_into(&self, keys: &[Key], out: &mut [Option<Value>]) {
        assert_eq!(keys.len(), out.len(), "output length must match key count");
        for (keys, out) in keys.chunks(crate::batch::MAX_BATCH).zip(out.chunks_mut(crate::batch::MAX_BATCH)) {
            self.lookup_chunk(keys, out);
        }
    }

    fn lookup_chunk(&self, keys: &[Key], out: &mut [Option<Value>]) {
        const MAX: usize = crate::batch::MAX_BATCH;
        let n = keys.len();
        let mut hashed = [HortonHashed::default(); MAX];
        let mut found = [0u8; MAX];
        let mut second = [0usize; MAX];
        let mut pending = [0u8; MAX];
        let mut pending_len = 0;

        for (h, key) in hashed.iter_mut().zip(keys) {
            *h = self.hashed(key);
            self.prefetcher.prefetch(PrefetchTarget::PrimaryBucket, &self.lines[h.primary_index]);
        }
        add(&self.counters.primary_bucket_reads, n as u64);
        for i in 0..n {
            let h = &hashed[i];
            found[i] = self.candidates_in(h.primary_index, h.tag);
            for s in slots(found[i]) {
                self.prefetcher.prefetch(PrefetchTarget::Entry, &self.kv[h.primary_index * SLOTS + s]);
            }
        }
        for i in 0..n {
            let h = &hashed[i];
            out[i] = self.compare(h.primary_index, found[i], &keys[i]);
            if out[i].is_none() {
                let f = self.lines[h.primary_index].remap.get(h.rtag);
                if f != 0 {
                    bump(&self.counters.bloom_positive);
                    second[i] = h.candidate(f);
                    self.prefetcher.prefetch(PrefetchTarget::SecondaryBucket, &self.lines[second[i]]);
                    pending[pending_len] = i as u8;
                    pending_len += 1;
                }
            }
        }
        add(&self.counters.secondary_bucket_reads, pending_len as u64);
        for &i in &pending[..pending_len] {
            let i = i as usize;
            found[i] = self.candidates_in(second[i], hashed[i].tag);
        }
        for &i in &pending[..pending_len] {
            let i = i as usize;
            out[i] = self.compare(second[i], found[i], &keys[i]);
            if out[i].is_some() {
                bump(&self.counters.bloom_true_positive);
            }
        }
    }

    #[inline]
    fn compare(&self, b: usize, candidates: u8, key: &Key) -> Option<Value> {
        slots(candidates).find_map(|s| {
            bump(&self.counters.kv_reads);
            let e = &self.kv[b * SLOTS + s];
            (e.key == *key).then_some(e.value)
        })
    }

    /// Re-derives every entry and reports entries not findable through
    /// their primary bucket or remap entry.
    pub fn check_remap_soundness(&self) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for b in 0..self.lines.len() {
            for s in slots(self.lines[b].busy) {
                let key = self.kv[b * SLOTS + s].key;
                if self.locate(&key, &self.hashed(&key)) != Some((b, s)) {
                    bad.push((b, s));
                }
            }
        }
        bad
    }

    pub fn stats(&self) -> HortonStats {
        let mut live = 0;
        let mut in_secondary = 0;
        let mut used = 0;
        for (b, line) in self.lines.iter().enumerate() {
            for s in slots(line.busy) {
                live += 1;
                if self.hashed(&self.kv[b * SLOTS + s].key).primary_index != b {
                    in_secondary += 1;
                }
            }
            used += line.remap.used();
        }
        HortonStats {
            live_entries: live,
            in_secondary,
            ratio_in_secondary: if live == 0 { 0.0 } else { in_secondary as f64 / live as f64 },
            remap_occupancy: used as f64 / (self.lines.len() * REMAP_ENTRIES) as f64,
        }
    }

    pub fn memory_report(&self) -> MemoryReport {
        let bucket_bytes = self.lines.len() * size_of::<HortonLine>();
        let kv_bytes = self.kv.len() * size_of::<Entry>();
        MemoryReport {
            capacity: self.capacity(),
            lookup_line_bytes: size_of::<HortonLine>(),
            bucket_bytes_per_bucket: size_of::<HortonLine>(),
            bucket_bytes,
            kv_bytes,
            bytes_per_entry: (bucket_bytes + kv_bytes) as f64 / self.capacity() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::LeadingBytesHasher;
    use crate::prefetch::NoPrefetch;

    const N: usize = 128;

    fn toy() -> HortonTable<LeadingBytesHasher, NoPrefetch> {
        HortonTable::with_parts(N * SLOTS, LeadingBytesHasher, NoPrefetch).unwrap()
    }

    /// Searches for a raw hash with the given primary bucket and remap tag.
    fn raw_with(primary: usize, rtag: usize, skip: u64) -> u64 {
        (0u64..)
            .map(|i| primary as u64 | ((i + skip) << 32))
            .find(|&raw| HortonHashed::from_raw(raw, N - 1).rtag == rtag)
            .unwrap()
    }

    fn key(raw: u64) -> Key {
        Key::from_words(raw, raw.rotate_left(17))
    }

    #[test]
    fn remap_array_packing() {
        let mut r = RemapArray::default();
        for i in 0..REMAP_ENTRIES {
            r.set(i, (i % 8) as u8);
        }
        for i in 0..REMAP_ENTRIES {
            assert_eq!(r.get(i), (i % 8) as u8);
        }
        r.set(20, 7);
        assert_eq!(r.0 >> 63, 0);
        assert_eq!(r.get(19), 3);
    }

    #[test]
    fn derive_examples() {
        let h = HortonHashed::from_raw(0, N - 1);
        assert_eq!(h.rtag, 0);
        assert_eq!(h.candidates, [0; CANDIDATES]);
        let a = horton_derive(&Key::from(99u128), 1 << 10, &DefaultKeyHasher).unwrap();
        let b = horton_derive(&Key::from(99u128), 1 << 10, &DefaultKeyHasher).unwrap();
        assert_eq!(a, b);
        assert!(horton_derive(&Key::from(99u128), 100, &DefaultKeyHasher).is_err());
    }

    #[test]
    fn rtag_uniform_chi_square() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0u64; REMAP_ENTRIES];
        let samples = 1_000_000;
        for _ in 0..samples {
            let key = Key::from_words(rng.random(), rng.random());
            counts[horton_derive(&key, 1 << 17, &DefaultKeyHasher).unwrap().rtag] += 1;
        }
        let e = samples as f64 / REMAP_ENTRIES as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // chi-square critical value, 20 dof, p = 0.001.
        assert!(chi2 < 45.315, "chi2 = {chi2}");
    }

    #[test]
    fn primary_then_least_loaded_then_forced() {
        let mut t = toy();
        let p = 9;
        let fill: Vec<u64> = (0..8).map(|i| raw_with(p, (i % 20) + 1, i as u64 * 1000)).collect();
        for &raw in &fill {
            t.insert(key(raw), Value::from(raw as u128)).unwrap();
        }
        assert_eq!(t.line(p).busy, 0xFF);
        assert_eq!(t.line(p).remap, RemapArray(0));

        // Pre-load some candidate buckets so the least-loaded one is unique.
        let raw = raw_with(p, 0, 50_000);
        let h = t.hashed(&key(raw));
        let expected = (1..=CANDIDATES as u8).min_by_key(|&f| t.line(h.candidate(f)).busy.count_ones()).unwrap();
        t.insert(key(raw), Value::from(1u128)).unwrap();
        assert_eq!(t.line(p).remap.get(0), expected);
        let c = h.candidate(expected);
        assert!(t.line(c).remapped != 0);
        assert_eq!(t.counters().inserts_secondary, 1);

        // A second key with the same remap tag is forced to the same function.
        let raw2 = raw_with(p, 0, 90_000);
        t.insert(key(raw2), Value::from(2u128)).unwrap();
        let h2 = t.hashed(&key(raw2));
        let b2 = h2.candidate(expected);
        assert!(t.find(b2, h2.tag, &key(raw2)).is_some());
        assert!(t.check_remap_soundness().is_empty());

        t.reset_counters();
        assert_eq!(t.lookup(&key(raw2)), Some(Value::from(2u128)));
        let ctr = t.counters();
        assert_eq!((ctr.primary_bucket_reads, ctr.secondary_bucket_reads), (1, 1));
    }

    #[test]
    fn absent_key_with_clear_remap_reads_one_bucket() {
        let t = toy();
        assert_eq!(t.lookup(&key(12345)), None);
        let c = t.counters();
        assert_eq!((c.primary_bucket_reads, c.secondary_bucket_reads), (1, 0));
    }

    #[test]
    fn delete_is_unsupported() {
        let mut t = toy();
        assert_eq!(t.delete(&key(1)), Err(UnsupportedOperation("delete")));
    }

    #[test]
    fn fills_and_stays_sound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut t = HortonTable::new(1 << 14).unwrap();
        let mut keys = Vec::new();
        while t.len() < (1 << 14) * 9 / 10 {
            let k = Key::from_words(rng.random(), rng.random());
            if t.insert(k, Value::from_words(1, 2)).is_ok() {
                keys.push(k);
            }
        }
        assert!(t.check_remap_soundness().is_empty());
        assert!(t.lookup_batch(&keys).iter().all(Option::is_some));
    }
}
