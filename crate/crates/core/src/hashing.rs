//! Key hashing and index derivation.
//!
//! Every per-key quantity the table needs comes from one 64-bit hash:
//!
//! ```text
//!  63      48 47           32 31                                    0
//! +----------+---------------+---------------------------------------+
//! |   tag    |               |             primary hash              |
//! +----------+---------------+---------------------------------------+
//! |<------ secondary hash s ->|
//! ```
//!
//! The primary index is the low bits of the primary hash and the secondary
//! index the low bits of `s`. The two bloom bit positions are `s[0..6)` and
//! `s[6..12)`, so they never depend on primary-index bits. The tag is the top
//! sixteen bits of `s`, clear of both indices for tables of up to 2^16
//! buckets.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Smallest bucket count accepted by [`derive`].
pub const MIN_BUCKETS: usize = 128;

/// A 128-bit opaque key, compared bitwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(transparent)]
pub struct Key(pub [u8; 16]);

/// A 128-bit opaque value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct Value(pub [u8; 16]);

impl Key {
    pub fn from_words(lo: u64, hi: u64) -> Self {
        let mut bytes = [0u8; 16];
        bytes[..8].copy_from_slice(&lo.to_le_bytes());
        bytes[8..].copy_from_slice(&hi.to_le_bytes());
        Key(bytes)
    }

    pub fn words(&self) -> (u64, u64) {
        let lo = u64::from_le_bytes(self.0[..8].try_into().unwrap());
        let hi = u64::from_le_bytes(self.0[8..].try_into().unwrap());
        (lo, hi)
    }
}

impl Value {
    pub fn from_words(lo: u64, hi: u64) -> Self {
        Value(Key::from_words(lo, hi).0)
    }
}

impl From<u128> for Key {
    fn from(v: u128) -> Self {
        Key(v.to_le_bytes())
    }
}

impl From<u128> for Value {
    fn from(v: u128) -> Self {
        Value(v.to_le_bytes())
    }
}

/// Maps a key to a 64-bit hash.
///
/// Implementations must be deterministic for the lifetime of any table that
/// uses them.
pub trait KeyHasher {
    fn hash_key(&self, key: &Key) -> u64;
}

impl<F> KeyHasher for F
where
    F: Fn(&Key) -> u64,
{
    #[inline]
    fn hash_key(&self, key: &Key) -> u64 {
        self(key)
    }
}

/// XXH3-64 over the 16 key bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultKeyHasher;

impl KeyHasher for DefaultKeyHasher {
    #[inline]
    fn hash_key(&self, key: &Key) -> u64 {
        xxhash_rust::xxh3::xxh3_64(&key.0)
    }
}

/// Uses the first eight key bytes (little endian) as the hash.
///
/// Lets tests pick exact bucket indices, tags and bloom bits for a key.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeadingBytesHasher;

impl KeyHasher for LeadingBytesHasher {
    #[inline]
    fn hash_key(&self, key: &Key) -> u64 {
        key.words().0
    }
}

/// All indices derived from a key's hash for a given bucket count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HashedKey {
    pub raw: u64,
    pub primary_index: usize,
    pub secondary_index: usize,
    pub tag: u16,
    pub bloom_bit_a: u8,
    pub bloom_bit_b: u8,
}

impl HashedKey {
    /// `mask` is `num_buckets - 1` for a power-of-two bucket count.
    #[inline]
    pub fn from_raw(raw: u64, mask: usize) -> Self {
        let secondary = (raw >> 32) as u32;
        HashedKey {
            raw,
            primary_index: (raw as usize) & mask,
            secondary_index: (secondary as usize) & mask,
            tag: (raw >> 48) as u16,
            bloom_bit_a: (secondary & 63) as u8,
            bloom_bit_b: ((secondary >> 6) & 63) as u8,
        }
    }

    /// The two-bit pattern this key sets in (or tests against) a bloom filter.
    #[inline]
    pub fn bloom_mask(&self) -> u64 {
        (1u64 << self.bloom_bit_a) | (1u64 << self.bloom_bit_b)
    }

    /// True when both candidate buckets coincide.
    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.primary_index == self.secondary_index
    }
}

pub(crate) fn check_bucket_count(num_buckets: usize) -> Result<usize, ConfigError> {
    if num_buckets < MIN_BUCKETS || !num_buckets.is_power_of_two() {
        return Err(ConfigError::InvalidBucketCount(num_buckets));
    }
    Ok(num_buckets - 1)
}

/// Hashes `key` and derives its bucket indices, tag and bloom bits.
pub fn derive<H: KeyHasher + ?Sized>(key: &Key, num_buckets: usize, hasher: &H) -> Result<HashedKey, ConfigError> {
    let mask = check_bucket_count(num_buckets)?;
    Ok(HashedKey::from_raw(hasher.hash_key(key), mask))
}

/// The tag replicated across the eight slot lanes of a bucket.
pub type TagLanes = [u16; 8];

#[inline]
pub fn spread_tags(tag: u16) -> TagLanes {
    [tag; 8]
}

/// Lane-wise equality of two tag vectors; bit `i` is set when lane `i` matches.
#[inline]
pub fn match_mask(bucket_tags: &TagLanes, needle: &TagLanes) -> u8 {
    #[cfg(all(target_arch = "x86_64", target_feature = "sse2"))]
    {
        simd::match_mask_sse2(bucket_tags, needle)
    }
    #[cfg(not(all(target_arch = "x86_64", target_feature = "sse2")))]
    {
        match_mask_scalar(bucket_tags, needle)
    }
}

#[inline]
pub fn match_mask_scalar(bucket_tags: &TagLanes, needle: &TagLanes) -> u8 {
    bucket_tags.iter().zip(needle).enumerate().fold(0u8, |m, (i, (a, b))| m | (((a == b) as u8) << i))
}

#[cfg(all(target_arch = "x86_64", target_feature = "sse2"))]
pub(crate) mod simd {
    use core::arch::x86_64::*;

    use super::TagLanes;

    /// Collapses a 16-bit-lane compare result to one bit per lane.
    #[inline]
    fn lane_bits(cmp: __m128i) -> u8 {
        // SAFETY: sse2 is statically enabled for this module.
        unsafe {
            let packed = _mm_packs_epi16(cmp, _mm_setzero_si128());
            _mm_movemask_epi8(packed) as u8
        }
    }

    #[inline]
    pub(crate) fn match_mask_sse2(bucket_tags: &TagLanes, needle: &TagLanes) -> u8 {
        // SAFETY: both arrays are 16 bytes; unaligned loads are permitted.
        unsafe {
            let a = _mm_loadu_si128(bucket_tags.as_ptr() as *const __m128i);
            let b = _mm_loadu_si128(needle.as_ptr() as *const __m128i);
            lane_bits(_mm_cmpeq_epi16(a, b))
        }
    }

    /// Bit `i` set when `(timers[i] - now - 1) mod 2^16 < 1024`.
    #[inline]
    pub(crate) fn valid_mask_sse2(timers: &[u16; 8], now: u16) -> u8 {
        // SAFETY: 16-byte unaligned load of a [u16; 8].
        unsafe {
            let t = _mm_loadu_si128(timers.as_ptr() as *const __m128i);
            let base = _mm_set1_epi16(now.wrapping_add(1) as i16);
            let diff = _mm_sub_epi16(t, base);
            let high = _mm_and_si128(diff, _mm_set1_epi16(0xFC00u16 as i16));
            lane_bits(_mm_cmpeq_epi16(high, _mm_setzero_si128()))
        }
    }
}
