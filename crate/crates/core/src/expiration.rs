//! 16-bit wrapping expiration timestamps.
//!
//! Time is quantized (30 s per unit by default) and stored modulo 2^16. An
//! entry expiring at `e` is live at `now` iff `now` is one of the 1024 values
//! preceding `e` in wrapping order. Because the clock wraps, an expired entry
//! would look live again 64512 units after it expired; [`CuckooTable::scan_expire`]
//! must therefore run at least once every 64512 units.
//!
//! [`CuckooTable::scan_expire`]: crate::table::CuckooTable::scan_expire

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Longest allowed distance between `now` and an expiration time.
pub const MAX_DELAY: u16 = 1024;
/// Longest allowed gap between two expiration scans.
pub const SCAN_PERIOD: u32 = 65536 - MAX_DELAY as u32;
pub const DEFAULT_QUANTUM_SECONDS: f64 = 30.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct Timestamp16(pub u16);

impl Timestamp16 {
    #[inline]
    pub fn wrapping_add(self, units: u16) -> Self {
        Timestamp16(self.0.wrapping_add(units))
    }

    /// `(self - earlier) mod 2^16`.
    #[inline]
    pub fn wrapping_since(self, earlier: Timestamp16) -> u16 {
        self.0.wrapping_sub(earlier.0)
    }
}

/// Whether an entry expiring at `expiration` is still live at `now`.
///
/// An expiration equal to `now` is already expired.
#[inline]
pub fn is_valid(expiration: Timestamp16, now: Timestamp16) -> bool {
    expiration.0.wrapping_sub(now.0).wrapping_sub(1) < MAX_DELAY
}

/// Per-lane [`is_valid`] over a bucket's eight timers.
#[inline]
pub fn valid_mask(timers: &[u16; 8], now: Timestamp16) -> u8 {
    #[cfg(all(target_arch = "x86_64", target_feature = "sse2"))]
    {
        crate::hashing::simd::valid_mask_sse2(timers, now.0)
    }
    #[cfg(not(all(target_arch = "x86_64", target_feature = "sse2")))]
    {
        valid_mask_scalar(timers, now)
    }
}

#[inline]
pub fn valid_mask_scalar(timers: &[u16; 8], now: Timestamp16) -> u8 {
    timers.iter().enumerate().fold(0u8, |m, (i, &t)| m | ((is_valid(Timestamp16(t), now) as u8) << i))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpiryConfig {
    max_delay: u32,
    scan_period: u32,
    quantum_seconds: f64,
}

impl Default for ExpiryConfig {
    fn default() -> Self {
        ExpiryConfig { max_delay: MAX_DELAY as u32, scan_period: SCAN_PERIOD, quantum_seconds: DEFAULT_QUANTUM_SECONDS }
    }
}

impl ExpiryConfig {
    pub fn new(max_delay: u32, scan_period: u32, quantum_seconds: f64) -> Result<Self, ConfigError> {
        if max_delay + scan_period > 1 << 16 {
            return Err(ConfigError::InvalidExpiryConfig { max_delay, scan_period });
        }
        if !(quantum_seconds.is_finite() && quantum_seconds > 0.0) {
            return Err(ConfigError::InvalidQuantum(quantum_seconds));
        }
        Ok(ExpiryConfig { max_delay, scan_period, quantum_seconds })
    }

    pub fn with_quantum(quantum_seconds: f64) -> Result<Self, ConfigError> {
        Self::new(MAX_DELAY as u32, SCAN_PERIOD, quantum_seconds)
    }

    pub fn max_delay(&self) -> u32 {
        self.max_delay
    }

    pub fn scan_period(&self) -> u32 {
        self.scan_period
    }

    pub fn quantum_seconds(&self) -> f64 {
        self.quantum_seconds
    }
}

/// `floor(seconds / quantum) mod 2^16`.
pub fn quantize(seconds_from_epoch: f64, cfg: &ExpiryConfig) -> Timestamp16 {
    debug_assert!(seconds_from_epoch >= 0.0);
    let units = (seconds_from_epoch / cfg.quantum_seconds).floor();
    Timestamp16((units.rem_euclid(65536.0)) as u16)
}

/// Current time and requested expiration for an insert into a timed table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub now: Timestamp16,
    pub expires: Timestamp16,
}

impl Timing {
    pub fn new(now: Timestamp16, expires: Timestamp16) -> Self {
        Timing { now, expires }
    }

    /// Expires `delay` units after `now`.
    pub fn after(now: Timestamp16, delay: u16) -> Self {
        Timing { now, expires: now.wrapping_add(delay) }
    }

    /// True when `expires` lies in `(now, now + 1024]`.
    pub fn in_range(&self) -> bool {
        is_valid(self.expires, self.now)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ground truth over unwrapped time.
    fn valid_unwrapped(expires: u64, now: u64) -> bool {
        now < expires && expires - now <= MAX_DELAY as u64
    }

    #[test]
    fn validity_examples() {
        assert!(is_valid(Timestamp16(150), Timestamp16(100)));
        assert!(!is_valid(Timestamp16(100), Timestamp16(150)));
        assert!(is_valid(Timestamp16(10), Timestamp16(65500)));
        assert!(!is_valid(Timestamp16(100), Timestamp16(100)));
        assert!(is_valid(Timestamp16(1124), Timestamp16(100)));
        assert!(!is_valid(Timestamp16(1125), Timestamp16(100)));
    }

    #[test]
    fn wraparound_matches_unwrapped_oracle() {
        // now = 65500 unwrapped, expiration 65546 unwrapped (10 wrapped).
        for delta in 0u64..3000 {
            let now = 65_000 + delta;
            let exp = 65_546u64;
            if exp.abs_diff(now) < 60_000 {
                assert_eq!(
                    is_valid(Timestamp16(exp as u16), Timestamp16(now as u16)),
                    valid_unwrapped(exp, now),
                    "now={now}"
                );
            }
        }
    }

    #[test]
    fn window_is_exactly_1024_preceding_values() {
        for e in [0u16, 1, 100, 1023, 1024, 40_000, 65_535] {
            let valid: Vec<u16> = (0..=u16::MAX).filter(|&n| is_valid(Timestamp16(e), Timestamp16(n))).collect();
            assert_eq!(valid.len(), 1024);
            for (i, n) in (1..=1024u16).map(|d| e.wrapping_sub(d)).enumerate() {
                assert!(valid.contains(&n), "e={e} missing now={n} ({i})");
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let cfg = ExpiryConfig::default();
        assert_eq!(quantize(0.0, &cfg), Timestamp16(0));
        assert_eq!(quantize(60.0, &cfg), Timestamp16(2));
        assert_eq!(quantize(59.9, &cfg), Timestamp16(1));
        assert_eq!(quantize(65536.0 * 30.0, &cfg), Timestamp16(0));
        assert_eq!(quantize(65537.0 * 30.0, &cfg), Timestamp16(1));
    }

    #[test]
    fn config_bounds() {
        assert!(ExpiryConfig::new(1024, 64512, 30.0).is_ok());
        assert!(ExpiryConfig::new(1024, 64513, 30.0).is_err());
        assert!(ExpiryConfig::with_quantum(0.0).is_err());
        assert!(ExpiryConfig::with_quantum(f64::NAN).is_err());
    }

    #[test]
    fn timing_range() {
        let now = Timestamp16(65_530);
        assert!(Timing::after(now, 1).in_range());
        assert!(Timing::after(now, 1024).in_range());
        assert!(!Timing::after(now, 0).in_range());
        assert!(!Timing::after(now, 1025).in_range());
    }

    proptest::proptest! {
        #[test]
        fn simd_valid_mask_matches_scalar(timers: [u16; 8], now: u16, near in 0u16..8) {
            let mut timers = timers;
            timers[near as usize] = now.wrapping_add(near * 200);
            proptest::prop_assert_eq!(
                valid_mask(&timers, Timestamp16(now)),
                valid_mask_scalar(&timers, Timestamp16(now))
            );
        }
    }
}
