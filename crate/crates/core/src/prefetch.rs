//! Advisory prefetch seam used by the batched lookup pipeline.

use std::cell::Cell;

/// What a prefetch request targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefetchTarget {
    PrimaryBucket,
    SecondaryBucket,
    Entry,
}

/// Issues memory hints. Implementations must not affect results.
pub trait Prefetch {
    fn prefetch<T>(&self, target: PrefetchTarget, addr: *const T);
}

/// Emits a read prefetch into all cache levels where the target supports it.
#[derive(Debug, Clone, Copy, Default)]
pub struct HardwarePrefetch;

impl Prefetch for HardwarePrefetch {
    #[inline(always)]
    fn prefetch<T>(&self, _target: PrefetchTarget, addr: *const T) {
        #[cfg(all(target_arch = "x86_64", target_feature = "sse"))]
        // SAFETY: prefetch never dereferences and tolerates any address.
        unsafe {
            use core::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
            _mm_prefetch::<_MM_HINT_T0>(addr as *const i8);
        }
        #[cfg(not(all(target_arch = "x86_64", target_feature = "sse")))]
        let _ = addr;
    }
}

/// Issues nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPrefetch;

impl Prefetch for NoPrefetch {
    #[inline(always)]
    fn prefetch<T>(&self, _: PrefetchTarget, _: *const T) {}
}

/// Counts requests per target without touching memory.
#[derive(Debug, Default)]
pub struct CountingPrefetch {
    primary: Cell<u64>,
    secondary: Cell<u64>,
    entry: Cell<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrefetchCounts {
    pub primary: u64,
    pub secondary: u64,
    pub entry: u64,
}

impl CountingPrefetch {
    pub fn counts(&self) -> PrefetchCounts {
        PrefetchCounts { primary: self.primary.get(), secondary: self.secondary.get(), entry: self.entry.get() }
    }

    pub fn reset(&self) {
        self.primary.set(0);
        self.secondary.set(0);
        self.entry.set(0);
    }
}

impl Prefetch for CountingPrefetch {
    fn prefetch<T>(&self, target: PrefetchTarget, _: *const T) {
        let cell = match target {
            PrefetchTarget::PrimaryBucket => &self.primary,
            PrefetchTarget::SecondaryBucket => &self.secondary,
            PrefetchTarget::Entry => &self.entry,
        };
        cell.set(cell.get() + 1);
    }
}
