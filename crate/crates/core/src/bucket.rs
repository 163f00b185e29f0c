//! Bucket memory layout.
//!
//! Everything a lookup touches lives in one 64-byte line per bucket: eight
//! 16-bit tags, the busy mask, the bloom filter and its moved counter, and,
//! for timed tables, eight 16-bit timers. The per-slot alternate bucket
//! indices are only needed by inserts; without timers they share the line,
//! with timers they spill to a second 64-byte unit.
//!
//! ```text
//! Compact line (64 B)                  Timed line (64 B)          Spill (64 B)
//! [tags 16][bloom 8][moved 2][masks 6] [tags 16][bloom 8]...      [alt 8 x 4 B]
//! [alt 8 x 4 B = 32]                   [timers 16][pad 16]        [pad 32]
//! ```

use crate::expiration::{valid_mask, Timestamp16};

pub const SLOTS: usize = 8;
pub const CACHELINE: usize = 64;

/// Bucket-level flag: the moved counter saturated, so the bloom filter may
/// never be reset again.
pub(crate) const FLAG_UNRESETTABLE: u8 = 1;

/// Lookup-path metadata common to every layout.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[repr(C)]
pub struct Header {
    pub tags: [u16; SLOTS],
    pub bloom: u64,
    /// Live entries whose primary bucket is this one but which sit in their
    /// secondary bucket.
    pub moved: u16,
    pub busy: u8,
    /// Slots holding an entry that is in its secondary bucket.
    pub in_secondary: u8,
    /// Scratch bits used while searching cuckoo paths.
    pub scratch: u8,
    pub flags: u8,
}

impl Header {
    #[inline]
    pub fn free_slot(&self) -> Option<usize> {
        lowest(!self.busy)
    }

    #[inline]
    pub(crate) fn set_slot(&mut self, slot: usize, tag: u16, in_secondary: bool) {
        let bit = 1u8 << slot;
        self.tags[slot] = tag;
        self.busy |= bit;
        if in_secondary {
            self.in_secondary |= bit;
        } else {
            self.in_secondary &= !bit;
        }
    }

    #[inline]
    pub(crate) fn clear_slot(&mut self, slot: usize) {
        let bit = !(1u8 << slot);
        self.busy &= bit;
        self.in_secondary &= bit;
    }

    /// Record one more entry displaced from this (primary) bucket.
    #[inline]
    pub(crate) fn add_moved(&mut self, bloom_mask: u64) {
        self.bloom |= bloom_mask;
        match self.moved.checked_add(1) {
            Some(m) => self.moved = m,
            None => self.flags |= FLAG_UNRESETTABLE,
        }
    }

    /// One displaced entry left; resets the filter when none remain.
    #[inline]
    pub(crate) fn remove_moved(&mut self) {
        debug_assert!(self.moved > 0 || self.flags & FLAG_UNRESETTABLE != 0);
        self.moved = self.moved.saturating_sub(1);
        if self.moved == 0 && self.flags & FLAG_UNRESETTABLE == 0 {
            self.bloom = 0;
        }
    }

    #[inline]
    pub fn bloom_contains(&self, bloom_mask: u64) -> bool {
        self.bloom & bloom_mask == bloom_mask
    }

    pub fn is_unresettable(&self) -> bool {
        self.flags & FLAG_UNRESETTABLE != 0
    }
}

#[inline]
pub(crate) fn lowest(mask: u8) -> Option<usize> {
    (mask != 0).then(|| mask.trailing_zeros() as usize)
}

/// Iterates set bits of a slot mask, lowest first.
#[inline]
pub(crate) fn slots(mut mask: u8) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        let s = lowest(mask)?;
        mask &= mask - 1;
        Some(s)
    })
}

mod sealed {
    pub trait Sealed {}
    impl Sealed for super::Compact {}
    impl Sealed for super::Timed {}
}

/// Storage layout of a table's buckets; chosen at the type level so the
/// lookup path carries no timer branches when timers are disabled.
pub trait Layout: sealed::Sealed + 'static {
    const TIMERS: bool;
    /// The 64-byte lookup-path unit.
    type Line: Copy + Default;
    /// Insert-only data that does not fit in the line; `()` when none.
    type Spill: Copy + Default;

    fn header(line: &Self::Line) -> &Header;
    fn header_mut(line: &mut Self::Line) -> &mut Header;
    fn alt(line: &Self::Line, spill: &Self::Spill, slot: usize) -> u32;
    fn set_alt(line: &mut Self::Line, spill: &mut Self::Spill, slot: usize, alt: u32);
    fn timer(line: &Self::Line, slot: usize) -> Timestamp16;
    fn set_timer(line: &mut Self::Line, slot: usize, t: Timestamp16);

    /// Busy slots that are also unexpired at `now` (all busy slots when the
    /// layout has no timers or `now` is `None`).
    fn live_mask(line: &Self::Line, now: Option<Timestamp16>) -> u8;
}

/// Untimed layout: the whole bucket is one line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compact;

#[derive(Debug, Clone, Copy, Default)]
#[repr(C, align(64))]
pub struct CompactLine {
    pub header: Header,
    pub alt: [u32; SLOTS],
}

impl Layout for Compact {
    const TIMERS: bool = false;
    type Line = CompactLine;
    type Spill = ();

    #[inline]
    fn header(line: &CompactLine) -> &Header {
        &line.header
    }
    #[inline]
    fn header_mut(line: &mut CompactLine) -> &mut Header {
        &mut line.header
    }
    #[inline]
    fn alt(line: &CompactLine, _: &(), slot: usize) -> u32 {
        line.alt[slot]
    }
    #[inline]
    fn set_alt(line: &mut CompactLine, _: &mut (), slot: usize, alt: u32) {
        line.alt[slot] = alt;
    }
    #[inline]
    fn timer(_: &CompactLine, _: usize) -> Timestamp16 {
        Timestamp16(0)
    }
    #[inline]
    fn set_timer(_: &mut CompactLine, _: usize, _: Timestamp16) {}
    #[inline]
    fn live_mask(line: &CompactLine, _: Option<Timestamp16>) -> u8 {
        line.header.busy
    }
}

/// Timed layout: timers join the lookup line, alternates spill.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timed;

#[derive(Debug, Clone, Copy, Default)]
#[repr(C, align(64))]
pub struct TimedLine {
    pub header: Header,
    pub timers: [u16; SLOTS],
}

#[derive(Debug, Clone, Copy, Default)]
#[repr(C, align(64))]
pub struct AltLine {
    pub alt: [u32; SLOTS],
}

impl Layout for Timed {
    const TIMERS: bool = true;
    type Line = TimedLine;
    type Spill = AltLine;

    #[inline]
    fn header(line: &TimedLine) -> &Header {
        &line.header
    }
    #[inline]
    fn header_mut(line: &mut TimedLine) -> &mut Header {
        &mut line.header
    }
    #[inline]
    fn alt(_: &TimedLine, spill: &AltLine, slot: usize) -> u32 {
        spill.alt[slot]
    }
    #[inline]
    fn set_alt(_: &mut TimedLine, spill: &mut AltLine, slot: usize, alt: u32) {
        spill.alt[slot] = alt;
    }
    #[inline]
    fn timer(line: &TimedLine, slot: usize) -> Timestamp16 {
        Timestamp16(line.timers[slot])
    }
    #[inline]
    fn set_timer(line: &mut TimedLine, slot: usize, t: Timestamp16) {
        line.timers[slot] = t.0;
    }
    #[inline]
    fn live_mask(line: &TimedLine, now: Option<Timestamp16>) -> u8 {
        match now {
            Some(now) => line.header.busy & valid_mask(&line.timers, now),
            None => line.header.busy,
        }
    }
}

const _: () = {
    use std::mem::{align_of, size_of};
    assert!(size_of::<Header>() <= CACHELINE / 2);
    assert!(size_of::<CompactLine>() == CACHELINE);
    assert!(align_of::<CompactLine>() == CACHELINE);
    assert!(size_of::<TimedLine>() == CACHELINE);
    assert!(align_of::<TimedLine>() == CACHELINE);
    assert!(size_of::<AltLine>() == CACHELINE);
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moved_counter_reset_discipline() {
        let mut h = Header::default();
        h.add_moved(0b11);
        h.add_moved(0b100);
        assert_eq!((h.moved, h.bloom), (2, 0b111));
        h.remove_moved();
        assert_eq!((h.moved, h.bloom), (1, 0b111));
        h.remove_moved();
        assert_eq!((h.moved, h.bloom), (0, 0));
    }

    #[test]
    fn moved_counter_saturates_and_pins_filter() {
        let mut h = Header { moved: u16::MAX - 1, ..Default::default() };
        h.add_moved(1);
        h.add_moved(2);
        assert_eq!(h.moved, u16::MAX);
        assert!(h.is_unresettable());
        for _ in 0..u16::MAX {
            h.remove_moved();
        }
        assert_eq!(h.moved, 0);
        assert_eq!(h.bloom, 0b11);
    }

    #[test]
    fn slot_iteration() {
        assert_eq!(slots(0b1010_0001).collect::<Vec<_>>(), vec![0, 5, 7]);
        assert_eq!(slots(0).count(), 0);
        assert_eq!(lowest(0b1100), Some(2));
    }
}
