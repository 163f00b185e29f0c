//! Reference model and structural checkers used by the test suites.
//!
//! [`ModelMap`] is a plain hash map with expirations kept in unwrapped 64-bit
//! time, so a wrapping 16-bit table can be checked against ground truth that
//! never wraps. [`full_scan_check`] re-derives every stored entry and reports
//! any broken structural invariant.

use std::collections::HashMap;

use crate::bucket::{slots, Layout};
use crate::error::InsertError;
use crate::expiration::{Timestamp16, Timing};
use crate::hashing::{Key, KeyHasher, Value};
use crate::prefetch::Prefetch;
use crate::table::{CuckooTable, InsertOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// `ttl` is the delay until expiration for timed tables, `None` otherwise.
    Insert {
        key: Key,
        value: Value,
        ttl: Option<u16>,
    },
    Lookup {
        key: Key,
    },
    Delete {
        key: Key,
    },
    Advance {
        units: u64,
    },
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Insert(Result<InsertOutcome, InsertError>),
    Lookup(Option<Value>),
    Delete(bool),
    Unit,
}

/// Exact map semantics with strict, non-wrapping expiry.
#[derive(Debug, Clone, Default)]
pub struct ModelMap {
    entries: HashMap<Key, (Value, Option<u64>)>,
    now: u64,
}

impl ModelMap {
    pub fn new(start: u64) -> Self {
        ModelMap { entries: HashMap::new(), now: start }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn live(&self, key: &Key) -> Option<Value> {
        match self.entries.get(key) {
            Some(&(v, None)) => Some(v),
            Some(&(v, Some(exp))) if exp > self.now => Some(v),
            _ => None,
        }
    }

    pub fn live_len(&self) -> usize {
        self.entries.keys().filter(|k| self.live(k).is_some()).count()
    }

    pub fn apply(&mut self, op: &Op) -> Outcome {
        match *op {
            Op::Insert { key, value, ttl } => {
                let updated = self.live(&key).is_some();
                self.entries.insert(key, (value, ttl.map(|d| self.now + d as u64)));
                Outcome::Insert(Ok(if updated { InsertOutcome::Updated } else { InsertOutcome::Inserted }))
            }
            Op::Lookup { key } => Outcome::Lookup(self.live(&key)),
            Op::Delete { key } => {
                let was_live = self.live(&key).is_some();
                if was_live {
                    self.entries.remove(&key);
                }
                Outcome::Delete(was_live)
            }
            Op::Advance { units } => {
                self.now += units;
                Outcome::Unit
            }
            Op::Scan => {
                let now = self.now;
                self.entries.retain(|_, &mut (_, exp)| exp.is_none_or(|e| e > now));
                Outcome::Unit
            }
        }
    }
}

/// Runs `op` against a table whose clock reads `now` (unwrapped). Untimed
/// tables ignore the clock.
pub fn apply_to_table<L: Layout, H: KeyHasher, P: Prefetch>(
    table: &mut CuckooTable<L, H, P>,
    now: u64,
    op: &Op,
) -> Outcome {
    let now16 = L::TIMERS.then_some(Timestamp16(now as u16));
    match *op {
        Op::Insert { key, value, ttl } => {
            let timing = ttl.map(|d| Timing::after(Timestamp16(now as u16), d));
            Outcome::Insert(table.insert(key, value, timing))
        }
        Op::Lookup { key } => Outcome::Lookup(table.lookup(&key, now16)),
        Op::Delete { key } => Outcome::Delete(table.delete(&key, now16)),
        Op::Advance { .. } => Outcome::Unit,
        Op::Scan => {
            table.scan_expire(Timestamp16(now as u16));
            Outcome::Unit
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// An entry is in neither of its two candidate buckets.
    Misplaced {
        bucket: usize,
        slot: usize,
    },
    TagMismatch {
        bucket: usize,
        slot: usize,
    },
    /// The stored alternate is not the entry's other bucket.
    BadAlternate {
        bucket: usize,
        slot: usize,
    },
    /// The in-secondary bit disagrees with where the entry sits.
    BadSecondaryBit {
        bucket: usize,
        slot: usize,
    },
    /// A displaced entry's bloom bits are missing from its primary's filter.
    BloomFalseNegative {
        bucket: usize,
        slot: usize,
        primary: usize,
    },
    MovedCounter {
        bucket: usize,
        stored: u16,
        actual: u32,
    },
    /// Non-empty filter with a zero moved counter.
    UnresetFilter {
        bucket: usize,
    },
    ScratchDirty {
        bucket: usize,
    },
    OccupancyMismatch {
        stored: usize,
        actual: usize,
    },
}

/// Re-derives every occupied slot and checks placement, tags, alternates,
/// bloom soundness, moved-counter exactness and reset discipline.
pub fn full_scan_check<L: Layout, H: KeyHasher, P: Prefetch>(t: &CuckooTable<L, H, P>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut moved = vec![0u32; t.num_buckets()];
    let mut occupied = 0;
    for b in 0..t.num_buckets() {
        let header = t.header(b);
        for s in slots(header.busy) {
            occupied += 1;
            let h = t.hashed(&t.entry(b, s).key);
            let in_secondary = b != h.primary_index;
            if b != h.primary_index && b != h.secondary_index {
                out.push(Violation::Misplaced { bucket: b, slot: s });
                continue;
            }
            if header.tags[s] != h.tag {
                out.push(Violation::TagMismatch { bucket: b, slot: s });
            }
            let other = if in_secondary { h.primary_index } else { h.secondary_index };
            if t.alt(b, s) != other {
                out.push(Violation::BadAlternate { bucket: b, slot: s });
            }
            if (header.in_secondary >> s) & 1 != in_secondary as u8 {
                out.push(Violation::BadSecondaryBit { bucket: b, slot: s });
            }
            if in_secondary {
                moved[h.primary_index] += 1;
                if !t.header(h.primary_index).bloom_contains(h.bloom_mask()) {
                    out.push(Violation::BloomFalseNegative { bucket: b, slot: s, primary: h.primary_index });
                }
            }
        }
    }
    for (b, &actual) in moved.iter().enumerate() {
        let header = t.header(b);
        if !header.is_unresettable() {
            if header.moved as u32 != actual {
                out.push(Violation::MovedCounter { bucket: b, stored: header.moved, actual });
            }
            if header.bloom != 0 && header.moved == 0 {
                out.push(Violation::UnresetFilter { bucket: b });
            }
        }
        if header.scratch != 0 {
            out.push(Violation::ScratchDirty { bucket: b });
        }
    }
    if occupied != t.len() {
        out.push(Violation::OccupancyMismatch { stored: t.len(), actual: occupied });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{Strategy, Table, TimedTable};

    fn k(i: u128) -> Key {
        Key::from(i)
    }

    fn v(i: u128) -> Value {
        Value::from(i)
    }

    #[test]
    fn model_micro_traces() {
        let mut m = ModelMap::new(0);
        assert_eq!(
            m.apply(&Op::Insert { key: k(1), value: v(10), ttl: None }),
            Outcome::Insert(Ok(InsertOutcome::Inserted))
        );
        assert_eq!(m.apply(&Op::Lookup { key: k(1) }), Outcome::Lookup(Some(v(10))));
        assert_eq!(
            m.apply(&Op::Insert { key: k(1), value: v(11), ttl: None }),
            Outcome::Insert(Ok(InsertOutcome::Updated))
        );
        assert_eq!(m.apply(&Op::Delete { key: k(1) }), Outcome::Delete(true));
        assert_eq!(m.apply(&Op::Lookup { key: k(1) }), Outcome::Lookup(None));

        let mut m = ModelMap::new(100);
        m.apply(&Op::Insert { key: k(2), value: v(20), ttl: Some(5) });
        m.apply(&Op::Advance { units: 4 });
        assert_eq!(m.apply(&Op::Lookup { key: k(2) }), Outcome::Lookup(Some(v(20))));
        m.apply(&Op::Advance { units: 1 });
        assert_eq!(m.apply(&Op::Lookup { key: k(2) }), Outcome::Lookup(None));
        assert_eq!(m.apply(&Op::Delete { key: k(2) }), Outcome::Delete(false));
        assert_eq!(
            m.apply(&Op::Insert { key: k(2), value: v(21), ttl: Some(1) }),
            Outcome::Insert(Ok(InsertOutcome::Inserted))
        );
    }

    #[test]
    fn fresh_table_is_clean() {
        let t = Table::<crate::DefaultKeyHasher>::new(1 << 12, Strategy::BloomGuided).unwrap();
        assert!(full_scan_check(&t).is_empty());
    }

    #[test]
    fn corrupted_counter_is_reported_once() {
        let mut t = Table::<crate::DefaultKeyHasher>::new(1 << 12, Strategy::BloomGuided).unwrap();
        for i in 0..1000 {
            t.insert(k(i), v(i), None).unwrap();
        }
        assert!(full_scan_check(&t).is_empty());
        let b = (0..t.num_buckets()).find(|&b| t.header(b).moved == 0).unwrap();
        t.header_mut(b).moved = 3;
        assert_eq!(full_scan_check(&t), vec![Violation::MovedCounter { bucket: b, stored: 3, actual: 0 }]);
    }

    #[test]
    fn corrupted_filter_is_reported() {
        let mut t = Table::<crate::DefaultKeyHasher>::new(1 << 12, Strategy::BloomGuided).unwrap();
        for i in 0..3800 {
            t.insert(k(i), v(i), None).unwrap();
        }
        let b = (0..t.num_buckets()).find(|&b| t.header(b).moved > 0).unwrap();
        t.header_mut(b).bloom = 0;
        let found = full_scan_check(&t);
        assert!(!found.is_empty());
        assert!(found.iter().all(|v| matches!(v, Violation::BloomFalseNegative { primary, .. } if *primary == b)));
    }

    #[test]
    fn timed_table_tracks_model_at_one_step() {
        let mut t = TimedTable::<crate::DefaultKeyHasher>::new(1 << 10, Strategy::BloomGuided).unwrap();
        let mut m = ModelMap::new(65_530);
        let ops = [
            Op::Insert { key: k(1), value: v(1), ttl: Some(10) },
            Op::Advance { units: 9 },
            Op::Lookup { key: k(1) },
            Op::Advance { units: 1 },
            Op::Lookup { key: k(1) },
            Op::Insert { key: k(1), value: v(2), ttl: Some(3) },
            Op::Lookup { key: k(1) },
        ];
        for op in &ops {
            let now = m.now();
            assert_eq!(apply_to_table(&mut t, now, op), m.apply(op), "{op:?}");
        }
    }
}
