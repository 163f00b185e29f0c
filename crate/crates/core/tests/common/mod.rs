#![allow(dead_code)]

use cuckoopp::expiration::{MAX_DELAY, SCAN_PERIOD};
use cuckoopp::oracle::Op;
use cuckoopp::{Key, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn key_pool(seed: u64, n: usize) -> Vec<Key> {
    cuckoopp::workload::random_keys(seed, 7, n, &Default::default())
}

/// Mixed insert/lookup/delete trace over `pool`. Timed traces also advance
/// a simulated clock starting at `start` and scan exactly as rarely as the
/// scan period allows.
pub struct TraceGen {
    rng: ChaCha8Rng,
    pool: Vec<Key>,
    timed: bool,
    now: u64,
    last_scan: u64,
    pending: Vec<Op>,
    pub max_advance: u64,
    pub deletes: bool,
}

impl TraceGen {
    pub fn new(seed: u64, pool: Vec<Key>, timed: bool, start: u64) -> Self {
        TraceGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            pool,
            timed,
            now: start,
            last_scan: start,
            pending: Vec::new(),
            max_advance: 40,
            deletes: true,
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn advance(&mut self, mut units: u64) {
        while self.now + units - self.last_scan > SCAN_PERIOD as u64 {
            let step = self.last_scan + SCAN_PERIOD as u64 - self.now;
            self.pending.push(Op::Advance { units: step });
            self.pending.push(Op::Scan);
            self.now += step;
            self.last_scan = self.now;
            units -= step;
        }
        self.pending.push(Op::Advance { units });
        self.now += units;
    }

    pub fn next_op(&mut self) -> Op {
        if let Some(op) = self.pending.pop() {
            return op;
        }
        let key = self.pool[self.rng.random_range(0..self.pool.len())];
        let roll: f64 = self.rng.random();
        if self.timed && roll < 0.15 {
            let units = self.rng.random_range(0..=self.max_advance);
            self.advance(units);
            self.pending.reverse();
            self.pending.pop().unwrap()
        } else if roll < 0.55 {
            let ttl = self.timed.then(|| self.rng.random_range(1..=MAX_DELAY));
            Op::Insert { key, value: Value::from_words(self.rng.random(), self.rng.random()), ttl }
        } else if roll < 0.8 || !self.deletes {
            Op::Lookup { key }
        } else {
            Op::Delete { key }
        }
    }

    pub fn take(&mut self, n: usize) -> Vec<Op> {
        (0..n).map(|_| self.next_op()).collect()
    }
}
