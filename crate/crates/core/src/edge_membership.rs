//! The (k+1)-mer set consulted by the junction filter, in a probabilistic and
//! an exact flavour.
//!
//! Both structures take concurrent inserts during the fill phase and
//! concurrent queries during the check phase. Callers separate the two phases
//! with a barrier, so inserts never race with queries.

use std::hash::{BuildHasherDefault, Hasher};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::RwLock;

use rustc_hash::FxHasher;

use crate::error::{Error, Result};
use crate::kmer_model::{words_for, Mer, MAX_FUNCTIONS};

/// A key-form (k+1)-mer together with its hash digests.
#[derive(Clone, Copy, Debug)]
pub struct EdgeKey {
    pub mer: Mer,
    pub digests: [u64; MAX_FUNCTIONS],
}

pub trait EdgeMembership: Sync {
    fn insert(&self, key: &EdgeKey);
    fn contains(&self, key: &EdgeKey) -> bool;
}

/// Smallest and largest accepted filter sizes, as log2 of the bit count.
pub const MIN_FILTER_LOG2: u32 = 6;
pub const MAX_FILTER_LOG2: u32 = 40;

/// Bloom filter over a power-of-two bit array.
///
/// Bits are set with atomic `fetch_or`, so concurrent inserts never lose an
/// update and there are no false negatives under any interleaving.
#[derive(Debug)]
pub struct BloomFilter {
    bits: Vec<AtomicU64>,
    mask: u64,
    hashes: usize,
    inserts: AtomicU64,
    queries: AtomicU64,
}

impl BloomFilter {
    pub fn new(log2_bits: u32, hashes: usize) -> Result<Self> {
        if !(MIN_FILTER_LOG2..=MAX_FILTER_LOG2).contains(&log2_bits) {
            return Err(Error::config(format!(
                "filter size 2^{log2_bits} outside 2^{MIN_FILTER_LOG2}..=2^{MAX_FILTER_LOG2} bits"
            )));
        }
        if !(1..MAX_FUNCTIONS).contains(&hashes) {
            return Err(Error::config(format!(
                "hash count {hashes} outside 1..={}",
                MAX_FUNCTIONS - 1
            )));
        }
        let words = 1usize << (log2_bits - 6);
        Ok(BloomFilter {
            bits: (0..words).map(|_| AtomicU64::new(0)).collect(),
            mask: (1u64 << log2_bits) - 1,
            hashes,
            inserts: AtomicU64::new(0),
            queries: AtomicU64::new(0),
        })
    }

    pub fn bit_len(&self) -> u64 {
        self.mask + 1
    }

    pub fn hashes(&self) -> usize {
        self.hashes
    }

    /// Sets the bits for `digests[..h]`. Returns true if at least one bit
    /// was previously clear, i.e. the key was certainly absent before.
    #[inline]
    pub fn insert_digests(&self, digests: &[u64]) -> bool {
        let mut fresh = false;
        for &d in &digests[..self.hashes] {
            let bit = d & self.mask;
            let m = 1u64 << (bit & 63);
            let prev = self.bits[(bit >> 6) as usize].fetch_or(m, Ordering::Relaxed);
            fresh |= prev & m == 0;
        }
        fresh
    }

    #[inline]
    pub fn contains_digests(&self, digests: &[u64]) -> bool {
        digests[..self.hashes].iter().all(|&d| {
            let bit = d & self.mask;
            self.bits[(bit >> 6) as usize].load(Ordering::Relaxed) & (1u64 << (bit & 63)) != 0
        })
    }

    /// Fraction of bits set.
    pub fn fill_ratio(&self) -> f64 {
        let ones: u64 = self
            .bits
            .iter()
            .map(|w| u64::from(w.load(Ordering::Relaxed).count_ones()))
            .sum();
        ones as f64 / self.bit_len() as f64
    }

    /// Sets every bit; the filter then answers true for everything.
    pub fn saturate(&self) {
        for w in &self.bits {
            w.store(!0, Ordering::Relaxed);
        }
    }

    /// Adds bulk activity counts gathered by a worker.
    pub fn record_activity(&self, inserts: u64, queries: u64) {
        self.inserts.fetch_add(inserts, Ordering::Relaxed);
        self.queries.fetch_add(queries, Ordering::Relaxed);
    }

    pub fn inserts(&self) -> u64 {
        self.inserts.load(Ordering::Relaxed)
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn memory_bytes(&self) -> usize {
        self.bits.len() * 8
    }
}

impl EdgeMembership for BloomFilter {
    #[inline]
    fn insert(&self, key: &EdgeKey) {
        self.insert_digests(&key.digests);
    }

    #[inline]
    fn contains(&self, key: &EdgeKey) -> bool {
        self.contains_digests(&key.digests)
    }
}

type FxSet<K> = std::collections::HashSet<K, BuildHasherDefault<FxHasher>>;

const SHARD_BITS: u32 = 6;

struct Sharded<const W: usize> {
    shards: Vec<RwLock<FxSet<[u64; W]>>>,
}

impl<const W: usize> Sharded<W> {
    fn new() -> Self {
        Sharded {
            shards: (0..1 << SHARD_BITS).map(|_| RwLock::default()).collect(),
        }
    }

    #[inline]
    fn key(mer: &Mer) -> [u64; W] {
        mer.words().try_into().expect("edge key width")
    }

    #[inline]
    fn shard(&self, key: &[u64; W]) -> &RwLock<FxSet<[u64; W]>> {
        let mut h = FxHasher::default();
        h.write_u64(key[0] ^ key[W - 1].rotate_left(29));
        let mixed = h.finish().wrapping_mul(0x9e37_79b9_7f4a_7c15);
        &self.shards[(mixed >> (64 - SHARD_BITS)) as usize]
    }

    fn insert(&self, mer: &Mer) -> bool {
        let key = Self::key(mer);
        self.shard(&key).write().unwrap().insert(key)
    }

    fn contains(&self, mer: &Mer) -> bool {
        let key = Self::key(mer);
        self.shard(&key).read().unwrap().contains(&key)
    }

    fn memory_bytes(&self) -> usize {
        self.shards
            .iter()
            .map(|s| s.read().unwrap().capacity() * (8 * W + 1))
            .sum()
    }
}

enum Table {
    W1(Sharded<1>),
    W2(Sharded<2>),
    W3(Sharded<3>),
    W4(Sharded<4>),
    W5(Sharded<5>),
}

macro_rules! dispatch {
    ($table:expr, $s:ident => $body:expr) => {
        match $table {
            Table::W1($s) => $body,
            Table::W2($s) => $body,
            Table::W3($s) => $body,
            Table::W4($s) => $body,
            Table::W5($s) => $body,
        }
    };
}

/// Exact concurrent set of (k+1)-mers, sharded behind read-write locks.
///
/// Keys are stored as just the words their length needs (one word up to 32
/// bases). An optional key limit turns runaway growth into a reportable
/// overflow instead of an allocation failure: once reached, further new keys
/// are dropped and [`ExactEdgeTable::overflowed`] reports true.
pub struct ExactEdgeTable {
    table: Table,
    limit: Option<usize>,
    count: AtomicUsize,
    overflow: AtomicBool,
}

impl ExactEdgeTable {
    pub fn new(edge_len: usize, limit: Option<usize>) -> Self {
        let table = match words_for(edge_len) {
            0 | 1 => Table::W1(Sharded::new()),
            2 => Table::W2(Sharded::new()),
            3 => Table::W3(Sharded::new()),
            4 => Table::W4(Sharded::new()),
            _ => Table::W5(Sharded::new()),
        };
        ExactEdgeTable {
            table,
            limit,
            count: AtomicUsize::new(0),
            overflow: AtomicBool::new(false),
        }
    }

    /// Number of distinct keys inserted.
    pub fn len(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overflowed(&self) -> bool {
        self.overflow.load(Ordering::Relaxed)
    }

    pub fn limit(&self) -> Option<usize> {
        self.limit
    }

    pub fn memory_bytes(&self) -> usize {
        dispatch!(&self.table, s => s.memory_bytes())
    }

    pub fn insert_mer(&self, mer: &Mer) {
        if let Some(limit) = self.limit {
            if self.len() >= limit {
                if !self.contains_mer(mer) {
                    self.overflow.store(true, Ordering::Relaxed);
                }
                return;
            }
        }
        if dispatch!(&self.table, s => s.insert(mer)) {
            self.count.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn contains_mer(&self, mer: &Mer) -> bool {
        dispatch!(&self.table, s => s.contains(mer))
    }
}

impl EdgeMembership for ExactEdgeTable {
    #[inline]
    fn insert(&self, key: &EdgeKey) {
        self.insert_mer(&key.mer);
    }

    #[inline]
    fn contains(&self, key: &EdgeKey) -> bool {
        self.contains_mer(&key.mer)
    }
}
