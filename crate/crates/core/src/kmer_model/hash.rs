use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sequence_io::{complement, BaseCode};

/// Upper bound on the number of functions a family can hold: up to sixteen
/// Bloom filter functions plus the partition bucket function.
pub const MAX_FUNCTIONS: usize = 17;

/// One polynomial hash `sum(T[x_j] * B^(w-1-j)) mod 2^64`.
#[derive(Clone, Copy, Debug)]
struct PolyHash {
    base: u64,
    inv_base: u64,
    table: [u64; 4],
    seed: u64,
}

impl PolyHash {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let base = rng.gen::<u64>() | 1;
        // Newton iteration for the inverse mod 2^64; odd numbers are units.
        let mut inv = base;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(base.wrapping_mul(inv)));
        }
        debug_assert_eq!(base.wrapping_mul(inv), 1);
        PolyHash {
            base,
            inv_base: inv,
            table: [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
            seed: rng.gen(),
        }
    }

    #[inline]
    fn symbol(&self, code: BaseCode) -> u64 {
        self.table[code as usize]
    }
}

/// murmur3's 64-bit finalizer.
#[inline]
fn fmix64(mut x: u64) -> u64 {
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    x ^ (x >> 33)
}

/// A seeded family of independent polynomial rolling hash functions.
#[derive(Clone, Debug)]
pub struct HashFamily {
    funcs: Vec<PolyHash>,
}

impl HashFamily {
    pub fn new(count: usize, seed: u64) -> Self {
        assert!(
            (1..=MAX_FUNCTIONS).contains(&count),
            "hash family size {count} outside 1..={MAX_FUNCTIONS}"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HashFamily {
            funcs: (0..count).map(|_| PolyHash::random(&mut rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// Hasher for windows of exactly `len` bases.
    pub fn window(&self, len: usize) -> WindowHasher {
        assert!(len >= 1);
        let powers = |exp: usize| {
            self.funcs
                .iter()
                .map(|f| (0..exp).fold(1u64, |acc, _| acc.wrapping_mul(f.base)))
                .collect::<Vec<_>>()
        };
        WindowHasher {
            funcs: self.funcs.clone(),
            len,
            top: powers(len - 1),
            full: powers(len),
        }
    }
}

/// Raw fingerprints of one window under every function of a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RollingHashState {
    raw: [u64; MAX_FUNCTIONS],
    window: u32,
}

impl RollingHashState {
    pub fn window_len(&self) -> usize {
        self.window as usize
    }
}

/// Initializes, rolls and finalizes fingerprints for a fixed window length.
///
/// Every roll costs one multiply-add per function regardless of the window
/// length. Fingerprints of the one-base extensions `v·c` and `c·v` are also
/// O(1) from the state of `v`, which is how the junction filter hashes the
/// eight candidate (k+1)-mers around a k-mer.
#[derive(Clone, Debug)]
pub struct WindowHasher {
    funcs: Vec<PolyHash>,
    len: usize,
    top: Vec<u64>,
    full: Vec<u64>,
}

impl WindowHasher {
    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn functions(&self) -> usize {
        self.funcs.len()
    }

    pub fn init(&self, window: &[BaseCode]) -> RollingHashState {
        assert_eq!(window.len(), self.len, "window length mismatch");
        let mut raw = [0u64; MAX_FUNCTIONS];
        for (r, f) in raw.iter_mut().zip(&self.funcs) {
            *r = window.iter().fold(0u64, |h, &c| {
                h.wrapping_mul(f.base).wrapping_add(f.symbol(c))
            });
        }
        RollingHashState {
            raw,
            window: self.len as u32,
        }
    }

    /// Fingerprints of the reverse complement of `window`.
    pub fn init_reverse(&self, window: &[BaseCode]) -> RollingHashState {
        let rc: Vec<BaseCode> = window.iter().rev().map(|&c| complement(c)).collect();
        self.init(&rc)
    }

    /// Shift the window right: `out` leaves on the left, `inc` enters on the
    /// right.
    #[inline]
    pub fn roll(&self, state: &mut RollingHashState, out: BaseCode, inc: BaseCode) {
        for (i, f) in self.funcs.iter().enumerate() {
            let r = &mut state.raw[i];
            *r = r
                .wrapping_sub(f.symbol(out).wrapping_mul(self.top[i]))
                .wrapping_mul(f.base)
                .wrapping_add(f.symbol(inc));
        }
    }

    /// Companion of [`WindowHasher::roll`] for the reverse-complement strand
    /// of the same window.
    #[inline]
    pub fn roll_reverse(&self, state: &mut RollingHashState, out: BaseCode, inc: BaseCode) {
        for (i, f) in self.funcs.iter().enumerate() {
            let r = &mut state.raw[i];
            *r = r
                .wrapping_sub(f.symbol(complement(out)))
                .wrapping_mul(f.inv_base)
                .wrapping_add(f.symbol(complement(inc)).wrapping_mul(self.top[i]));
        }
    }

    /// Final digest of function `index`. Panics if `index` is not a function
    /// of this family.
    #[inline]
    pub fn digest(&self, state: &RollingHashState, index: usize) -> u64 {
        assert!(
            index < self.funcs.len(),
            "hash function {index} requested from a family of {}",
            self.funcs.len()
        );
        fmix64(state.raw[index] ^ self.funcs[index].seed)
    }

    /// Digest of `window · code` under function `index`.
    #[inline]
    pub fn digest_extend_right(
        &self,
        state: &RollingHashState,
        index: usize,
        code: BaseCode,
    ) -> u64 {
        let f = &self.funcs[index];
        let raw = state.raw[index]
            .wrapping_mul(f.base)
            .wrapping_add(f.symbol(code));
        fmix64(raw ^ f.seed)
    }

    /// Digest of `code · window` under function `index`.
    #[inline]
    pub fn digest_extend_left(
        &self,
        state: &RollingHashState,
        index: usize,
        code: BaseCode,
    ) -> u64 {
        let f = &self.funcs[index];
        let raw = f
            .symbol(code)
            .wrapping_mul(self.full[index])
            .wrapping_add(state.raw[index]);
        fmix64(raw ^ f.seed)
    }
}
