//! k-mer and (k+1)-mer keys, strand handling and the rolling hash family.

mod hash;

use std::cmp::Ordering;
use std::fmt;

pub use hash::{HashFamily, RollingHashState, WindowHasher, MAX_FUNCTIONS};

use crate::sequence_io::{complement, decode_base, encode_base, BaseCode, DnaString};

/// Largest supported k. Edge keys hold up to `K_MAX + 1` bases.
pub const K_MAX: usize = 128;

/// Words needed for a `K_MAX + 1` base key.
pub const MER_WORDS: usize = (2 * (K_MAX + 1)).div_ceil(64);

/// Number of 64-bit words a key of `len` bases occupies.
pub const fn words_for(len: usize) -> usize {
    (2 * len).div_ceil(64)
}

/// A fixed-length nucleotide window of up to `K_MAX + 1` bases.
///
/// Bases are packed most-significant first: base 0 occupies the top two bits
/// of word 0. Unused low bits are zero, so for equal lengths the derived
/// ordering over the words is lexicographic order over A < C < G < T. The
/// same type serves as the k-mer (vertex) and the (k+1)-mer (edge) key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mer {
    words: [u64; MER_WORDS],
    len: u16,
}

impl Mer {
    pub fn empty(len: usize) -> Mer {
        assert!(len <= K_MAX + 1, "window of {len} bases exceeds K_MAX + 1");
        Mer {
            words: [0; MER_WORDS],
            len: len as u16,
        }
    }

    pub fn from_codes(codes: &[BaseCode]) -> Mer {
        let mut m = Mer::empty(codes.len());
        for (i, &c) in codes.iter().enumerate() {
            m.set(i, c);
        }
        m
    }

    pub fn from_ascii(ascii: &[u8]) -> Option<Mer> {
        if ascii.len() > K_MAX + 1 {
            return None;
        }
        let mut m = Mer::empty(ascii.len());
        for (i, &c) in ascii.iter().enumerate() {
            m.set(i, encode_base(c)?);
        }
        Some(m)
    }

    /// The window `data[start..start + len]`.
    pub fn from_dna(data: &DnaString, start: usize, len: usize) -> Mer {
        let mut m = Mer::empty(len);
        for i in 0..len {
            m.set(i, data.get(start + i));
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words[..words_for(self.len())]
    }

    #[inline]
    pub fn get(&self, i: usize) -> BaseCode {
        ((self.words[i / 32] >> (62 - 2 * (i % 32))) & 3) as BaseCode
    }

    /// Sets base `i`; the slot must currently be zero.
    #[inline]
    fn set(&mut self, i: usize, code: BaseCode) {
        self.words[i / 32] |= u64::from(code) << (62 - 2 * (i % 32));
    }

    #[inline]
    fn shift_left_one(&mut self, nwords: usize) {
        for w in 0..nwords {
            let carry = if w + 1 < MER_WORDS {
                self.words[w + 1] >> 62
            } else {
                0
            };
            self.words[w] = (self.words[w] << 2) | carry;
        }
    }

    #[inline]
    fn shift_right_one(&mut self, nwords: usize) {
        for w in (0..nwords).rev() {
            let carry = if w > 0 { self.words[w - 1] << 62 } else { 0 };
            self.words[w] = (self.words[w] >> 2) | carry;
        }
    }

    #[inline]
    fn clear_from(&mut self, len: usize) {
        let w = len / 32;
        if w < MER_WORDS {
            let used = len % 32;
            self.words[w] &= if used == 0 {
                0
            } else {
                !0u64 << (64 - 2 * used)
            };
            for x in &mut self.words[w + 1..] {
                *x = 0;
            }
        }
    }

    /// Slides the window one base to the right: drops base 0, appends `code`.
    #[inline]
    pub fn roll(&mut self, code: BaseCode) {
        let len = self.len();
        self.shift_left_one(words_for(len));
        self.set(len - 1, code);
    }

    /// Reverse-complement counterpart of [`Mer::roll`]: when the forward
    /// window drops `out` and gains `inc`, its reverse complement drops its
    /// last base and gains `complement(inc)` in front.
    #[inline]
    pub fn roll_reverse(&mut self, inc: BaseCode) {
        let len = self.len();
        self.shift_right_one(words_for(len + 1).min(MER_WORDS));
        self.clear_from(len);
        self.set(0, complement(inc));
    }

    /// `self · code`, one base longer.
    #[inline]
    pub fn extend_right(&self, code: BaseCode) -> Mer {
        let mut m = *self;
        m.len += 1;
        m.set(self.len(), code);
        m
    }

    /// `code · self`, one base longer.
    #[inline]
    pub fn extend_left(&self, code: BaseCode) -> Mer {
        let mut m = *self;
        m.len += 1;
        m.shift_right_one(words_for(m.len()));
        m.set(0, code);
        m
    }

    /// The first `len` bases.
    pub fn prefix(&self, len: usize) -> Mer {
        let mut m = *self;
        m.len = len as u16;
        m.clear_from(len);
        m
    }

    /// The last `len` bases.
    pub fn suffix(&self, len: usize) -> Mer {
        let mut m = *self;
        for _ in 0..self.len() - len {
            m.shift_left_one(words_for(self.len()));
        }
        m.len = len as u16;
        m.clear_from(len);
        m
    }

    pub fn reverse_complement(&self) -> Mer {
        let len = self.len();
        let mut m = Mer::empty(len);
        for i in 0..len {
            m.set(i, complement(self.get(len - 1 - i)));
        }
        m
    }

    pub fn is_palindrome(&self) -> bool {
        *self == self.reverse_complement()
    }

    pub fn to_ascii(&self) -> Vec<u8> {
        (0..self.len()).map(|i| decode_base(self.get(i))).collect()
    }

    pub fn to_dna(&self) -> DnaString {
        DnaString::from_codes(&(0..self.len()).map(|i| self.get(i)).collect::<Vec<_>>())
    }
}

impl Ord for Mer {
    fn cmp(&self, other: &Self) -> Ordering {
        self.words.cmp(&other.words).then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for Mer {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Mer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.to_ascii()).unwrap())
    }
}

impl fmt::Debug for Mer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mer({self})")
    }
}

/// Orientation of an occurrence relative to its canonical form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strand {
    Forward,
    Reverse,
}

impl Strand {
    pub fn flip(self) -> Strand {
        match self {
            Strand::Forward => Strand::Reverse,
            Strand::Reverse => Strand::Forward,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Strand::Forward => '+',
            Strand::Reverse => '-',
        }
    }
}

/// Whether the graph is built over the input strands only or over the
/// comprehensive graph of both strands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StrandMode {
    Single,
    #[default]
    Double,
}

impl StrandMode {
    pub fn name(self) -> &'static str {
        match self {
            StrandMode::Single => "single",
            StrandMode::Double => "double",
        }
    }

    /// Key form of a window given both of its strands: the window itself in
    /// single-strand mode, the lexicographically smaller strand otherwise.
    /// Palindromes report [`Strand::Forward`].
    #[inline]
    pub fn key(self, fwd: &Mer, rc: &Mer) -> (Mer, Strand) {
        match self {
            StrandMode::Single => (*fwd, Strand::Forward),
            StrandMode::Double if rc < fwd => (*rc, Strand::Reverse),
            StrandMode::Double => (*fwd, Strand::Forward),
        }
    }

    pub fn key_of(self, x: &Mer) -> (Mer, Strand) {
        self.key(x, &x.reverse_complement())
    }
}

/// `min(x, reverse_complement(x))`.
pub fn normalize(x: &Mer) -> Mer {
    let rc = x.reverse_complement();
    if rc < *x {
        rc
    } else {
        *x
    }
}
