use std::cmp::Ordering;
use std::fmt;

/// 2-bit code of a nucleotide: A=0, C=1, G=2, T=3, so numeric order is
/// lexicographic order and `3 - code` is the Watson-Crick complement.
pub type BaseCode = u8;

const BASES_PER_WORD: usize = 32;

#[inline]
pub fn encode_base(ascii: u8) -> Option<BaseCode> {
    match ascii {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

#[inline]
pub fn decode_base(code: BaseCode) -> u8 {
    b"ACGT"[(code & 3) as usize]
}

#[inline]
pub fn complement(code: BaseCode) -> BaseCode {
    3 - code
}

/// A nucleotide string packed two bits per base, 32 bases per word.
///
/// Base `i` lives in word `i / 32` at bit offset `2 * (i % 32)`. Bits past
/// `len` are always zero so derived equality and hashing are content based.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct DnaString {
    words: Vec<u64>,
    len: usize,
}

impl DnaString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bases: usize) -> Self {
        DnaString {
            words: Vec::with_capacity(bases.div_ceil(BASES_PER_WORD)),
            len: 0,
        }
    }

    /// Packs an ASCII string, returning `None` if it holds anything but ACGT
    /// (either case).
    pub fn from_ascii(ascii: &[u8]) -> Option<Self> {
        let mut out = Self::with_capacity(ascii.len());
        for &c in ascii {
            out.push(encode_base(c)?);
        }
        Some(out)
    }

    pub fn from_codes(codes: &[BaseCode]) -> Self {
        let mut out = Self::with_capacity(codes.len());
        for &c in codes {
            out.push(c);
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn push(&mut self, code: BaseCode) {
        let slot = self.len % BASES_PER_WORD;
        if slot == 0 {
            self.words.push(0);
        }
        *self.words.last_mut().unwrap() |= u64::from(code & 3) << (2 * slot);
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, i: usize) -> BaseCode {
        debug_assert!(i < self.len);
        ((self.words[i / BASES_PER_WORD] >> (2 * (i % BASES_PER_WORD))) & 3) as BaseCode
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = BaseCode> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copy of bases `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> DnaString {
        assert!(
            start <= end && end <= self.len,
            "slice {start}..{end} out of 0..{}",
            self.len
        );
        let mut out = Self::with_capacity(end - start);
        let shift = 2 * (start % BASES_PER_WORD);
        let first = start / BASES_PER_WORD;
        let n = end - start;
        let nwords = n.div_ceil(BASES_PER_WORD);
        for w in 0..nwords {
            let lo = self.words[first + w] >> shift;
            let hi = if shift > 0 {
                self.words
                    .get(first + w + 1)
                    .map_or(0, |x| x << (64 - shift))
            } else {
                0
            };
            out.words.push(lo | hi);
        }
        out.len = n;
        out.clear_tail();
        out
    }

    pub fn reverse_complement(&self) -> DnaString {
        let mut out = Self::with_capacity(self.len);
        for i in (0..self.len).rev() {
            out.push(complement(self.get(i)));
        }
        out
    }

    pub fn to_ascii(&self) -> Vec<u8> {
        self.iter().map(decode_base).collect()
    }

    /// Lexicographic comparison over A < C < G < T.
    pub fn cmp_lex(&self, other: &DnaString) -> Ordering {
        self.iter().cmp(other.iter())
    }

    pub fn shrink_to_fit(&mut self) {
        self.words.shrink_to_fit();
    }

    /// Heap bytes held by the packed representation.
    pub fn packed_bytes(&self) -> usize {
        self.words.len() * 8
    }

    fn clear_tail(&mut self) {
        let used = self.len % BASES_PER_WORD;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (2 * used)) - 1;
            }
        }
        self.words.truncate(self.len.div_ceil(BASES_PER_WORD));
    }
}

impl fmt::Display for DnaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // ASCII by construction
        f.write_str(std::str::from_utf8(&self.to_ascii()).unwrap())
    }
}

impl fmt::Debug for DnaString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DnaString({self})")
    }
}
