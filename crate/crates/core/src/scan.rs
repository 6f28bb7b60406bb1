use crate::edge_membership::EdgeKey;
use crate::kmer_model::{Mer, RollingHashState, Strand, StrandMode, WindowHasher, MAX_FUNCTIONS};
use crate::pipeline::chunking::Chunk;
use crate::sequence_io::{complement, BaseCode};

/// Hashing parameters shared by every scan of a run.
pub(crate) struct ScanParams<'a> {
    pub k: usize,
    pub mode: StrandMode,
    /// Window-k hasher over the Bloom functions followed by the bucket
    /// function.
    pub hasher: &'a WindowHasher,
    pub bloom_hashes: usize,
}

impl ScanParams<'_> {
    pub fn bucket_function(&self) -> usize {
        self.bloom_hashes
    }
}

/// Both strands of the k-mer at one position of a chunk, with fingerprints.
pub(crate) struct KmerWindow {
    pub pos: usize,
    pub fwd: Mer,
    pub rc: Mer,
    fwd_h: RollingHashState,
    rc_h: RollingHashState,
    scratch: Vec<BaseCode>,
}

impl KmerWindow {
    pub fn at(p: &ScanParams, chunk: &Chunk, pos: usize) -> Self {
        let scratch: Vec<BaseCode> = chunk.codes(pos..pos + p.k).collect();
        let fwd = Mer::from_codes(&scratch);
        let (rc, rc_h) = match p.mode {
            StrandMode::Double => (fwd.reverse_complement(), p.hasher.init_reverse(&scratch)),
            StrandMode::Single => (fwd, p.hasher.init(&scratch)),
        };
        KmerWindow {
            pos,
            fwd,
            rc,
            fwd_h: p.hasher.init(&scratch),
            rc_h,
            scratch,
        }
    }

    #[inline]
    pub fn advance(&mut self, p: &ScanParams, chunk: &Chunk) {
        let out = chunk.base(self.pos);
        let inc = chunk.base(self.pos + p.k);
        self.fwd.roll(inc);
        p.hasher.roll(&mut self.fwd_h, out, inc);
        if p.mode == StrandMode::Double {
            self.rc.roll_reverse(inc);
            p.hasher.roll_reverse(&mut self.rc_h, out, inc);
        }
        self.pos += 1;
    }

    /// Moves to `target` (not before the current position), rolling over
    /// short gaps and re-initializing over long ones.
    #[inline]
    pub fn seek(&mut self, p: &ScanParams, chunk: &Chunk, target: usize) {
        debug_assert!(target >= self.pos);
        if target - self.pos <= p.k {
            while self.pos < target {
                self.advance(p, chunk);
            }
        } else {
            self.scratch.clear();
            self.scratch.extend(chunk.codes(target..target + p.k));
            self.fwd = Mer::from_codes(&self.scratch);
            self.fwd_h = p.hasher.init(&self.scratch);
            if p.mode == StrandMode::Double {
                self.rc = self.fwd.reverse_complement();
                self.rc_h = p.hasher.init_reverse(&self.scratch);
            }
            self.pos = target;
        }
    }

    #[inline]
    fn key_is_reverse(&self, mode: StrandMode) -> bool {
        mode == StrandMode::Double && self.rc < self.fwd
    }

    #[inline]
    pub fn key(&self, mode: StrandMode) -> (Mer, Strand) {
        if self.key_is_reverse(mode) {
            (self.rc, Strand::Reverse)
        } else {
            (self.fwd, Strand::Forward)
        }
    }

    /// Digest of the key form of this k-mer under `function`.
    #[inline]
    pub fn key_digest(&self, p: &ScanParams, function: usize) -> u64 {
        let st = if self.key_is_reverse(p.mode) {
            &self.rc_h
        } else {
            &self.fwd_h
        };
        p.hasher.digest(st, function)
    }

    /// Key form of the out-edge `v · c`.
    #[inline]
    pub fn out_edge(&self, p: &ScanParams, c: BaseCode) -> EdgeKey {
        let fwd = self.fwd.extend_right(c);
        let mut digests = [0u64; MAX_FUNCTIONS];
        if p.mode == StrandMode::Double {
            // reverse complement of v·c is comp(c)·rc(v)
            let rc = self.rc.extend_left(complement(c));
            if rc < fwd {
                for (i, d) in digests.iter_mut().enumerate().take(p.bloom_hashes) {
                    *d = p.hasher.digest_extend_left(&self.rc_h, i, complement(c));
                }
                return EdgeKey { mer: rc, digests };
            }
        }
        for (i, d) in digests.iter_mut().enumerate().take(p.bloom_hashes) {
            *d = p.hasher.digest_extend_right(&self.fwd_h, i, c);
        }
        EdgeKey { mer: fwd, digests }
    }

    /// Key form of the in-edge `c · v`.
    #[inline]
    pub fn in_edge(&self, p: &ScanParams, c: BaseCode) -> EdgeKey {
        let fwd = self.fwd.extend_left(c);
        let mut digests = [0u64; MAX_FUNCTIONS];
        if p.mode == StrandMode::Double {
            // reverse complement of c·v is rc(v)·comp(c)
            let rc = self.rc.extend_right(complement(c));
            if rc < fwd {
                for (i, d) in digests.iter_mut().enumerate().take(p.bloom_hashes) {
                    *d = p.hasher.digest_extend_right(&self.rc_h, i, complement(c));
                }
                return EdgeKey { mer: rc, digests };
            }
        }
        for (i, d) in digests.iter_mut().enumerate().take(p.bloom_hashes) {
            *d = p.hasher.digest_extend_left(&self.fwd_h, i, c);
        }
        EdgeKey { mer: fwd, digests }
    }
}
