//! Junction candidate filtering.
//!
//! A [`MarkArray`] holds one flag per k-mer start of every segment. A filter
//! pass first stores every (k+1)-mer touching a marked position in an
//! [`EdgeMembership`] structure, then, behind a barrier, counts the in- and
//! out-degree of every marked k-mer by probing its eight possible flanking
//! (k+1)-mers and unmarks it when both degrees are exactly one. Sentinel
//! k-mers (the first or last k-mer of any segment) are never unmarked.
//!
//! With an exact table the surviving marks are exactly the junction positions
//! among the input marks. With a Bloom filter false positives can only keep
//! extra marks alive, so a junction is never lost.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rustc_hash::FxHashSet;

use crate::edge_membership::{BloomFilter, EdgeMembership, ExactEdgeTable};
use crate::error::{Error, Result};
use crate::kmer_model::{HashFamily, Mer, StrandMode, WindowHasher, K_MAX, MAX_FUNCTIONS};
use crate::pipeline::chunking::{run_chunked, Chunk, Execution};
use crate::scan::{KmerWindow, ScanParams};
use crate::sequence_io::SequenceSet;

/// Candidate junction flags, one bit per k-mer start of each segment.
///
/// Bits are atomics so workers can clear the positions they own without
/// locking; ownership (not the atomics) is what keeps writers disjoint.
pub struct MarkArray {
    segments: Vec<SegmentMarks>,
}

struct SegmentMarks {
    words: Vec<AtomicU64>,
    positions: usize,
}

impl MarkArray {
    pub fn new(input: &SequenceSet, k: usize, marked: bool) -> Self {
        MarkArray {
            segments: input
                .segments()
                .map(|s| {
                    let positions = (s.len() + 1).saturating_sub(k);
                    let words = (0..positions.div_ceil(64))
                        .map(|w| {
                            let fill = if !marked {
                                0
                            } else if (w + 1) * 64 <= positions {
                                !0
                            } else {
                                (1u64 << (positions % 64)) - 1
                            };
                            AtomicU64::new(fill)
                        })
                        .collect();
                    SegmentMarks { words, positions }
                })
                .collect(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    pub fn positions(&self, segment: usize) -> usize {
        self.segments[segment].positions
    }

    #[inline]
    pub fn is_marked(&self, segment: usize, pos: usize) -> bool {
        let s = &self.segments[segment];
        debug_assert!(pos < s.positions);
        s.words[pos / 64].load(Ordering::Relaxed) & (1 << (pos % 64)) != 0
    }

    #[inline]
    pub fn mark(&self, segment: usize, pos: usize) {
        debug_assert!(pos < self.segments[segment].positions);
        self.segments[segment].words[pos / 64].fetch_or(1 << (pos % 64), Ordering::Relaxed);
    }

    #[inline]
    pub fn unmark(&self, segment: usize, pos: usize) {
        self.segments[segment].words[pos / 64].fetch_and(!(1 << (pos % 64)), Ordering::Relaxed);
    }

    pub fn count(&self) -> usize {
        self.segments
            .iter()
            .flat_map(|s| &s.words)
            .map(|w| w.load(Ordering::Relaxed).count_ones() as usize)
            .sum()
    }

    /// Marked positions of `segment` inside `range`, ascending.
    pub fn marked_in(
        &self,
        segment: usize,
        range: std::ops::Range<usize>,
    ) -> impl Iterator<Item = usize> + '_ {
        let s = &self.segments[segment];
        let end = range.end.min(s.positions);
        let start = range.start.min(end);
        let (first, last) = (start / 64, end.div_ceil(64));
        (first..last).flat_map(move |w| {
            let mut bits = s.words[w].load(Ordering::Relaxed);
            let base = w * 64;
            if base < start {
                bits &= !0u64 << (start - base);
            }
            if base + 64 > end {
                bits &= (1u64 << (end - base)) - 1;
            }
            std::iter::from_fn(move || {
                (bits != 0).then(|| {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    base + b
                })
            })
        })
    }

    pub fn marked_positions(&self, segment: usize) -> impl Iterator<Item = usize> + '_ {
        self.marked_in(segment, 0..self.segments[segment].positions)
    }

    pub fn union_with(&mut self, other: &MarkArray) {
        assert_eq!(self.segments.len(), other.segments.len());
        for (a, b) in self.segments.iter_mut().zip(&other.segments) {
            for (x, y) in a.words.iter_mut().zip(&b.words) {
                *x.get_mut() |= y.load(Ordering::Relaxed);
            }
        }
    }

    pub fn is_superset_of(&self, other: &MarkArray) -> bool {
        self.segments.iter().zip(&other.segments).all(|(a, b)| {
            a.words.iter().zip(&b.words).all(|(x, y)| {
                let (x, y) = (x.load(Ordering::Relaxed), y.load(Ordering::Relaxed));
                x & y == y
            })
        })
    }

    pub fn memory_bytes(&self) -> usize {
        self.segments.iter().map(|s| s.words.len() * 8).sum()
    }

    /// Checks candidate-set closure: positions sharing a key k-mer are either
    /// all marked or all unmarked. Returns an offending k-mer if not.
    pub fn closure_violation(
        &self,
        input: &SequenceSet,
        k: usize,
        mode: StrandMode,
    ) -> Option<Mer> {
        let mut state: rustc_hash::FxHashMap<Mer, bool> = Default::default();
        for (seg_idx, seg) in input.segments().enumerate() {
            for pos in 0..self.positions(seg_idx) {
                let (key, _) = mode.key_of(&Mer::from_dna(&seg.data, pos, k));
                let m = self.is_marked(seg_idx, pos);
                if *state.entry(key).or_insert(m) != m {
                    return Some(key);
                }
            }
        }
        None
    }
}

impl Clone for MarkArray {
    fn clone(&self) -> Self {
        MarkArray {
            segments: self
                .segments
                .iter()
                .map(|s| SegmentMarks {
                    words: s
                        .words
                        .iter()
                        .map(|w| AtomicU64::new(w.load(Ordering::Relaxed)))
                        .collect(),
                    positions: s.positions,
                })
                .collect(),
        }
    }
}

impl PartialEq for MarkArray {
    fn eq(&self, other: &Self) -> bool {
        self.segments.len() == other.segments.len()
            && self.segments.iter().zip(&other.segments).all(|(a, b)| {
                a.positions == b.positions
                    && a.words
                        .iter()
                        .zip(&b.words)
                        .all(|(x, y)| x.load(Ordering::Relaxed) == y.load(Ordering::Relaxed))
            })
    }
}

impl std::fmt::Debug for MarkArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut list = f.debug_list();
        for seg in 0..self.segment_count() {
            list.entry(&self.marked_positions(seg).collect::<Vec<_>>());
        }
        list.finish()
    }
}

/// Settings of the filter shared by all passes and rounds.
#[derive(Clone, Debug)]
pub struct FilterParams {
    pub k: usize,
    pub mode: StrandMode,
    pub hash_count: usize,
    pub seed: u64,
    pub workers: usize,
    pub chunk_size: usize,
    /// Optional cap on exact-table keys per round.
    pub table_limit: Option<usize>,
}

impl FilterParams {
    pub fn new(k: usize, mode: StrandMode) -> Self {
        FilterParams {
            k,
            mode,
            hash_count: 4,
            seed: crate::pipeline::DEFAULT_SEED,
            workers: 1,
            chunk_size: crate::pipeline::chunking::DEFAULT_CHUNK_SIZE,
            table_limit: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PassStats {
    pub marks_before: usize,
    pub marks_after: usize,
    pub inserts: u64,
    pub queries: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct TwoPassStats {
    pub first: PassStats,
    pub second: PassStats,
    /// Fill ratio of the first-pass Bloom filter.
    pub bloom_fill: f64,
    /// Distinct (k+1)-mers stored in the exact table.
    pub table_keys: usize,
    pub table_bytes: usize,
}

#[derive(Default)]
struct WorkerTally {
    inserts: u64,
    queries: u64,
}

/// Drives filter passes over one input.
pub struct JunctionFilter<'a> {
    input: &'a SequenceSet,
    k: usize,
    mode: StrandMode,
    hash_count: usize,
    hasher: WindowHasher,
    sentinels: FxHashSet<Mer>,
    exec: Execution,
    table_limit: Option<usize>,
}

impl<'a> JunctionFilter<'a> {
    pub fn new(input: &'a SequenceSet, params: &FilterParams) -> Result<Self> {
        let k = params.k;
        if !(1..=K_MAX).contains(&k) {
            return Err(Error::config(format!("k = {k} outside 1..={K_MAX}")));
        }
        if !(1..MAX_FUNCTIONS).contains(&params.hash_count) {
            return Err(Error::config(format!(
                "hash count {} outside 1..={}",
                params.hash_count,
                MAX_FUNCTIONS - 1
            )));
        }
        if params.chunk_size < 2 * k {
            return Err(Error::config(format!(
                "chunk size {} below 2k = {}",
                params.chunk_size,
                2 * k
            )));
        }
        if let Some(seg) = input.segments().find(|s| s.len() < k) {
            return Err(Error::config(format!(
                "segment of {} bases is shorter than k = {k}",
                seg.len()
            )));
        }
        let family = HashFamily::new(params.hash_count + 1, params.seed);
        let sentinels = input
            .segments()
            .flat_map(|s| {
                [0, s.len() - k].map(|pos| params.mode.key_of(&Mer::from_dna(&s.data, pos, k)).0)
            })
            .collect();
        Ok(JunctionFilter {
            input,
            k,
            mode: params.mode,
            hash_count: params.hash_count,
            hasher: family.window(k),
            sentinels,
            exec: Execution::new(params.workers, params.chunk_size),
            table_limit: params.table_limit,
        })
    }

    pub fn input(&self) -> &SequenceSet {
        self.input
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> StrandMode {
        self.mode
    }

    pub fn hash_count(&self) -> usize {
        self.hash_count
    }

    pub fn execution(&self) -> &Execution {
        &self.exec
    }

    /// True if `key` (a key-form k-mer) is the first or last k-mer of some
    /// segment.
    pub fn is_sentinel(&self, key: &Mer) -> bool {
        self.sentinels.contains(key)
    }

    pub fn all_marked(&self) -> MarkArray {
        MarkArray::new(self.input, self.k, true)
    }

    pub(crate) fn scan_params(&self) -> ScanParams<'_> {
        ScanParams {
            k: self.k,
            mode: self.mode,
            hasher: &self.hasher,
            bloom_hashes: self.hash_count,
        }
    }

    pub(crate) fn for_each_chunk<S, I, F>(&self, init: I, work: F) -> Vec<S>
    where
        S: Send,
        I: Fn() -> S + Sync,
        F: Fn(&mut S, &Chunk) + Sync,
    {
        run_chunked(self.input, self.k, &self.exec, init, work)
    }

    /// One filter pass with `membership`, which must be empty.
    pub fn filter_junctions<M: EdgeMembership>(
        &self,
        membership: &M,
        marks: &mut MarkArray,
    ) -> PassStats {
        let started = Instant::now();
        let marks_before = marks.count();
        let p = self.scan_params();
        let k = self.k;
        let marks = &*marks;

        if cfg!(debug_assertions) && self.input.total_bases() <= 1 << 16 {
            debug_assert!(
                marks.closure_violation(self.input, k, self.mode).is_none(),
                "mark array violates candidate-set closure"
            );
        }

        // Fill: every (k+1)-mer at j whose k-mer at j or j+1 is marked.
        let fill = self.for_each_chunk(WorkerTally::default, |tally, chunk| {
            let span = chunk.span;
            let edges = span.edge_starts(k);
            if edges.is_empty() {
                return;
            }
            let mut win: Option<KmerWindow> = None;
            let mut next_free = edges.start;
            for m in marks.marked_in(span.segment, edges.start..edges.end + 1) {
                for j in [m.saturating_sub(1), m] {
                    if j < next_free || j >= edges.end {
                        continue;
                    }
                    let w = win.get_or_insert_with(|| KmerWindow::at(&p, chunk, j));
                    w.seek(&p, chunk, j);
                    membership.insert(&w.out_edge(&p, chunk.base(j + k)));
                    tally.inserts += 1;
                    next_free = j + 1;
                }
            }
        });

        // Check: unmark non-sentinel k-mers with in = out = 1.
        let check = self.for_each_chunk(WorkerTally::default, |tally, chunk| {
            let span = chunk.span;
            let mut win: Option<KmerWindow> = None;
            for i in marks.marked_in(span.segment, span.kmer_positions(k)) {
                let w = win.get_or_insert_with(|| KmerWindow::at(&p, chunk, i));
                w.seek(&p, chunk, i);
                if self.sentinels.contains(&w.key(self.mode).0) {
                    continue;
                }
                let mut out = 0;
                for c in 0..4 {
                    tally.queries += 1;
                    out += u32::from(membership.contains(&w.out_edge(&p, c)));
                }
                if out != 1 {
                    continue;
                }
                let mut inn = 0;
                for c in 0..4 {
                    tally.queries += 1;
                    inn += u32::from(membership.contains(&w.in_edge(&p, c)));
                }
                if inn == 1 {
                    marks.unmark(span.segment, i);
                }
            }
        });

        PassStats {
            marks_before,
            marks_after: marks.count(),
            inserts: fill.iter().map(|t| t.inserts).sum(),
            queries: check.iter().map(|t| t.queries).sum(),
            elapsed: started.elapsed(),
        }
    }

    /// Probabilistic pass over a fresh Bloom filter of `2^filter_log2` bits.
    /// Returns the pass statistics and the filter's final fill ratio.
    pub fn first_pass(&self, marks: &mut MarkArray, filter_log2: u32) -> Result<(PassStats, f64)> {
        let bloom = BloomFilter::new(filter_log2, self.hash_count)?;
        let stats = self.filter_junctions(&bloom, marks);
        bloom.record_activity(stats.inserts, stats.queries);
        Ok((stats, bloom.fill_ratio()))
    }

    /// Exact pass over a fresh hash table.
    pub fn second_pass(&self, marks: &mut MarkArray) -> Result<(PassStats, usize, usize)> {
        let table = ExactEdgeTable::new(self.k + 1, self.table_limit);
        let stats = self.filter_junctions(&table, marks);
        if table.overflowed() {
            return Err(Error::TableOverflow {
                round: 0,
                cardinality: table.len(),
                limit: table.limit().unwrap_or(usize::MAX),
                load_estimate: None,
            });
        }
        Ok((stats, table.len(), table.memory_bytes()))
    }

    /// Probabilistic pass, then exact pass on the survivors. The result is
    /// exactly the junction positions among the input marks.
    pub fn two_pass(&self, marks: &mut MarkArray, filter_log2: u32) -> Result<TwoPassStats> {
        self.two_pass_traced(marks, filter_log2, |_| {})
    }

    /// [`JunctionFilter::two_pass`] with a hook that sees the marks between
    /// the two passes.
    pub fn two_pass_traced(
        &self,
        marks: &mut MarkArray,
        filter_log2: u32,
        between: impl FnOnce(&MarkArray),
    ) -> Result<TwoPassStats> {
        let (first, bloom_fill) = self.first_pass(marks, filter_log2)?;
        between(marks);
        let (second, table_keys, table_bytes) = self.second_pass(marks)?;
        Ok(TwoPassStats {
            first,
            second,
            bloom_fill,
            table_keys,
            table_bytes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shared_prefix() -> SequenceSet {
        SequenceSet::from_strings(&["TGGCACGTC", "TGGCACTTC"], 2).unwrap()
    }

    fn params(k: usize, mode: StrandMode) -> FilterParams {
        FilterParams::new(k, mode)
    }

    fn positions(marks: &MarkArray) -> Vec<Vec<usize>> {
        (0..marks.segment_count())
            .map(|s| marks.marked_positions(s).collect())
            .collect()
    }

    #[test]
    fn mark_array_iteration_and_bounds() {
        let input = SequenceSet::from_strings(&["A".repeat(200)], 5).unwrap();
        let marks = MarkArray::new(&input, 5, true);
        assert_eq!(marks.count(), 196);
        marks.unmark(0, 64);
        marks.unmark(0, 0);
        let got: Vec<_> = marks.marked_in(0, 60..70).collect();
        assert_eq!(got, [60, 61, 62, 63, 65, 66, 67, 68, 69]);
        assert_eq!(marks.marked_positions(0).count(), 194);
        let none = MarkArray::new(&input, 5, false);
        assert!(marks.is_superset_of(&none));
        assert!(!none.is_superset_of(&marks));
    }

    #[test]
    fn shared_prefix_exact_single_strand() {
        let input = shared_prefix();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        let table = ExactEdgeTable::new(3, None);
        f.filter_junctions(&table, &mut marks);
        assert_eq!(positions(&marks), [vec![0, 4, 7], vec![0, 4, 7]]);
    }

    #[test]
    fn homopolymer_keeps_sentinel_kmer_everywhere() {
        // "AA" is the first k-mer of the segment, so it is a sentinel vertex
        // and all of its occurrences stay junctions.
        let input = SequenceSet::from_strings(&["AAAA"], 2).unwrap();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        f.two_pass(&mut marks, 10).unwrap();
        assert_eq!(positions(&marks), [vec![0, 1, 2]]);
    }

    #[test]
    fn internal_homopolymer_run_is_unmarked() {
        let input = SequenceSet::from_strings(&["CAAAAG"], 2).unwrap();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        f.two_pass(&mut marks, 10).unwrap();
        // AA has in {CAA, AAA} -> in = 2, so it is a bifurcation
        assert_eq!(positions(&marks), [vec![0, 1, 2, 3, 4]]);
        let input = SequenceSet::from_strings(&["CGATTG"], 2).unwrap();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        f.two_pass(&mut marks, 10).unwrap();
        assert_eq!(positions(&marks), [vec![0, 4]]);
    }

    /// Answers like the exact table, plus one fabricated edge.
    struct WithFalseEdge {
        inner: ExactEdgeTable,
        fake: Mer,
    }

    impl EdgeMembership for WithFalseEdge {
        fn insert(&self, key: &crate::edge_membership::EdgeKey) {
            self.inner.insert(key)
        }
        fn contains(&self, key: &crate::edge_membership::EdgeKey) -> bool {
            key.mer == self.fake || self.inner.contains(key)
        }
    }

    #[test]
    fn false_positive_edge_keeps_gc_marked() {
        let input = shared_prefix();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        // a phantom GCG edge gives GC a second out-edge and CG a second
        // in-edge
        let fake = WithFalseEdge {
            inner: ExactEdgeTable::new(3, None),
            fake: Mer::from_ascii(b"GCG").unwrap(),
        };
        f.filter_junctions(&fake, &mut marks);
        assert_eq!(positions(&marks), [vec![0, 2, 4, 5, 7], vec![0, 2, 4, 7]]);
        // the exact pass removes it again
        f.second_pass(&mut marks).unwrap();
        assert_eq!(positions(&marks), [vec![0, 4, 7], vec![0, 4, 7]]);
    }

    #[test]
    fn saturated_filter_unmarks_nothing_but_exact_pass_recovers() {
        let input = shared_prefix();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        let bloom = BloomFilter::new(6, 4).unwrap();
        bloom.saturate();
        let stats = f.filter_junctions(&bloom, &mut marks);
        assert_eq!(stats.marks_after, stats.marks_before);
        f.second_pass(&mut marks).unwrap();
        assert_eq!(positions(&marks), [vec![0, 4, 7], vec![0, 4, 7]]);
    }

    #[test]
    fn two_pass_any_filter_size() {
        let input = shared_prefix();
        for log2 in [6, 8, 12, 20] {
            for mode in [StrandMode::Single, StrandMode::Double] {
                let f = JunctionFilter::new(&input, &params(2, mode)).unwrap();
                let mut marks = f.all_marked();
                let stats = f.two_pass(&mut marks, log2).unwrap();
                assert!(stats.first.marks_before >= stats.first.marks_after);
                assert!(stats.first.marks_after >= stats.second.marks_after);
                if mode == StrandMode::Single {
                    assert_eq!(positions(&marks), [vec![0, 4, 7], vec![0, 4, 7]]);
                }
            }
        }
    }

    #[test]
    fn partial_pass_with_generous_filter_matches_exact_on_shared_prefix() {
        let input = shared_prefix();
        let f = JunctionFilter::new(&input, &params(2, StrandMode::Single)).unwrap();
        let mut marks = f.all_marked();
        f.first_pass(&mut marks, 20).unwrap();
        assert_eq!(positions(&marks), [vec![0, 4, 7], vec![0, 4, 7]]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let input = shared_prefix();
        assert!(JunctionFilter::new(&input, &params(0, StrandMode::Single)).is_err());
        assert!(JunctionFilter::new(&input, &params(129, StrandMode::Single)).is_err());
        let mut p = params(2, StrandMode::Single);
        p.chunk_size = 3;
        assert!(JunctionFilter::new(&input, &p).is_err());
        p.chunk_size = 64;
        p.hash_count = 0;
        assert!(JunctionFilter::new(&input, &p).is_err());
    }

    #[test]
    fn table_limit_reports_overflow() {
        let input = shared_prefix();
        let mut p = params(2, StrandMode::Single);
        p.table_limit = Some(3);
        let f = JunctionFilter::new(&input, &p).unwrap();
        let mut marks = f.all_marked();
        assert!(matches!(
            f.two_pass(&mut marks, 6),
            Err(Error::TableOverflow { cardinality: 3, .. })
        ));
    }
}
