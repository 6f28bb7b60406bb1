//! Single-producer/multiple-consumer execution over overlapping chunks.
//!
//! The producer walks the segments in order, cuts them into chunks that
//! overlap by exactly k bases and pushes packed copies into a bounded queue.
//! Each (k+1)-mer start, and each k-mer start, is owned by exactly one chunk,
//! so workers never write to the same mark positions. Returning from
//! [`run_chunked`] is the barrier between phases.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use crate::sequence_io::{BaseCode, DnaString, SequenceSet};

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChunkSpan {
    pub segment: usize,
    pub start: usize,
    pub end: usize,
    pub is_last: bool,
}

impl ChunkSpan {
    /// (k+1)-mer start offsets owned by this chunk.
    pub fn edge_starts(&self, k: usize) -> Range<usize> {
        self.start..self.end.saturating_sub(k).max(self.start)
    }

    /// k-mer start offsets owned by this chunk. The final k-mer of a segment
    /// belongs to its last chunk.
    pub fn kmer_positions(&self, k: usize) -> Range<usize> {
        let end = self.end.saturating_sub(k) + usize::from(self.is_last);
        self.start..end.max(self.start)
    }
}

/// Chunk layout of one segment. Deterministic in `(len, chunk_size, k)`.
pub fn chunk_spans(segment: usize, len: usize, chunk_size: usize, k: usize) -> Vec<ChunkSpan> {
    assert!(
        chunk_size >= 2 * k,
        "chunk size {chunk_size} below 2k = {}",
        2 * k
    );
    if len < k {
        return Vec::new();
    }
    let step = chunk_size - k;
    let mut spans = Vec::with_capacity(len / step + 1);
    let mut start = 0;
    loop {
        let end = (start + chunk_size).min(len);
        let is_last = end == len;
        spans.push(ChunkSpan {
            segment,
            start,
            end,
            is_last,
        });
        if is_last {
            return spans;
        }
        start += step;
    }
}

/// Tracks bytes of chunk payload alive at any moment.
#[derive(Debug, Default)]
pub struct BufferAccounting {
    resident: AtomicUsize,
    peak: AtomicUsize,
}

impl BufferAccounting {
    fn lease(self: &Arc<Self>, bytes: usize) -> BufferLease {
        let now = self.resident.fetch_add(bytes, Ordering::Relaxed) + bytes;
        self.peak.fetch_max(now, Ordering::Relaxed);
        BufferLease {
            owner: Arc::clone(self),
            bytes,
        }
    }

    pub fn resident(&self) -> usize {
        self.resident.load(Ordering::Relaxed)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::Relaxed)
    }
}

#[derive(Debug)]
struct BufferLease {
    owner: Arc<BufferAccounting>,
    bytes: usize,
}

impl Drop for BufferLease {
    fn drop(&mut self) {
        self.owner.resident.fetch_sub(self.bytes, Ordering::Relaxed);
    }
}

/// A unit of work: a packed copy of one chunk of a segment.
#[derive(Debug)]
pub struct Chunk {
    pub span: ChunkSpan,
    bases: DnaString,
    _lease: BufferLease,
}

impl Chunk {
    /// Base at segment offset `pos`.
    #[inline]
    pub fn base(&self, pos: usize) -> BaseCode {
        self.bases.get(pos - self.span.start)
    }

    pub fn codes(&self, range: Range<usize>) -> impl Iterator<Item = BaseCode> + '_ {
        range.map(|p| self.base(p))
    }
}

/// Worker count and chunking policy of a run.
#[derive(Clone, Debug)]
pub struct Execution {
    pub workers: usize,
    pub chunk_size: usize,
    pub accounting: Arc<BufferAccounting>,
}

impl Execution {
    pub fn new(workers: usize, chunk_size: usize) -> Self {
        Execution {
            workers: workers.max(1),
            chunk_size,
            accounting: Arc::default(),
        }
    }

    /// Upper bound on simultaneously resident chunk payload bytes: one chunk
    /// per queue slot, one per busy worker, one held by a blocked producer.
    pub fn buffer_bound(&self) -> usize {
        (2 * self.workers + 1) * (self.chunk_size.div_ceil(32) * 8 + 8)
    }
}

/// Runs `work` over every chunk of every segment on `exec.workers` threads.
/// Each worker owns one state built by `init`; the states are returned in
/// worker order once all chunks are done.
pub fn run_chunked<S, I, F>(
    input: &SequenceSet,
    k: usize,
    exec: &Execution,
    init: I,
    work: F,
) -> Vec<S>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &Chunk) + Sync,
{
    let (tx, rx) = crossbeam_channel::bounded::<Chunk>(exec.workers);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..exec.workers)
            .map(|_| {
                let rx = rx.clone();
                let (init, work) = (&init, &work);
                scope.spawn(move || {
                    let mut state = init();
                    for chunk in rx {
                        work(&mut state, &chunk);
                    }
                    state
                })
            })
            .collect();
        drop(rx);

        'produce: for (seg_idx, seg) in input.segments().enumerate() {
            for span in chunk_spans(seg_idx, seg.len(), exec.chunk_size, k) {
                let bases = seg.data.slice(span.start, span.end);
                let lease = exec.accounting.lease(bases.packed_bytes());
                let chunk = Chunk {
                    span,
                    bases,
                    _lease: lease,
                };
                if tx.send(chunk).is_err() {
                    // every worker is gone; the join below reports why
                    break 'produce;
                }
            }
        }
        drop(tx);

        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    })
}
