//! Splitting the k-mer universe into rounds of balanced exact-table load.
//!
//! A bucket hash `f` maps each key-form k-mer into `[0, Q)`. One counting
//! pass estimates, per bucket, how many distinct (k+1)-mers touch a k-mer of
//! that bucket; a greedy linear scan then cuts `[0, Q)` into ℓ contiguous
//! ranges of roughly equal load. Round `i` starts with exactly the positions
//! whose k-mer falls in range `i` marked, and the surviving marks of all
//! rounds are united.

use std::ops::Range;
use std::time::{Duration, Instant};

use crate::edge_membership::BloomFilter;
use crate::error::{Error, Result};
use crate::junction_filter::{JunctionFilter, MarkArray, PassStats};
use crate::scan::KmerWindow;

pub const DEFAULT_BUCKETS: usize = 8192;

/// Approximate distinct incident (k+1)-mer counts per bucket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketCounters {
    pub counts: Vec<u64>,
}

impl BucketCounters {
    pub fn buckets(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[inline]
fn bucket_of(digest: u64, buckets: usize) -> usize {
    ((u128::from(digest) * buckets as u128) >> 64) as usize
}

/// One pass over every (k+1)-mer: the first time a key-form (k+1)-mer is
/// seen (absent from a scratch Bloom filter of `2^filter_log2` bits), the
/// buckets of both of its k-mers are incremented.
pub fn count_buckets(
    filter: &JunctionFilter,
    buckets: usize,
    filter_log2: u32,
) -> Result<BucketCounters> {
    if buckets == 0 {
        return Err(Error::config("bucket count must be positive"));
    }
    let scratch = BloomFilter::new(filter_log2, filter.hash_count())?;
    let p = filter.scan_params();
    let k = filter.k();
    let f = p.bucket_function();
    let locals = filter.for_each_chunk(
        || vec![0u64; buckets],
        |counts, chunk| {
            let edges = chunk.span.edge_starts(k);
            if edges.is_empty() {
                return;
            }
            let mut win = KmerWindow::at(&p, chunk, edges.start);
            let mut here = bucket_of(win.key_digest(&p, f), buckets);
            for j in edges {
                let edge = win.out_edge(&p, chunk.base(j + k));
                win.advance(&p, chunk);
                let next = bucket_of(win.key_digest(&p, f), buckets);
                if scratch.insert_digests(&edge.digests) {
                    counts[here] += 1;
                    counts[next] += 1;
                }
                here = next;
            }
        },
    );
    let mut counts = vec![0u64; buckets];
    for local in locals {
        for (c, l) in counts.iter_mut().zip(local) {
            *c += l;
        }
    }
    Ok(BucketCounters { counts })
}

/// ℓ contiguous bucket ranges covering `[0, Q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    pub ranges: Vec<Range<usize>>,
    pub loads: Vec<u64>,
    class_of_bucket: Vec<u32>,
}

impl PartitionPlan {
    pub fn classes(&self) -> usize {
        self.ranges.len()
    }

    pub fn buckets(&self) -> usize {
        self.class_of_bucket.len()
    }

    #[inline]
    pub fn class_of(&self, bucket: usize) -> usize {
        self.class_of_bucket[bucket] as usize
    }

    /// A plan with one class over `buckets` buckets.
    pub fn single(buckets: usize, load: u64) -> Self {
        Self::from_ranges(std::iter::once(0..buckets).collect(), vec![load])
    }

    fn from_ranges(ranges: Vec<Range<usize>>, loads: Vec<u64>) -> Self {
        let mut class_of_bucket = Vec::with_capacity(ranges.last().map_or(0, |r| r.end));
        for (i, r) in ranges.iter().enumerate() {
            class_of_bucket.extend(r.clone().map(|_| i as u32));
        }
        PartitionPlan {
            ranges,
            loads,
            class_of_bucket,
        }
    }

    /// Diagnostic TSV of per-class load estimates.
    pub fn write_tsv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "class\tbucket_start\tbucket_end\testimated_load")?;
        for (i, (r, load)) in self.ranges.iter().zip(&self.loads).enumerate() {
            writeln!(out, "{i}\t{}\t{}\t{load}", r.start, r.end)?;
        }
        Ok(())
    }
}

/// Greedy scan: each class takes the longest prefix of the remaining buckets
/// whose load stays within `ceil(total / ℓ)`, but always at least one bucket
/// and never so many that a later class would be left empty. The last class
/// takes the remainder.
pub fn greedy_partition(counters: &BucketCounters, classes: usize) -> Result<PartitionPlan> {
    let e = &counters.counts;
    if classes == 0 {
        return Err(Error::config("at least one round is required"));
    }
    if classes > e.len() {
        return Err(Error::config(format!(
            "{classes} rounds exceed the {} available buckets",
            e.len()
        )));
    }
    let target = counters.total().div_ceil(classes as u64);
    let mut ranges = Vec::with_capacity(classes);
    let mut loads = Vec::with_capacity(classes);
    let mut start = 0;
    for class in 0..classes - 1 {
        let must_leave = classes - 1 - class;
        let mut end = start + 1;
        let mut load = e[start];
        while end + must_leave < e.len() && load + e[end] <= target {
            load += e[end];
            end += 1;
        }
        ranges.push(start..end);
        loads.push(load);
        start = end;
    }
    loads.push(e[start..].iter().sum());
    ranges.push(start..e.len());
    Ok(PartitionPlan::from_ranges(ranges, loads))
}

/// Counts for one round.
#[derive(Clone, Debug, Default)]
pub struct RoundStats {
    pub round: usize,
    pub estimated_load: u64,
    pub initial_marks: usize,
    pub first: PassStats,
    pub second: Option<PassStats>,
    pub bloom_fill: f64,
    pub table_keys: usize,
    pub table_bytes: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct RoundsOutcome {
    pub plan: PartitionPlan,
    pub rounds: Vec<RoundStats>,
    pub counting_time: Duration,
}

/// Settings of [`run_rounds`].
#[derive(Clone, Copy, Debug)]
pub struct RoundsParams {
    pub rounds: usize,
    pub filter_log2: u32,
    pub buckets: usize,
    /// Skip the exact pass and keep the first-pass marks.
    pub partial: bool,
}

/// Marks exactly the positions whose key k-mer falls into class `class`.
pub fn class_marks(filter: &JunctionFilter, plan: &PartitionPlan, class: usize) -> MarkArray {
    if plan.classes() == 1 {
        return filter.all_marked();
    }
    let marks = MarkArray::new(filter.input(), filter.k(), false);
    let p = filter.scan_params();
    let f = p.bucket_function();
    let buckets = plan.buckets();
    filter.for_each_chunk(
        || (),
        |_, chunk| {
            let span = chunk.span;
            let positions = span.kmer_positions(filter.k());
            if positions.is_empty() {
                return;
            }
            let mut win = KmerWindow::at(&p, chunk, positions.start);
            for i in positions {
                win.seek(&p, chunk, i);
                if plan.class_of(bucket_of(win.key_digest(&p, f), buckets)) == class {
                    marks.mark(span.segment, i);
                }
            }
        },
    );
    marks
}

/// Runs one filter round per class of a freshly computed plan and returns the
/// union of the surviving marks.
pub fn run_rounds(
    filter: &JunctionFilter,
    params: RoundsParams,
) -> Result<(MarkArray, RoundsOutcome)> {
    run_rounds_traced(filter, params, |_, _| {})
}

/// [`run_rounds`] with a hook that sees each round's marks after the first
/// pass.
pub fn run_rounds_traced(
    filter: &JunctionFilter,
    params: RoundsParams,
    mut after_first: impl FnMut(usize, &MarkArray),
) -> Result<(MarkArray, RoundsOutcome)> {
    let started = Instant::now();
    let plan = if params.rounds == 1 {
        PartitionPlan::single(params.buckets.max(1), 0)
    } else {
        let counters = count_buckets(filter, params.buckets, params.filter_log2)?;
        greedy_partition(&counters, params.rounds)?
    };
    let counting_time = started.elapsed();

    let mut union: Option<MarkArray> = None;
    let mut rounds = Vec::with_capacity(plan.classes());
    for round in 0..plan.classes() {
        let round_start = Instant::now();
        let mut marks = class_marks(filter, &plan, round);
        let initial_marks = marks.count();
        let (first, bloom_fill) = filter.first_pass(&mut marks, params.filter_log2)?;
        after_first(round, &marks);
        let mut stats = RoundStats {
            round,
            estimated_load: plan.loads[round],
            initial_marks,
            first,
            bloom_fill,
            ..Default::default()
        };
        if !params.partial {
            let (second, keys, bytes) = filter.second_pass(&mut marks).map_err(|e| match e {
                Error::TableOverflow {
                    cardinality, limit, ..
                } => Error::TableOverflow {
                    round,
                    cardinality,
                    limit,
                    load_estimate: (plan.classes() > 1).then_some(plan.loads[round]),
                },
                other => other,
            })?;
            stats.second = Some(second);
            stats.table_keys = keys;
            stats.table_bytes = bytes;
        }
        stats.elapsed = round_start.elapsed();
        log::info!(
            "round {round}: {initial_marks} -> {} -> {} marks",
            stats.first.marks_after,
            stats
                .second
                .as_ref()
                .map_or(stats.first.marks_after, |s| s.marks_after)
        );
        rounds.push(stats);
        match &mut union {
            None => union = Some(marks),
            Some(u) => u.union_with(&marks),
        }
    }
    Ok((
        union.expect("a plan has at least one class"),
        RoundsOutcome {
            plan,
            rounds,
            counting_time,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::junction_filter::FilterParams;
    use crate::kmer_model::StrandMode;
    use crate::sequence_io::SequenceSet;

    fn counters(e: &[u64]) -> BucketCounters {
        BucketCounters { counts: e.to_vec() }
    }

    #[test]
    fn greedy_examples() {
        let plan = greedy_partition(&counters(&[3, 1, 2, 2, 4]), 2).unwrap();
        assert_eq!(plan.ranges, [0..3, 3..5]);
        assert_eq!(plan.loads, [6, 6]);
        let plan = greedy_partition(&counters(&[10, 1, 1]), 2).unwrap();
        assert_eq!(plan.ranges, [0..1, 1..3]);
        assert_eq!(plan.loads, [10, 2]);
        let plan = greedy_partition(&counters(&[5, 5, 5]), 1).unwrap();
        assert_eq!(plan.ranges.len(), 1);
        assert_eq!(plan.ranges[0], 0..3);
        assert!(greedy_partition(&counters(&[1, 2]), 3).is_err());
        assert!(greedy_partition(&counters(&[1, 2]), 0).is_err());
    }

    #[test]
    fn greedy_keeps_every_class_nonempty() {
        let plan = greedy_partition(&counters(&[0; 6]), 4).unwrap();
        assert_eq!(plan.ranges.len(), 4);
        assert!(plan.ranges.iter().all(|r| !r.is_empty()));
        assert_eq!(plan.ranges.last().unwrap().end, 6);
        let plan = greedy_partition(&counters(&[1, 1, 1, 100]), 4).unwrap();
        assert_eq!(plan.ranges, [0..1, 1..2, 2..3, 3..4]);
    }

    #[test]
    fn homopolymer_counts_one_edge_twice_in_one_bucket() {
        let input = SequenceSet::from_strings(&["AAAA"], 2).unwrap();
        let f = JunctionFilter::new(&input, &FilterParams::new(2, StrandMode::Single)).unwrap();
        let c = count_buckets(&f, 4, 12).unwrap();
        assert_eq!(c.total(), 2);
        assert_eq!(c.counts.iter().filter(|&&x| x > 0).count(), 1);
    }

    #[test]
    fn shared_prefix_total_increments() {
        let input = SequenceSet::from_strings(&["TGGCACGTC", "TGGCACTTC"], 2).unwrap();
        for (mode, distinct) in [(StrandMode::Single, 10), (StrandMode::Double, 9)] {
            let f = JunctionFilter::new(&input, &FilterParams::new(2, mode)).unwrap();
            let c = count_buckets(&f, 1 << 12, 20).unwrap();
            assert_eq!(c.total(), 2 * distinct);
        }
    }

    #[test]
    fn rounds_are_disjoint_and_cover() {
        let seq: String = (0..3000u64)
            .map(|i| ['A', 'C', 'G', 'T'][((i * 2654435761) >> 7) as usize % 4])
            .collect();
        let input = SequenceSet::from_strings(&[seq], 5).unwrap();
        let f = JunctionFilter::new(&input, &FilterParams::new(5, StrandMode::Double)).unwrap();
        let c = count_buckets(&f, 64, 16).unwrap();
        let plan = greedy_partition(&c, 4).unwrap();
        let mut union = MarkArray::new(&input, 5, false);
        let mut total = 0;
        for class in 0..4 {
            let m = class_marks(&f, &plan, class);
            assert!(m.closure_violation(&input, 5, StrandMode::Double).is_none());
            total += m.count();
            union.union_with(&m);
        }
        assert_eq!(total, input.kmer_positions(5));
        assert_eq!(union.count(), total);
    }

    #[test]
    fn round_count_does_not_change_the_result() {
        let input = SequenceSet::from_strings(&["TGGCACGTC", "TGGCACTTC"], 2).unwrap();
        let f = JunctionFilter::new(&input, &FilterParams::new(2, StrandMode::Single)).unwrap();
        let params = |rounds| RoundsParams {
            rounds,
            filter_log2: 10,
            buckets: 16,
            partial: false,
        };
        let (reference, _) = run_rounds(&f, params(1)).unwrap();
        for rounds in [2, 3, 8] {
            let (marks, outcome) = run_rounds(&f, params(rounds)).unwrap();
            assert_eq!(marks, reference);
            assert_eq!(outcome.rounds.len(), rounds);
        }
    }
}
