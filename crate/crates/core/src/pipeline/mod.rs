//! End-to-end construction: parse, optionally count buckets, run the filter
//! rounds, enumerate junctions, build edges and serialize.

pub mod chunking;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::edge_membership::{MAX_FILTER_LOG2, MIN_FILTER_LOG2};
use crate::error::{Error, Result};
use crate::graph_builder::{
    build_edges, emit_gfa, emit_junctions_tsv, enumerate_junctions, CompactedGraph, JunctionIndex,
};
use crate::junction_filter::{FilterParams, JunctionFilter, MarkArray};
use crate::kmer_model::{StrandMode, K_MAX, MAX_FUNCTIONS};
use crate::partitioner::{
    run_rounds_traced, PartitionPlan, RoundStats, RoundsParams, DEFAULT_BUCKETS,
};
use crate::sequence_io::{read_fasta_file, SequenceSet};

pub const DEFAULT_SEED: u64 = 0x5eed_cdb9_2016_0001;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Gfa1,
    Junctions,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub k: usize,
    /// The first-pass filter has `2^filter_log2_bits` bits.
    pub filter_log2_bits: u32,
    pub hash_count: usize,
    pub rounds: usize,
    pub workers: usize,
    pub mode: StrandMode,
    pub format: OutputFormat,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    pub chunk_size: usize,
    /// Stop after the first pass and emit the partially compacted graph.
    pub partial: bool,
    /// Refuse exact tables with more keys than this.
    pub table_limit: Option<usize>,
    pub buckets: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 25,
            filter_log2_bits: 24,
            hash_count: 4,
            rounds: 1,
            workers: std::thread::available_parallelism().map_or(1, usize::from),
            mode: StrandMode::Double,
            format: OutputFormat::Gfa1,
            inputs: Vec::new(),
            seed: DEFAULT_SEED,
            chunk_size: chunking::DEFAULT_CHUNK_SIZE,
            partial: false,
            table_limit: None,
            buckets: DEFAULT_BUCKETS,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=K_MAX).contains(&self.k) {
            return Err(Error::config(format!(
                "k must be in 1..={K_MAX}, got {}",
                self.k
            )));
        }
        if !(MIN_FILTER_LOG2..=MAX_FILTER_LOG2).contains(&self.filter_log2_bits) {
            return Err(Error::config(format!(
                "filter size exponent must be in {MIN_FILTER_LOG2}..={MAX_FILTER_LOG2}, got {}",
                self.filter_log2_bits
            )));
        }
        if !(1..MAX_FUNCTIONS).contains(&self.hash_count) {
            return Err(Error::config(format!(
                "hash count must be in 1..={}, got {}",
                MAX_FUNCTIONS - 1,
                self.hash_count
            )));
        }
        if self.rounds == 0 {
            return Err(Error::config("at least one round is required"));
        }
        if self.rounds > self.buckets {
            return Err(Error::config(format!(
                "{} rounds exceed the {} partition buckets",
                self.rounds, self.buckets
            )));
        }
        if self.workers == 0 {
            return Err(Error::config("at least one worker is required"));
        }
        if self.chunk_size < 2 * self.k {
            return Err(Error::config(format!(
                "chunk size {} is below 2k = {}",
                self.chunk_size,
                2 * self.k
            )));
        }
        Ok(())
    }

    fn filter_params(&self) -> FilterParams {
        FilterParams {
            k: self.k,
            mode: self.mode,
            hash_count: self.hash_count,
            seed: self.seed,
            workers: self.workers,
            chunk_size: self.chunk_size,
            table_limit: self.table_limit,
        }
    }
}

/// Measurements of one run.
#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub records: usize,
    pub segments: usize,
    pub dropped_segments: usize,
    pub bases: usize,
    pub positions: usize,
    pub rounds: Vec<RoundStats>,
    pub plan: Option<PartitionPlan>,
    pub junction_occurrences: usize,
    pub junctions: usize,
    pub edges: usize,
    pub edge_occurrences: u64,
    pub stage_times: Vec<(&'static str, Duration)>,
    /// Largest sum of the resident structures the run accounts for.
    pub peak_estimated_bytes: usize,
    pub peak_chunk_bytes: usize,
}

impl RunReport {
    /// Marks surviving each pass, summed over rounds.
    pub fn pass_marks(&self) -> [(&'static str, usize); 3] {
        let sum = |f: &dyn Fn(&RoundStats) -> usize| self.rounds.iter().map(f).sum();
        [
            ("initial", sum(&|r| r.initial_marks)),
            ("first", sum(&|r| r.first.marks_after)),
            (
                "second",
                sum(&|r| {
                    r.second
                        .as_ref()
                        .map_or(r.first.marks_after, |s| s.marks_after)
                }),
            ),
        ]
    }

    pub fn max_table_keys(&self) -> usize {
        self.rounds.iter().map(|r| r.table_keys).max().unwrap_or(0)
    }

    /// Stable `metric<TAB>value` listing.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric\tvalue")?;
        writeln!(out, "records\t{}", self.records)?;
        writeln!(out, "segments\t{}", self.segments)?;
        writeln!(out, "dropped_segments\t{}", self.dropped_segments)?;
        writeln!(out, "bases\t{}", self.bases)?;
        writeln!(out, "positions\t{}", self.positions)?;
        writeln!(out, "rounds\t{}", self.rounds.len())?;
        for (pass, marks) in self.pass_marks() {
            writeln!(out, "marks.{pass}\t{marks}")?;
        }
        for r in &self.rounds {
            let i = r.round;
            writeln!(out, "round.{i}.estimated_load\t{}", r.estimated_load)?;
            writeln!(out, "round.{i}.initial_marks\t{}", r.initial_marks)?;
            writeln!(out, "round.{i}.first_marks\t{}", r.first.marks_after)?;
            if let Some(s) = &r.second {
                writeln!(out, "round.{i}.second_marks\t{}", s.marks_after)?;
            }
            writeln!(out, "round.{i}.bloom_fill\t{:.6}", r.bloom_fill)?;
            writeln!(out, "round.{i}.table_keys\t{}", r.table_keys)?;
            writeln!(out, "round.{i}.seconds\t{:.3}", r.elapsed.as_secs_f64())?;
        }
        writeln!(out, "junction_occurrences\t{}", self.junction_occurrences)?;
        writeln!(out, "junctions\t{}", self.junctions)?;
        writeln!(out, "edges\t{}", self.edges)?;
        writeln!(out, "edge_occurrences\t{}", self.edge_occurrences)?;
        for (stage, t) in &self.stage_times {
            writeln!(out, "time.{stage}\t{:.3}", t.as_secs_f64())?;
        }
        writeln!(out, "peak_estimated_bytes\t{}", self.peak_estimated_bytes)?;
        writeln!(out, "peak_chunk_bytes\t{}", self.peak_chunk_bytes)?;
        Ok(())
    }

    /// `pass<TAB>marks` listing.
    pub fn write_mark_counts<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pass\tmarks")?;
        for (pass, marks) in self.pass_marks() {
            writeln!(out, "{pass}\t{marks}")?;
        }
        Ok(())
    }
}

/// Everything a run produced.
pub struct RunOutput {
    pub config: RunConfig,
    pub input: SequenceSet,
    pub junctions: JunctionIndex,
    /// Built for GFA output only.
    pub graph: Option<CompactedGraph>,
    pub report: RunReport,
}

impl RunOutput {
    pub fn write_output<W: Write>(&self, out: W) -> Result<()> {
        match (self.config.format, &self.graph) {
            (OutputFormat::Gfa1, Some(g)) => emit_gfa(g, &self.input, out)?,
            (OutputFormat::Gfa1, None) => {
                let g = build_edges(&self.input, &self.junctions);
                emit_gfa(&g, &self.input, out)?
            }
            (OutputFormat::Junctions, _) => emit_junctions_tsv(&self.junctions, &self.input, out)?,
        }
        Ok(())
    }
}

/// Hooks for observing intermediate marks.
pub trait RunObserver {
    fn after_first_pass(&mut self, _round: usize, _marks: &MarkArray) {}
}

impl RunObserver for () {}

/// Reads the configured inputs and runs the construction.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let mut records = Vec::new();
    let mut dropped = 0;
    for path in &config.inputs {
        let parsed = read_fasta_file(path, config.k)?;
        dropped += parsed.dropped_segments;
        records.extend(parsed.records);
    }
    let input = SequenceSet::new(records);
    let parse_time = started.elapsed();
    let mut out = run_on(input, config, &mut ())?;
    out.report.dropped_segments = dropped;
    out.report.stage_times.insert(0, ("parse", parse_time));
    Ok(out)
}

/// Runs the construction on an already parsed input.
pub fn run_on(
    input: SequenceSet,
    config: &RunConfig,
    observer: &mut dyn RunObserver,
) -> Result<RunOutput> {
    config.validate()?;
    let mut report = RunReport {
        records: input.records().len(),
        segments: input.segment_count(),
        bases: input.total_bases(),
        positions: input.kmer_positions(config.k),
        ..Default::default()
    };
    let input_bytes: usize = input.segments().map(|s| s.data.packed_bytes()).sum();

    let filter_start = Instant::now();
    let filter = JunctionFilter::new(&input, &config.filter_params())?;
    let (marks, outcome) = run_rounds_traced(
        &filter,
        RoundsParams {
            rounds: config.rounds,
            filter_log2: config.filter_log2_bits,
            buckets: config.buckets,
            partial: config.partial,
        },
        |round, marks| observer.after_first_pass(round, marks),
    )?;
    report.peak_chunk_bytes = filter.execution().accounting.peak();
    drop(filter);
    let marks_bytes = marks.memory_bytes();
    let bloom_bytes = (1usize << config.filter_log2_bits) / 8;
    let table_bytes = outcome
        .rounds
        .iter()
        .map(|r| r.table_bytes)
        .max()
        .unwrap_or(0);
    let round_marks = if config.rounds > 1 { 2 } else { 1 };
    report.peak_estimated_bytes = input_bytes
        + round_marks * marks_bytes
        + report.peak_chunk_bytes
        + bloom_bytes.max(table_bytes);
    report.stage_times.push(("counting", outcome.counting_time));
    report
        .stage_times
        .push(("filter", filter_start.elapsed() - outcome.counting_time));
    report.rounds = outcome.rounds;
    report.plan = (config.rounds > 1).then_some(outcome.plan);

    let enum_start = Instant::now();
    let junctions = enumerate_junctions(&input, config.k, config.mode, &marks);
    drop(marks);
    report.junction_occurrences = junctions.len();
    report.junctions = junctions.vertices.len();
    report.stage_times.push(("junctions", enum_start.elapsed()));

    let graph = if config.format == OutputFormat::Gfa1 {
        let build_start = Instant::now();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
        let graph = pool.install(|| build_edges(&input, &junctions));
        report.edges = graph.edge_count();
        report.edge_occurrences = graph.occurrence_count();
        report.stage_times.push(("edges", build_start.elapsed()));
        let graph_bytes: usize = graph
            .edges
            .iter()
            .map(|e| e.label.packed_bytes() + 64)
            .sum();
        report.peak_estimated_bytes = report
            .peak_estimated_bytes
            .max(input_bytes + junctions.memory_bytes() + graph_bytes);
        Some(graph)
    } else {
        None
    };

    Ok(RunOutput {
        config: config.clone(),
        input,
        junctions,
        graph,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize) -> RunConfig {
        RunConfig {
            k,
            filter_log2_bits: 10,
            workers: 2,
            chunk_size: 64,
            ..Default::default()
        }
    }

    #[test]
    fn validation() {
        assert!(config(2).validate().is_ok());
        assert!(config(129).validate().is_err());
        let mut c = config(2);
        c.filter_log2_bits = 5;
        assert!(c.validate().is_err());
        let mut c = config(2);
        c.rounds = 0;
        assert!(c.validate().is_err());
        let mut c = config(40);
        c.chunk_size = 64;
        assert!(c.validate().is_err());
        let mut c = config(2);
        c.workers = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn shared_prefix_end_to_end() {
        let input = SequenceSet::from_strings(&["TGGCACGTC", "TGGCACTTC"], 2).unwrap();
        let mut c = config(2);
        c.mode = StrandMode::Single;
        let out = run_on(input, &c, &mut ()).unwrap();
        assert_eq!(out.report.junction_occurrences, 6);
        assert_eq!(out.report.junctions, 3);
        assert_eq!(out.graph.as_ref().unwrap().edge_count(), 3);
        let mut tsv = Vec::new();
        out.report.write_mark_counts(&mut tsv).unwrap();
        assert!(String::from_utf8(tsv).unwrap().ends_with("second\t6\n"));
    }

    #[test]
    fn output_is_independent_of_workers_chunks_and_rounds() {
        let seqs: Vec<String> = (0..4)
            .map(|i| {
                (0..700u64)
                    .map(|j| ['A', 'C', 'G', 'T'][((j * 7919 + i * 13) ^ (j >> 3)) as usize % 4])
                    .collect()
            })
            .collect();
        let input = SequenceSet::from_strings(&seqs, 5).unwrap();
        let render = |workers, chunk_size, rounds| {
            let c = RunConfig {
                workers,
                chunk_size,
                rounds,
                ..config(5)
            };
            let out = run_on(input.clone(), &c, &mut ()).unwrap();
            let mut buf = Vec::new();
            out.write_output(&mut buf).unwrap();
            buf
        };
        let reference = render(1, 1 << 20, 1);
        for (w, c, r) in [(8, 1 << 20, 1), (3, 10, 1), (2, 37, 3), (8, 64, 8)] {
            assert_eq!(
                render(w, c, r),
                reference,
                "workers {w} chunk {c} rounds {r}"
            );
        }
    }
}
