mod common;

use cdbg::junction_filter::{FilterParams, JunctionFilter};
use cdbg::oracle::{junction_positions, naive_compacted_graph};
use cdbg::partitioner::{run_rounds, RoundsParams};
use cdbg::pipeline::{run_on, RunConfig};
use cdbg::{SequenceSet, StrandMode};
use rand::Rng;

const KS: [usize; 5] = [2, 3, 5, 11, 25];

#[test]
fn pipeline_matches_oracle_on_random_families() {
    let mut rng = common::rng(2024);
    for case in 0..120 {
        let k = KS[case % KS.len()];
        let mode = if case % 2 == 0 {
            StrandMode::Single
        } else {
            StrandMode::Double
        };
        let seqs = {
            let n = rng.gen_range(1..=6);
            common::family(&mut rng, n, 50..=600)
        };
        let input = SequenceSet::from_strings(&seqs, k).unwrap();
        let config = RunConfig {
            k,
            mode,
            filter_log2_bits: rng.gen_range(6..=16),
            rounds: [1, 2, 4][rng.gen_range(0..3)],
            workers: rng.gen_range(1..=4),
            chunk_size: rng.gen_range(2 * k..=300.max(2 * k)),
            buckets: 64,
            ..Default::default()
        };
        let out = run_on(input.clone(), &config, &mut ()).unwrap();
        let expected = naive_compacted_graph(&input, k, mode).unwrap();
        assert_eq!(
            out.graph.unwrap().canonical_form(),
            expected.canonical_form(),
            "case {case}: k={k} {mode:?} {seqs:?}"
        );
    }
}

#[test]
fn first_pass_keeps_every_junction_and_second_pass_is_exact() {
    let mut rng = common::rng(7);
    for case in 0..60 {
        let k = KS[case % KS.len()];
        let mode = if case % 3 == 0 {
            StrandMode::Single
        } else {
            StrandMode::Double
        };
        let seqs = {
            let n = rng.gen_range(1..=4);
            common::family(&mut rng, n, 50..=400)
        };
        let input = SequenceSet::from_strings(&seqs, k).unwrap();
        let params = FilterParams {
            workers: 3,
            chunk_size: 4 * k + 7,
            ..FilterParams::new(k, mode)
        };
        let filter = JunctionFilter::new(&input, &params).unwrap();
        let truth = junction_positions(&input, k, mode).unwrap();
        let mut marks = filter.all_marked();
        let mut after_first = None;
        let stats = filter
            .two_pass_traced(&mut marks, rng.gen_range(6..=12), |m| {
                after_first = Some(m.clone())
            })
            .unwrap();
        let after_first = after_first.unwrap();
        for (seg, want) in truth.iter().enumerate() {
            let first: Vec<usize> = after_first.marked_positions(seg).collect();
            assert!(want.iter().all(|p| first.contains(p)), "case {case}");
            let got: Vec<usize> = marks.marked_positions(seg).collect();
            assert_eq!(&got, want, "case {case}");
        }
        assert!(stats.first.marks_before >= stats.first.marks_after);
        assert!(stats.first.marks_after >= stats.second.marks_after);
        assert!(after_first.closure_violation(&input, k, mode).is_none());
    }
}

#[test]
fn rounds_give_the_same_marks() {
    let mut rng = common::rng(99);
    for case in 0..30 {
        let k = KS[case % KS.len()];
        let seqs = common::family(&mut rng, 3, 100..=500);
        let input = SequenceSet::from_strings(&seqs, k).unwrap();
        let filter =
            JunctionFilter::new(&input, &FilterParams::new(k, StrandMode::Double)).unwrap();
        let params = |rounds| RoundsParams {
            rounds,
            filter_log2: 10,
            buckets: 256,
            partial: false,
        };
        let (reference, _) = run_rounds(&filter, params(1)).unwrap();
        for rounds in [2, 3, 8] {
            let (marks, outcome) = run_rounds(&filter, params(rounds)).unwrap();
            assert_eq!(marks, reference, "case {case} rounds {rounds}");
            let initial: usize = outcome.rounds.iter().map(|r| r.initial_marks).sum();
            assert_eq!(initial, input.kmer_positions(k));
        }
    }
}

#[test]
fn partial_graph_is_a_refinement() {
    // Every first-pass junction survives into the partial graph, so stitching
    // its labels still spells each segment.
    let mut rng = common::rng(5);
    for case in 0..30 {
        let k = KS[case % KS.len()];
        let seqs = common::family(&mut rng, 2, 60..=300);
        let input = SequenceSet::from_strings(&seqs, k).unwrap();
        let config = RunConfig {
            k,
            filter_log2_bits: 6,
            partial: true,
            workers: 2,
            ..Default::default()
        };
        let out = run_on(input.clone(), &config, &mut ()).unwrap();
        let exact = naive_compacted_graph(&input, k, StrandMode::Double).unwrap();
        assert!(out.report.junctions >= exact.vertices.len());
        let g = out.graph.unwrap();
        assert!(g.occurrence_count() >= exact.occurrence_count());
    }
}
