//! Closed-form estimators for the filter's error and memory behavior.
//!
//! All of them assume independent Bloom queries and are estimates, not
//! bounds.

use crate::edge_membership::MIN_FILTER_LOG2;
use crate::error::{Error, Result};

/// Inputs of the estimators.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AnalysisModel {
    /// Total input length in bases.
    pub m: u64,
    /// Distinct (k+1)-mers.
    pub edges: u64,
    /// Junction k-mers.
    pub junctions: u64,
    /// Non-junction k-mers.
    pub links: u64,
    pub hashes: u32,
    pub filter_bits: u64,
    /// Mean occurrence count of a false-positive junction.
    pub r: f64,
    /// Edge count of the compacted multigraph.
    pub gc_edges: u64,
    pub k: usize,
}

impl AnalysisModel {
    pub fn bloom_fp_prob(&self) -> f64 {
        bloom_fp_prob(self.hashes, self.edges, self.filter_bits)
    }

    pub fn junction_fp_prob(&self) -> f64 {
        junction_fp_prob(self.bloom_fp_prob())
    }

    pub fn expected_false_junctions(&self) -> f64 {
        expected_false_junctions(self.links, self.junction_fp_prob())
    }

    pub fn expected_marks(&self) -> f64 {
        expected_marks(self.gc_edges, self.links, self.junction_fp_prob(), self.r)
    }

    pub fn memory_estimate(&self) -> f64 {
        memory_estimate(
            self.filter_bits,
            self.junctions,
            self.links,
            self.junction_fp_prob(),
            self.k,
        )
    }
}

/// False-positive rate of a Bloom filter of `b` bits with `h` functions after
/// `e` distinct insertions: `(1 - e^(-h e / b))^h`.
pub fn bloom_fp_prob(h: u32, e: u64, b: u64) -> f64 {
    assert!(b > 0, "filter must have at least one bit");
    let x = -(f64::from(h) * e as f64 / b as f64);
    (-x.exp_m1()).powi(h as i32)
}

/// Probability that a link survives the first pass: one of its six absent
/// neighbouring edges tests positive.
pub fn junction_fp_prob(q: f64) -> f64 {
    -(6.0 * (-q).ln_1p()).exp_m1()
}

pub fn expected_false_junctions(links: u64, p: f64) -> f64 {
    links as f64 * p
}

/// Expected marks left after the first pass.
pub fn expected_marks(gc_edges: u64, links: u64, p: f64, r: f64) -> f64 {
    gc_edges as f64 + links as f64 * p * r
}

/// Peak memory in bits: the filter, or the exact table holding up to eight
/// (k+1)-mers per surviving candidate k-mer at two words' worth of bits per
/// base, whichever is larger.
pub fn memory_estimate(b: u64, junctions: u64, links: u64, p: f64, k: usize) -> f64 {
    let table = 8.0 * (junctions as f64 + links as f64 * p) * 2.0 * (k as f64 + 1.0);
    (b as f64).max(table)
}

/// Largest power of two not above `budget_bits`.
pub fn suggest_filter_size(budget_bits: u64) -> Result<u64> {
    if budget_bits < 1 << MIN_FILTER_LOG2 {
        return Err(Error::config(format!(
            "a budget of {budget_bits} bits is below the smallest filter of {} bits",
            1u64 << MIN_FILTER_LOG2
        )));
    }
    Ok(1 << budget_bits.ilog2())
}
