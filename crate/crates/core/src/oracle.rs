//! Reference construction for tests: the ordinary de Bruijn graph built
//! explicitly over plain byte strings, then compacted by walking maximal
//! non-branching paths.
//!
//! Nothing here shares code with the filtering pipeline except the output
//! data model, so the two can be compared structurally.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::graph_builder::{label_endpoints, orient_label, CompactedGraph, Edge, Endpoint};
use crate::kmer_model::{Mer, StrandMode};
use crate::sequence_io::{DnaString, SequenceSet};

/// Largest input the oracle agrees to build.
pub const ORACLE_MAX_BASES: usize = 10_000_000;

fn revcomp(s: &[u8]) -> Vec<u8> {
    s.iter()
        .rev()
        .map(|&c| match c {
            b'A' => b'T',
            b'C' => b'G',
            b'G' => b'C',
            _ => b'A',
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct VertexInfo {
    pub in_neighbors: BTreeSet<Vec<u8>>,
    pub out_neighbors: BTreeSet<Vec<u8>>,
    pub occurrences: u64,
    pub sentinel: bool,
}

/// G(S, k), or its comprehensive version over both strands.
#[derive(Clone, Debug)]
pub struct ExplicitGraph {
    pub k: usize,
    pub vertices: HashMap<Vec<u8>, VertexInfo>,
    /// (k+1)-mer multiplicities of the multigraph.
    pub edges: HashMap<Vec<u8>, u64>,
}

impl ExplicitGraph {
    pub fn build(input: &SequenceSet, k: usize, mode: StrandMode) -> Result<Self> {
        let bases = input.total_bases();
        if bases > ORACLE_MAX_BASES {
            return Err(Error::OracleTooLarge {
                bases,
                cap: ORACLE_MAX_BASES,
            });
        }
        let mut strings: Vec<Vec<u8>> = input.segments().map(|s| s.data.to_ascii()).collect();
        if mode == StrandMode::Double {
            let rcs: Vec<_> = strings.iter().map(|s| revcomp(s)).collect();
            strings.extend(rcs);
        }
        let mut g = ExplicitGraph {
            k,
            vertices: HashMap::new(),
            edges: HashMap::new(),
        };
        for s in strings.iter().filter(|s| s.len() >= k) {
            for v in s.windows(k) {
                g.vertices.entry(v.to_vec()).or_default().occurrences += 1;
            }
            for e in s.windows(k + 1) {
                *g.edges.entry(e.to_vec()).or_default() += 1;
                let (u, w) = (&e[..k], &e[1..]);
                g.vertices
                    .get_mut(u)
                    .unwrap()
                    .out_neighbors
                    .insert(w.to_vec());
                g.vertices
                    .get_mut(w)
                    .unwrap()
                    .in_neighbors
                    .insert(u.to_vec());
            }
            g.vertices.get_mut(&s[..k]).unwrap().sentinel = true;
            g.vertices.get_mut(&s[s.len() - k..]).unwrap().sentinel = true;
        }
        Ok(g)
    }

    /// A bifurcation, or a sentinel, or both.
    pub fn is_junction(&self, v: &[u8]) -> bool {
        let info = &self.vertices[v];
        info.sentinel || info.in_neighbors.len() != 1 || info.out_neighbors.len() != 1
    }

    /// Maximal non-branching paths, each as its spelled string, with the
    /// multiplicity of its first edge.
    fn paths(&self) -> Vec<(Vec<u8>, u64)> {
        let k = self.k;
        let mut starts: Vec<&Vec<u8>> = self
            .vertices
            .keys()
            .filter(|v| self.is_junction(v))
            .collect();
        starts.sort();
        let mut out = Vec::new();
        for u in starts {
            for w in &self.vertices[u].out_neighbors {
                let mut label = u.clone();
                label.push(w[k - 1]);
                let multiplicity = self.edges[&label];
                let mut cur = w.clone();
                while !self.is_junction(&cur) {
                    let next = self.vertices[&cur].out_neighbors.first().unwrap();
                    label.push(next[k - 1]);
                    cur = next.clone();
                }
                out.push((label, multiplicity));
            }
        }
        out
    }
}

/// Positions of junction k-mers in each segment, computed from the explicit
/// graph.
pub fn junction_positions(
    input: &SequenceSet,
    k: usize,
    mode: StrandMode,
) -> Result<Vec<Vec<usize>>> {
    let g = ExplicitGraph::build(input, k, mode)?;
    Ok(input
        .segments()
        .map(|s| {
            let ascii = s.data.to_ascii();
            ascii
                .windows(k)
                .enumerate()
                .filter(|(_, v)| g.is_junction(v))
                .map(|(i, _)| i)
                .collect()
        })
        .collect())
}

/// The compacted graph by brute force.
pub fn naive_compacted_graph(
    input: &SequenceSet,
    k: usize,
    mode: StrandMode,
) -> Result<CompactedGraph> {
    let g = ExplicitGraph::build(input, k, mode)?;
    let mut labels: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for (path, multiplicity) in g.paths() {
        let label = DnaString::from_ascii(&path).expect("oracle strings are ACGT");
        let (label, _) = orient_label(label, mode);
        let palindrome = mode == StrandMode::Double && label == label.reverse_complement();
        let count = if palindrome {
            multiplicity / 2
        } else {
            multiplicity
        };
        labels.insert(label.to_ascii(), count);
    }

    let mut vertex_set: BTreeSet<Mer> = BTreeSet::new();
    for v in g.vertices.keys().filter(|v| g.is_junction(v)) {
        vertex_set.insert(mode.key_of(&Mer::from_ascii(v).unwrap()).0);
    }
    let vertices: Vec<Mer> = vertex_set.into_iter().collect();
    let id = |m: &Mer| vertices.binary_search(m).unwrap() as u32;

    let edges = labels
        .into_iter()
        .map(|(ascii, multiplicity)| {
            let label = DnaString::from_ascii(&ascii).unwrap();
            let ((from, fs), (to, ts)) = label_endpoints(&label, k, mode);
            Edge {
                from: Endpoint {
                    vertex: id(&from),
                    strand: fs,
                },
                to: Endpoint {
                    vertex: id(&to),
                    strand: ts,
                },
                label,
                multiplicity,
                example: None,
            }
        })
        .collect();
    Ok(CompactedGraph {
        k,
        mode,
        vertices,
        edges,
    })
}
