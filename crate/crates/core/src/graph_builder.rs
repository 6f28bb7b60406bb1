//! From final junction marks to the compacted multigraph.
//!
//! Junction positions are listed in input order and numbered by the first
//! occurrence of their key k-mer. Every two consecutive junction positions of
//! a segment delimit one edge occurrence whose label runs from the first
//! junction k-mer to the end of the second. Occurrences with the same label
//! (up to reverse complement in double-strand mode) are merged and counted.

use std::collections::hash_map::Entry;
use std::hash::{Hash, Hasher};
use std::io::{self, Write};

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet, FxHasher};

use crate::junction_filter::MarkArray;
use crate::kmer_model::{Mer, Strand, StrandMode};
use crate::sequence_io::{DnaString, SequenceSet};

/// One junction occurrence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JunctionRecord {
    /// Flat segment index into the [`SequenceSet`].
    pub segment: u32,
    /// Offset of the k-mer inside its segment.
    pub offset: u64,
    pub junction_id: u32,
    pub strand: Strand,
}

/// All junction occurrences in input order, plus the junction k-mers.
#[derive(Clone, Debug, Default)]
pub struct JunctionIndex {
    pub k: usize,
    pub mode: StrandMode,
    /// Key-form k-mer of each junction id.
    pub vertices: Vec<Mer>,
    pub records: Vec<JunctionRecord>,
    /// `records[segment_starts[s]..segment_starts[s + 1]]` belong to segment `s`.
    segment_starts: Vec<usize>,
}

impl JunctionIndex {
    pub fn segment_records(&self, segment: usize) -> &[JunctionRecord] {
        &self.records[self.segment_starts[segment]..self.segment_starts[segment + 1]]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn memory_bytes(&self) -> usize {
        self.records.capacity() * std::mem::size_of::<JunctionRecord>()
            + self.vertices.capacity() * std::mem::size_of::<Mer>()
            + self.segment_starts.capacity() * 8
    }
}

/// Lists the marked positions in input order and assigns junction ids by
/// first occurrence.
pub fn enumerate_junctions(
    input: &SequenceSet,
    k: usize,
    mode: StrandMode,
    marks: &MarkArray,
) -> JunctionIndex {
    let mut ids: FxHashMap<Mer, u32> = FxHashMap::default();
    let mut index = JunctionIndex {
        k,
        mode,
        records: Vec::with_capacity(marks.count()),
        segment_starts: Vec::with_capacity(input.segment_count() + 1),
        ..Default::default()
    };
    for (seg_idx, seg) in input.segments().enumerate() {
        index.segment_starts.push(index.records.len());
        for pos in marks.marked_positions(seg_idx) {
            let (key, strand) = mode.key_of(&Mer::from_dna(&seg.data, pos, k));
            let next = index.vertices.len() as u32;
            let junction_id = *ids.entry(key).or_insert_with(|| {
                index.vertices.push(key);
                next
            });
            index.records.push(JunctionRecord {
                segment: seg_idx as u32,
                offset: pos as u64,
                junction_id,
                strand,
            });
        }
    }
    index.segment_starts.push(index.records.len());
    index
}

/// An edge endpoint: a junction and the orientation in which the label
/// meets it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub vertex: u32,
    pub strand: Strand,
}

/// Where one occurrence of a label starts in the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceCoordinate {
    pub record: u32,
    /// Record coordinate of the occurrence's first base.
    pub offset: u64,
    /// Whether the occurrence spells the reverse complement of the label.
    pub strand: Strand,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    /// The label in key orientation.
    pub label: DnaString,
    pub multiplicity: u64,
    pub example: Option<SourceCoordinate>,
}

/// The compacted de Bruijn multigraph.
#[derive(Clone, Debug, Default)]
pub struct CompactedGraph {
    pub k: usize,
    pub mode: StrandMode,
    /// Key-form k-mer of each vertex id.
    pub vertices: Vec<Mer>,
    pub edges: Vec<Edge>,
}

/// Id-free, order-free view of a graph used to compare two constructions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalGraph {
    pub vertices: Vec<Mer>,
    /// `(from, from strand, to, to strand, label, multiplicity)`, sorted.
    pub edges: Vec<(Mer, Strand, Mer, Strand, Vec<u8>, u64)>,
}

/// Key orientation of a label and whether the occurrence was flipped.
pub(crate) fn orient_label(label: DnaString, mode: StrandMode) -> (DnaString, Strand) {
    if mode == StrandMode::Double {
        let rc = label.reverse_complement();
        if rc.cmp_lex(&label).is_lt() {
            return (rc, Strand::Reverse);
        }
    }
    (label, Strand::Forward)
}

/// Endpoint k-mers of a key-orientation label, in key form, with the
/// orientation in which the label spells them.
pub(crate) fn label_endpoints(
    label: &DnaString,
    k: usize,
    mode: StrandMode,
) -> ((Mer, Strand), (Mer, Strand)) {
    let first = Mer::from_dna(label, 0, k);
    let last = Mer::from_dna(label, label.len() - k, k);
    (mode.key_of(&first), mode.key_of(&last))
}

impl CompactedGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sum of multiplicities: the edge count of the multigraph.
    pub fn occurrence_count(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    pub fn canonical_form(&self) -> CanonicalGraph {
        let mut vertices = self.vertices.clone();
        vertices.sort();
        let mut edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                (
                    self.vertices[e.from.vertex as usize],
                    e.from.strand,
                    self.vertices[e.to.vertex as usize],
                    e.to.strand,
                    e.label.to_ascii(),
                    e.multiplicity,
                )
            })
            .collect();
        edges.sort();
        CanonicalGraph { vertices, edges }
    }

    /// Start and end k-mer (as spelled, not key form) of edge `e` read in
    /// orientation `o`.
    fn oriented_ends(&self, e: &Edge, o: Strand) -> (Mer, Mer) {
        let k = self.k;
        let first = Mer::from_dna(&e.label, 0, k);
        let last = Mer::from_dna(&e.label, e.label.len() - k, k);
        match o {
            Strand::Forward => (first, last),
            Strand::Reverse => (last.reverse_complement(), first.reverse_complement()),
        }
    }

    /// GFA link list: `(from edge, orientation, to edge, orientation)` for
    /// every pair of edge traversals meeting at a shared junction k-mer.
    /// In double-strand mode a link and its complement are listed once.
    pub fn links(&self) -> Vec<(usize, Strand, usize, Strand)> {
        let orientations: &[Strand] = match self.mode {
            StrandMode::Single => &[Strand::Forward],
            StrandMode::Double => &[Strand::Forward, Strand::Reverse],
        };
        // a self-reverse-complementary label reads the same both ways
        let palindromic: Vec<bool> = self
            .edges
            .iter()
            .map(|e| self.mode == StrandMode::Double && e.label == e.label.reverse_complement())
            .collect();
        let palindromic = &palindromic;
        let traversals = |i: usize| {
            orientations
                .iter()
                .copied()
                .filter(move |&o| o == Strand::Forward || !palindromic[i])
        };
        let mut starting: FxHashMap<Mer, Vec<(usize, Strand)>> = FxHashMap::default();
        for (i, e) in self.edges.iter().enumerate() {
            for o in traversals(i) {
                starting
                    .entry(self.oriented_ends(e, o).0)
                    .or_default()
                    .push((i, o));
            }
        }
        let mut seen = FxHashSet::default();
        let mut links = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            for o in traversals(i) {
                let end = self.oriented_ends(e, o).1;
                for &(j, p) in starting.get(&end).map_or(&[][..], Vec::as_slice) {
                    let link = (i, o, j, p);
                    let flip = |i: usize, o: Strand| if palindromic[i] { o } else { o.flip() };
                    let canonical = if self.mode == StrandMode::Double {
                        link.min((j, flip(j, p), i, flip(i, o)))
                    } else {
                        link
                    };
                    if seen.insert(canonical) {
                        links.push(canonical);
                    }
                }
            }
        }
        links
    }
}

/// Builds the graph from the junction index. Segments are processed in
/// order; inside a segment the occurrences are extracted in parallel and
/// merged sequentially, so the result does not depend on the thread count.
pub fn build_edges(input: &SequenceSet, index: &JunctionIndex) -> CompactedGraph {
    let (k, mode) = (index.k, index.mode);
    let mut graph = CompactedGraph {
        k,
        mode,
        vertices: index.vertices.clone(),
        edges: Vec::new(),
    };
    let vertex_ids: FxHashMap<Mer, u32> = index
        .vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (*v, i as u32))
        .collect();
    // label hash -> first edge with that hash; `chain` links the rest
    let mut by_hash: FxHashMap<u64, u32> = FxHashMap::default();
    let mut chain: Vec<u32> = Vec::new();
    const NONE: u32 = u32::MAX;

    for seg_idx in 0..input.segment_count() {
        let seg = input.segment(seg_idx);
        let records = index.segment_records(seg_idx);
        let record = input.location(seg_idx).record as u32;
        let occurrences: Vec<(u64, DnaString, SourceCoordinate)> = records
            .par_windows(2)
            .with_min_len(256)
            .map(|pair| {
                let (a, b) = (pair[0].offset as usize, pair[1].offset as usize);
                let (label, strand) = orient_label(seg.data.slice(a, b + k), mode);
                let mut h = FxHasher::default();
                label.hash(&mut h);
                let example = SourceCoordinate {
                    record,
                    offset: (seg.origin_offset + a) as u64,
                    strand,
                };
                (h.finish(), label, example)
            })
            .collect();
        for (hash, label, example) in occurrences {
            let mut slot = match by_hash.entry(hash) {
                Entry::Vacant(v) => {
                    v.insert(graph.edges.len() as u32);
                    NONE
                }
                Entry::Occupied(o) => *o.get(),
            };
            let mut found = false;
            while slot != NONE {
                let e = &mut graph.edges[slot as usize];
                if e.label == label {
                    e.multiplicity += 1;
                    found = true;
                    break;
                }
                if chain[slot as usize] == NONE {
                    chain[slot as usize] = graph.edges.len() as u32;
                    break;
                }
                slot = chain[slot as usize];
            }
            if found {
                continue;
            }
            let ((from, from_strand), (to, to_strand)) = label_endpoints(&label, k, mode);
            chain.push(NONE);
            graph.edges.push(Edge {
                from: Endpoint {
                    vertex: vertex_ids[&from],
                    strand: from_strand,
                },
                to: Endpoint {
                    vertex: vertex_ids[&to],
                    strand: to_strand,
                },
                label,
                multiplicity: 1,
                example: Some(example),
            });
        }
    }
    graph
}

/// Stable GFA segment names: FNV-1a of the label text, with a numeric
/// suffix in the unlikely case two labels share a hash.
pub fn segment_names(graph: &CompactedGraph) -> Vec<String> {
    let mut taken: FxHashMap<u64, usize> = FxHashMap::default();
    graph
        .edges
        .iter()
        .map(|e| {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for b in e.label.to_ascii() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            let n = taken.entry(h).or_insert(0);
            *n += 1;
            if *n == 1 {
                format!("{h:016x}")
            } else {
                format!("{h:016x}_{}", *n - 1)
            }
        })
        .collect()
}

pub fn emit_gfa<W: Write>(
    graph: &CompactedGraph,
    input: &SequenceSet,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "H\tVN:Z:1.0\tKL:i:{}", graph.k)?;
    writeln!(out, "H\tsm:Z:{}", graph.mode.name())?;
    let names = segment_names(graph);
    for (e, name) in graph.edges.iter().zip(&names) {
        out.write_all(b"S\t")?;
        out.write_all(name.as_bytes())?;
        out.write_all(b"\t")?;
        out.write_all(&e.label.to_ascii())?;
        write!(out, "\tmu:i:{}", e.multiplicity)?;
        if let Some(ex) = e.example {
            write!(
                out,
                "\tsc:Z:{}:{}",
                input.records()[ex.record as usize].id,
                ex.offset
            )?;
        }
        out.write_all(b"\n")?;
    }
    for (i, o, j, p) in graph.links() {
        writeln!(
            out,
            "L\t{}\t{}\t{}\t{}\t{}M",
            names[i],
            o.symbol(),
            names[j],
            p.symbol(),
            graph.k
        )?;
    }
    Ok(())
}

pub fn emit_junctions_tsv<W: Write>(
    index: &JunctionIndex,
    input: &SequenceSet,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "seq_id\tsegment_index\toffset\tjunction_id\tstrand")?;
    for r in &index.records {
        let loc = input.location(r.segment as usize);
        let seg = input.segment(r.segment as usize);
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            input.records()[loc.record].id,
            loc.segment,
            seg.origin_offset as u64 + r.offset,
            r.junction_id,
            r.strand.symbol()
        )?;
    }
    Ok(())
}
