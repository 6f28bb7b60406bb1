//! FASTA ingestion and packed sequence storage.
//!
//! Records are split on every character outside ACGT (N and the other IUPAC
//! ambiguity codes), so downstream stages only ever see clean segments and no
//! k-mer ever spans an undetermined base.

mod dna;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

pub use dna::{complement, decode_base, encode_base, BaseCode, DnaString};

use crate::error::{Error, Result};

/// A maximal ACGT run of a record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub data: DnaString,
    /// 0-based offset of the first base in the source record.
    pub origin_offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reverse_complement(&self) -> Segment {
        Segment {
            data: self.data.reverse_complement(),
            origin_offset: self.origin_offset,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceRecord {
    pub id: String,
    /// Length of the raw record sequence, separators included.
    pub length: usize,
    /// Segments in record coordinate order.
    pub segments: Vec<Segment>,
}

#[derive(Debug, Default)]
pub struct ParsedFasta {
    pub records: Vec<SequenceRecord>,
    /// Segments discarded because they are shorter than k.
    pub dropped_segments: usize,
}

struct RecordBuilder {
    id: String,
    length: usize,
    segments: Vec<Segment>,
    open: Option<Segment>,
}

impl RecordBuilder {
    fn close_segment(&mut self, min_len: usize, dropped: &mut usize) {
        if let Some(mut seg) = self.open.take() {
            if seg.len() >= min_len {
                seg.data.shrink_to_fit();
                self.segments.push(seg);
            } else {
                *dropped += 1;
            }
        }
    }

    fn feed(&mut self, line: &[u8], min_len: usize, dropped: &mut usize) {
        for &c in line {
            match encode_base(c) {
                Some(code) => self
                    .open
                    .get_or_insert_with(|| Segment {
                        data: DnaString::new(),
                        origin_offset: self.length,
                    })
                    .data
                    .push(code),
                None => self.close_segment(min_len, dropped),
            }
            self.length += 1;
        }
    }

    fn finish(mut self, min_len: usize, dropped: &mut usize) -> SequenceRecord {
        self.close_segment(min_len, dropped);
        SequenceRecord {
            id: self.id,
            length: self.length,
            segments: self.segments,
        }
    }
}

/// Parses a FASTA stream, keeping segments of at least `min_len` bases.
///
/// Multi-line records and CRLF line endings are accepted; characters are
/// case-insensitive. An empty stream yields no records.
pub fn parse_fasta<R: BufRead>(mut reader: R, min_len: usize) -> Result<ParsedFasta> {
    let mut out = ParsedFasta::default();
    let mut current: Option<RecordBuilder> = None;
    let mut line = Vec::new();
    let mut line_no = 0;
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        while line.last().is_some_and(|c| c.is_ascii_whitespace()) {
            line.pop();
        }
        if let Some(header) = line.strip_prefix(b">") {
            let id = header
                .split(|c| c.is_ascii_whitespace())
                .find(|tok| !tok.is_empty())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "FASTA header without a sequence id".into(),
                })?;
            if let Some(done) = current.take() {
                out.records
                    .push(done.finish(min_len, &mut out.dropped_segments));
            }
            current = Some(RecordBuilder {
                id: String::from_utf8_lossy(id).into_owned(),
                length: 0,
                segments: Vec::new(),
                open: None,
            });
        } else if !line.is_empty() {
            let Some(rec) = current.as_mut() else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "sequence data before the first FASTA header".into(),
                });
            };
            rec.feed(&line, min_len, &mut out.dropped_segments);
        }
    }
    if let Some(done) = current.take() {
        out.records
            .push(done.finish(min_len, &mut out.dropped_segments));
    }
    if out.dropped_segments > 0 {
        log::warn!(
            "dropped {} segment(s) shorter than {} bases",
            out.dropped_segments,
            min_len
        );
    }
    Ok(out)
}

pub fn read_fasta_file(path: &Path, min_len: usize) -> Result<ParsedFasta> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_fasta(BufReader::with_capacity(1 << 16, file), min_len).map_err(|e| match e {
        Error::Output(source) => Error::io(path, source),
        other => other,
    })
}

/// Reads a manifest listing one FASTA path per line. Blank lines and lines
/// starting with `#` are skipped; relative paths resolve against the
/// manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = Path::new(l);
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        })
        .collect())
}

/// Position of a segment inside the record list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentLocation {
    pub record: usize,
    pub segment: usize,
}

/// The immutable input of a run: all records plus a flat segment index that
/// the mark arrays and the scanners are keyed on.
#[derive(Clone, Debug, Default)]
pub struct SequenceSet {
    records: Vec<SequenceRecord>,
    locations: Vec<SegmentLocation>,
}

impl SequenceSet {
    pub fn new(records: Vec<SequenceRecord>) -> Self {
        let locations = records
            .iter()
            .enumerate()
            .flat_map(|(r, rec)| {
                (0..rec.segments.len()).map(move |s| SegmentLocation {
                    record: r,
                    segment: s,
                })
            })
            .collect();
        SequenceSet { records, locations }
    }

    /// Builds a set from plain ACGT strings (ids `s0`, `s1`, ...). Mostly for
    /// tests and small programmatic inputs.
    pub fn from_strings<S: AsRef<str>>(seqs: &[S], min_len: usize) -> Result<Self> {
        let mut fasta = String::new();
        for (i, s) in seqs.iter().enumerate() {
            fasta.push_str(&format!(">s{i}\n{}\n", s.as_ref()));
        }
        Ok(Self::new(parse_fasta(fasta.as_bytes(), min_len)?.records))
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn segment_count(&self) -> usize {
        self.locations.len()
    }

    pub fn location(&self, flat: usize) -> SegmentLocation {
        self.locations[flat]
    }

    pub fn segment(&self, flat: usize) -> &Segment {
        let loc = self.locations[flat];
        &self.records[loc.record].segments[loc.segment]
    }

    pub fn segments(&self) -> impl ExactSizeIterator<Item = &Segment> + '_ {
        self.locations
            .iter()
            .map(|loc| &self.records[loc.record].segments[loc.segment])
    }

    pub fn record_of(&self, flat: usize) -> &SequenceRecord {
        &self.records[self.locations[flat].record]
    }

    pub fn total_bases(&self) -> usize {
        self.segments().map(Segment::len).sum()
    }

    /// Number of k-mer start positions over all segments.
    pub fn kmer_positions(&self, k: usize) -> usize {
        self.segments()
            .map(|s| (s.len() + 1).saturating_sub(k))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn segs(rec: &SequenceRecord) -> Vec<String> {
        rec.segments.iter().map(|s| s.data.to_string()).collect()
    }

    #[test]
    fn single_clean_record() {
        let p = parse_fasta(&b">x\nACGT\n"[..], 1).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].id, "x");
        assert_eq!(segs(&p.records[0]), ["ACGT"]);
    }

    #[test]
    fn splits_on_n() {
        let p = parse_fasta(&b">x\nACGTNNACG\n"[..], 3).unwrap();
        assert_eq!(segs(&p.records[0]), ["ACGT", "ACG"]);
        assert_eq!(p.records[0].segments[1].origin_offset, 6);
        assert_eq!(p.records[0].length, 9);
    }

    #[test]
    fn shared_prefix_strings() {
        let p = parse_fasta(&b">a\nTGGCACGTC\n>b\nTGGCACTTC\n"[..], 2).unwrap();
        let ids: Vec<_> = p.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(segs(&p.records[0]), ["TGGCACGTC"]);
        assert_eq!(segs(&p.records[1]), ["TGGCACTTC"]);
    }

    #[test]
    fn multiline_crlf_lowercase_and_iupac() {
        let input = b">r1 some description\r\nacgtR\r\nGGTT\r\n\r\n>r2\nAC\n";
        let p = parse_fasta(&input[..], 3).unwrap();
        assert_eq!(segs(&p.records[0]), ["ACGT", "GGTT"]);
        assert_eq!(p.records[0].id, "r1");
        // "AC" is shorter than k=3
        assert!(p.records[1].segments.is_empty());
        assert_eq!(p.dropped_segments, 1);
    }

    #[test]
    fn empty_header_is_error_with_line() {
        match parse_fasta(&b">a\nACGT\n>\nACGT\n"[..], 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_stream_is_not_an_error() {
        assert!(parse_fasta(&b""[..], 5).unwrap().records.is_empty());
    }

    #[test]
    fn sequence_before_header_is_error() {
        assert!(matches!(
            parse_fasta(&b"ACGT\n"[..], 1),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn segment_reverse_complement() {
        let seg = Segment {
            data: DnaString::from_ascii(b"TGGCACGTC").unwrap(),
            origin_offset: 3,
        };
        assert_eq!(seg.reverse_complement().data.to_string(), "GACGTGCCA");
    }

    proptest! {
        // Filling the gaps between segments with the separator reproduces the
        // uppercased input (k = 1 so no segment is dropped).
        #[test]
        fn segments_and_gaps_roundtrip(seq in "[ACGTNacgtn]{0,200}", width in 1usize..80) {
            let mut fasta = String::from(">r\n");
            for chunk in seq.as_bytes().chunks(width) {
                fasta.push_str(std::str::from_utf8(chunk).unwrap());
                fasta.push('\n');
            }
            let p = parse_fasta(fasta.as_bytes(), 1).unwrap();
            let rec = &p.records[0];
            let mut rebuilt = vec![b'N'; rec.length];
            for s in &rec.segments {
                rebuilt[s.origin_offset..s.origin_offset + s.len()].copy_from_slice(&s.data.to_ascii());
            }
            prop_assert_eq!(String::from_utf8(rebuilt).unwrap(), seq.to_uppercase());
        }
    }
}
