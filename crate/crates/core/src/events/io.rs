//! Text formats for event sequences, gapped alignments and cluster
//! assignments.
//!
//! Sequences use a FASTA-like layout: a `>name return=<float>` header
//! followed by the letter string, `-` marking a gap. Assignments are CSV
//! rows `state_id,cluster,letter`, preceded by a `# centers=` comment.

use std::fmt::Write as _;

use super::{ClusterAssignment, EventAlphabet, EventSequence};
use crate::error::{Error, Result};

/// One FASTA-like record. `None` symbols are gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub source_return: Option<f64>,
    pub symbols: Vec<Option<usize>>,
}

impl Record {
    pub fn from_sequence(seq: &EventSequence) -> Self {
        Self {
            name: seq.name.clone(),
            source_return: Some(seq.source_return),
            symbols: seq.events.iter().map(|&e| Some(e)).collect(),
        }
    }

    /// Drops gaps; fails if the record has no return annotation.
    pub fn into_sequence(self) -> Result<EventSequence> {
        let ret = self.source_return.ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("record {:?} has no return", self.name),
        })?;
        Ok(EventSequence::new(self.name, self.symbols.into_iter().flatten().collect(), ret))
    }
}

fn symbol_char(s: Option<usize>) -> char {
    match s {
        Some(e) => {
            assert!(e < EventAlphabet::MAX_EVENTS, "event {e} is not letter-encodable");
            (b'A' + e as u8) as char
        }
        None => '-',
    }
}

pub fn write_fasta(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.name);
        if let Some(ret) = r.source_return {
            let _ = write!(out, " return={ret}");
        }
        out.push('\n');
        out.extend(r.symbols.iter().map(|&s| symbol_char(s)));
        out.push('\n');
    }
    out
}

pub fn read_fasta(text: &str) -> Result<Vec<Record>> {
    let mut records: Vec<Record> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            let mut parts = header.split_whitespace();
            let name = parts.next().unwrap_or("").to_string();
            let mut source_return = None;
            for p in parts {
                if let Some(v) = p.strip_prefix("return=") {
                    source_return = Some(v.parse::<f64>().map_err(|e| Error::Parse {
                        line: line_no,
                        msg: format!("bad return {v:?}: {e}"),
                    })?);
                }
            }
            records.push(Record {
                name,
                source_return,
                symbols: Vec::new(),
            });
        } else {
            let Some(rec) = records.last_mut() else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "sequence data before the first header".into(),
                });
            };
            for c in line.chars() {
                let sym = match c {
                    '-' | '.' => None,
                    c if c.is_ascii_alphabetic() => Some((c.to_ascii_uppercase() as u8 - b'A') as usize),
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: format!("unexpected symbol {c:?}"),
                        })
                    }
                };
                rec.symbols.push(sym);
            }
        }
    }
    Ok(records)
}

pub fn write_sequences(seqs: &[EventSequence]) -> String {
    write_fasta(&seqs.iter().map(Record::from_sequence).collect::<Vec<_>>())
}

pub fn read_sequences(text: &str) -> Result<Vec<EventSequence>> {
    read_fasta(text)?.into_iter().map(Record::into_sequence).collect()
}

pub fn write_assignment_csv(a: &ClusterAssignment) -> String {
    let alphabet = EventAlphabet::new(a.n_clusters().clamp(1, EventAlphabet::MAX_EVENTS)).ok();
    let mut out = String::new();
    let centers: Vec<String> = a.centers.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "# centers={}", centers.join(","));
    out.push_str("state_id,cluster,letter\n");
    for (s, &l) in a.labels.iter().enumerate() {
        let letter = match alphabet {
            Some(al) if l < al.len() => al.letter(l).to_string(),
            _ => String::new(),
        };
        let _ = writeln!(out, "{s},{l},{letter}");
    }
    out
}

pub fn read_assignment_csv(text: &str) -> Result<ClusterAssignment> {
    let mut labels: Vec<(usize, usize)> = Vec::new();
    let mut centers: Option<Vec<usize>> = None;
    let parse = |line: usize, v: &str| {
        v.trim().parse::<usize>().map_err(|e| Error::Parse {
            line,
            msg: format!("bad integer {v:?}: {e}"),
        })
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("state_id") {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(list) = rest.trim().strip_prefix("centers=") {
                centers = Some(
                    list.split(',')
                        .filter(|s| !s.is_empty())
                        .map(|v| parse(line_no, v))
                        .collect::<Result<_>>()?,
                );
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected state_id,cluster,letter".into(),
            });
        }
        labels.push((parse(line_no, fields[0])?, parse(line_no, fields[1])?));
    }
    labels.sort_unstable();
    if labels.iter().enumerate().any(|(i, &(s, _))| s != i) {
        return Err(Error::Parse {
            line: 0,
            msg: "state ids must be dense 0..n".into(),
        });
    }
    let labels: Vec<usize> = labels.into_iter().map(|(_, l)| l).collect();
    let centers = match centers {
        Some(c) => c,
        None => {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            (0..k)
                .map(|c| labels.iter().position(|&l| l == c).unwrap_or(0))
                .collect()
        }
    };
    ClusterAssignment::new(labels, centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fasta_with_gaps() {
        let text = ">row0 return=1\nAB-C\n>row1\nA--C\n";
        let recs = read_fasta(text).unwrap();
        assert_eq!(recs[0].symbols, vec![Some(0), Some(1), None, Some(2)]);
        assert_eq!(recs[1].source_return, None);
        assert_eq!(write_fasta(&recs), text);
    }

    #[test]
    fn assignment_csv_round_trip() {
        let a = ClusterAssignment::new(vec![1, 0, 1, 2], vec![1, 2, 3]).unwrap();
        let text = write_assignment_csv(&a);
        assert!(text.contains("state_id,cluster,letter\n0,1,B\n"));
        assert_eq!(read_assignment_csv(&text).unwrap(), a);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_fasta("ABC\n").is_err());
        assert!(read_fasta(">x\nA1\n").is_err());
        assert!(read_sequences(">x\nAB\n").is_err());
    }

    proptest! {
        #[test]
        fn sequences_round_trip(
            seqs in prop::collection::vec(
                (prop::collection::vec(0usize..26, 1..40), any::<f64>().prop_filter("finite", |v| v.is_finite())),
                1..6,
            )
        ) {
            let seqs: Vec<EventSequence> = seqs
                .into_iter()
                .enumerate()
                .map(|(i, (ev, r))| EventSequence::new(format!("s{i}"), ev, r))
                .collect();
            let back = read_sequences(&write_sequences(&seqs)).unwrap();
            prop_assert_eq!(back, seqs);
        }
    }
}
