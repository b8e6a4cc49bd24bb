use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RatingKind {
    /// Naturalness, 1 to 5.
    Mos,
    /// Same/different speaker on a 4-level scale, 1 to 4.
    Similarity,
}

impl RatingKind {
    pub fn name(self) -> &'static str {
        match self {
            RatingKind::Mos => "mos",
            RatingKind::Similarity => "similarity",
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            RatingKind::Mos => (1.0, 5.0),
            RatingKind::Similarity => (1.0, 4.0),
        }
    }
}

impl fmt::Display for RatingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RatingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mos" => Ok(RatingKind::Mos),
            "similarity" | "sim" => Ok(RatingKind::Similarity),
            other => Err(format!("unknown rating kind '{other}'")),
        }
    }
}

/// One listener's judgement of one utterance (or, for similarity, one pair).
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub utterance_id: String,
    pub system_id: String,
    pub listener_id: String,
    pub kind: RatingKind,
    /// Integer for real listening tests; synthetic panels may hold reals.
    pub score: f64,
    pub is_natural: bool,
}

pub const HEADER: [&str; 6] = [
    "utterance_id",
    "system_id",
    "listener_id",
    "kind",
    "score",
    "is_natural",
];

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Parses ratings CSV from any reader. Columns are located by header name,
/// so extra columns and any order are accepted.
pub fn read_ratings<R: Read>(reader: R, source: &str) -> Result<Vec<RatingRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 6];
    for (slot, name) in col.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(DataError::MissingColumn(name))?;
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(col[i]).unwrap_or("");
        let parse_err = |message: String| DataError::Parse { line, message };
        let kind: RatingKind = field(3).parse().map_err(parse_err)?;
        let score: f64 = field(4)
            .parse()
            .map_err(|_| parse_err(format!("score '{}' is not a number", field(4))))?;
        let (lo, hi) = kind.range();
        if !(lo..=hi).contains(&score) {
            return Err(DataError::ScoreRange {
                line,
                kind,
                score,
                lo,
                hi,
            });
        }
        let is_natural =
            parse_bool(field(5)).ok_or_else(|| parse_err(format!("is_natural '{}' is not a boolean", field(5))))?;
        let record = RatingRecord {
            utterance_id: field(0).to_string(),
            system_id: field(1).to_string(),
            listener_id: field(2).to_string(),
            kind,
            score,
            is_natural,
        };
        if record.utterance_id.is_empty() || record.listener_id.is_empty() {
            return Err(parse_err("empty utterance_id or listener_id".into()));
        }
        if !seen.insert((record.listener_id.clone(), record.utterance_id.clone(), kind)) {
            return Err(DataError::Duplicate {
                listener: record.listener_id,
                utterance: record.utterance_id,
                kind,
            });
        }
        out.push(record);
    }
    if out.is_empty() {
        return Err(DataError::Empty(source.to_string()));
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<RatingRecord>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    read_ratings(file, &path.display().to_string())
}

pub fn write_ratings<W: Write>(writer: W, records: &[RatingRecord]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.utterance_id.as_str(),
            r.system_id.as_str(),
            r.listener_id.as_str(),
            r.kind.name(),
            &r.score.to_string(),
            if r.is_natural { "1" } else { "0" },
        ])?;
    }
    w.flush().map_err(|e| DataError::io("<ratings>", e))?;
    Ok(())
}

pub fn save_ratings(path: &Path, records: &[RatingRecord]) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    write_ratings(std::io::BufWriter::new(file), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEAD: &str = "utterance_id,system_id,listener_id,kind,score,is_natural\n";

    fn parse(body: &str) -> Result<Vec<RatingRecord>, DataError> {
        read_ratings(format!("{HEAD}{body}").as_bytes(), "test")
    }

    #[test]
    fn reads_valid_rows() {
        let r = parse("u1,S01,l1,mos,2,0\nu1,S01,l2,mos,3,false\nu2,N,l1,similarity,4,1\n").unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[2].kind, RatingKind::Similarity);
        assert!(r[2].is_natural);
        assert_eq!(r[1].score, 3.0);
    }

    #[test]
    fn columns_may_be_reordered() {
        let text = "score,kind,is_natural,listener_id,system_id,utterance_id,extra\n4,mos,0,l,s,u,x\n";
        let r = read_ratings(text.as_bytes(), "t").unwrap();
        assert_eq!(r[0].utterance_id, "u");
        assert_eq!(r[0].score, 4.0);
    }

    #[test]
    fn out_of_range_scores_fail() {
        assert!(matches!(parse("u,s,l,mos,6,0\n"), Err(DataError::ScoreRange { .. })));
        assert!(matches!(parse("u,s,l,mos,0,0\n"), Err(DataError::ScoreRange { .. })));
        assert!(matches!(
            parse("u,s,l,similarity,5,0\n"),
            Err(DataError::ScoreRange { .. })
        ));
    }

    #[test]
    fn empty_file_fails() {
        assert!(matches!(parse(""), Err(DataError::Empty(_))));
        assert!(read_ratings("".as_bytes(), "t").is_err());
    }

    #[test]
    fn missing_column_fails() {
        let text = "utterance_id,system_id,listener_id,score,is_natural\nu,s,l,3,0\n";
        assert!(matches!(
            read_ratings(text.as_bytes(), "t"),
            Err(DataError::MissingColumn("kind"))
        ));
    }

    #[test]
    fn duplicates_fail() {
        assert!(matches!(
            parse("u,s,l,mos,3,0\nu,s,l,mos,4,0\n"),
            Err(DataError::Duplicate { .. })
        ));
        assert!(parse("u,s,l,mos,3,0\nu,s,l,similarity,4,0\n").is_ok());
    }

    #[test]
    fn malformed_fields_fail() {
        assert!(matches!(parse("u,s,l,mos,abc,0\n"), Err(DataError::Parse { .. })));
        assert!(matches!(parse("u,s,l,quality,3,0\n"), Err(DataError::Parse { .. })));
        assert!(matches!(parse("u,s,l,mos,3,maybe\n"), Err(DataError::Parse { .. })));
    }

    fn record() -> impl Strategy<Value = RatingRecord> {
        (
            "[a-z0-9_]{1,6}",
            "[A-Z0-9]{1,4}",
            prop::bool::ANY,
            0u32..400,
            prop::bool::ANY,
        )
            .prop_map(|(utt, sys, sim, raw, natural)| {
                let kind = if sim { RatingKind::Similarity } else { RatingKind::Mos };
                let hi = kind.range().1;
                RatingRecord {
                    utterance_id: utt,
                    system_id: sys,
                    listener_id: String::new(),
                    kind,
                    score: 1.0 + (raw as f64 / 400.0) * (hi - 1.0),
                    is_natural: natural,
                }
            })
    }

    proptest! {
        #[test]
        fn save_then_load_is_identity(mut records in prop::collection::vec(record(), 1..40)) {
            for (i, r) in records.iter_mut().enumerate() {
                r.listener_id = format!("L{i}");
            }
            let mut buf = Vec::new();
            write_ratings(&mut buf, &records).unwrap();
            let back = read_ratings(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
