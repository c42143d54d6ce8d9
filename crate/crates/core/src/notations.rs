//! Evaluation categories and the results CSV (`notations_<type>.csv`).
//!
//! Columns are `name1,name2,Distance,note,comment`, comma separated, UTF-8,
//! `\n` line endings, fields quoted only when needed, distances with exactly
//! six decimals. Notes use their on-screen English labels.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER: [&str; 5] = ["name1", "name2", "Distance", "note", "comment"];

/// Human verdict on a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Note {
    #[default]
    NotEvaluated,
    Linked,
    ProbablyLinked,
    DontKnow,
    ProbablyNotLinked,
    NotLinked,
}

impl Note {
    pub const ALL: [Note; 6] = [
        Note::NotEvaluated,
        Note::Linked,
        Note::ProbablyLinked,
        Note::DontKnow,
        Note::ProbablyNotLinked,
        Note::NotLinked,
    ];

    /// On-screen label, also used in the CSV.
    pub fn label(self) -> &'static str {
        match self {
            Note::NotEvaluated => "Not evaluated",
            Note::Linked => "Linked",
            Note::ProbablyLinked => "Probably linked",
            Note::DontKnow => "Don't know",
            Note::ProbablyNotLinked => "Probably not linked",
            Note::NotLinked => "Not linked",
        }
    }

    /// Identifier used in JSON payloads.
    pub fn id(self) -> &'static str {
        match self {
            Note::NotEvaluated => "not_evaluated",
            Note::Linked => "linked",
            Note::ProbablyLinked => "probably_linked",
            Note::DontKnow => "dont_know",
            Note::ProbablyNotLinked => "probably_not_linked",
            Note::NotLinked => "not_linked",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown note {0:?}")]
pub struct UnknownNote(pub String);

impl FromStr for Note {
    type Err = UnknownNote;

    /// Accepts either the label or the identifier.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Note::ALL
            .into_iter()
            .find(|n| n.label() == s || n.id() == s)
            .ok_or_else(|| UnknownNote(s.to_owned()))
    }
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct NotationRow {
    pub name1: String,
    pub name2: String,
    pub distance: f64,
    pub note: Note,
    pub comment: String,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("csv i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CsvError {
    pub fn line(&self) -> Option<u64> {
        match self {
            CsvError::Malformed { line, .. } => Some(*line),
            CsvError::Io(_) => None,
        }
    }
}

/// `notations_<name>.csv`.
pub fn file_name(dataset_name: &str) -> String {
    format!("notations_{dataset_name}.csv")
}

/// Fixed six-decimal rendering shared by every writer.
pub fn format_distance(d: f64) -> String {
    format!("{d:.6}")
}

pub fn write_notations<W: Write>(rows: &[NotationRow], out: W) -> Result<(), CsvError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out);
    let map = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => CsvError::Io(io),
        other => CsvError::Malformed {
            line: 0,
            message: format!("{other:?}"),
        },
    };
    writer.write_record(HEADER).map_err(map)?;
    for row in rows {
        writer
            .write_record([
                row.name1.as_str(),
                row.name2.as_str(),
                &format_distance(row.distance),
                row.note.label(),
                row.comment.as_str(),
            ])
            .map_err(map)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_bytes(rows: &[NotationRow]) -> Vec<u8> {
    let mut out = Vec::new();
    write_notations(rows, &mut out).expect("writing to memory cannot fail");
    out
}

/// Parses a results file. Rows keep file order; pairs are stored with
/// `name1 < name2`.
pub fn read_notations<R: Read>(input: R) -> Result<Vec<NotationRow>, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let malformed = |line: u64, message: String| CsvError::Malformed { line, message };
    let header = match records.next() {
        None => return Err(malformed(1, "empty file, expected a header".into())),
        Some(r) => r.map_err(|e| malformed(1, e.to_string()))?,
    };
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(malformed(
            1,
            format!("expected header {:?}, got {:?}", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != HEADER.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, got {}", HEADER.len(), record.len()),
            ));
        }
        let (a, b) = (&record[0], &record[1]);
        if a.is_empty() || b.is_empty() || a == b {
            return Err(malformed(line, format!("invalid pair ({a:?}, {b:?})")));
        }
        let distance: f64 = record[2]
            .parse()
            .map_err(|_| malformed(line, format!("invalid distance {:?}", &record[2])))?;
        if !(0.0..=1.0).contains(&distance) {
            return Err(malformed(line, format!("distance {distance} outside [0, 1]")));
        }
        let note: Note = record[3]
            .parse()
            .map_err(|e: UnknownNote| malformed(line, e.to_string()))?;
        let (name1, name2) = if a <= b { (a, b) } else { (b, a) };
        rows.push(NotationRow {
            name1: name1.to_owned(),
            name2: name2.to_owned(),
            distance,
            note,
            comment: record[4].to_owned(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(a: &str, b: &str, d: f64, note: Note, comment: &str) -> NotationRow {
        NotationRow {
            name1: a.into(),
            name2: b.into(),
            distance: d,
            note,
            comment: comment.into(),
        }
    }

    #[test]
    fn file_name_pattern() {
        assert_eq!(file_name("R_1205"), "notations_R_1205.csv");
    }

    #[test]
    fn header_and_format() {
        let bytes = to_bytes(&[row("32307-R.jpg", "38491-R.jpg", 0.123456789, Note::Linked, "")]);
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "name1,name2,Distance,note,comment\n32307-R.jpg,38491-R.jpg,0.123457,Linked,\n"
        );
    }

    #[test]
    fn awkward_comment_is_quoted_and_parses() {
        let rows = vec![row("a.jpg", "b.jpg", 0.5, Note::DontKnow, "a,b \"test\"\nsecond line")];
        let bytes = to_bytes(&rows);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("\"a,b \"\"test\"\"\nsecond line\""));
        // Any standard reader sees the same fields.
        let mut plain = csv::Reader::from_reader(bytes.as_slice());
        let rec = plain.records().next().unwrap().unwrap();
        assert_eq!(&rec[4], "a,b \"test\"\nsecond line");
        assert_eq!(read_notations(bytes.as_slice()).unwrap(), rows);
    }

    #[test]
    fn every_label_round_trips() {
        for note in Note::ALL {
            assert_eq!(note.label().parse::<Note>().unwrap(), note);
            assert_eq!(note.id().parse::<Note>().unwrap(), note);
        }
        assert!("Maybe".parse::<Note>().is_err());
    }

    #[test]
    fn malformed_lines_are_located() {
        let bad = "name1,name2,Distance,note,comment\na,b,0.1,Linked,\nc,d,abc,Linked,\n";
        let err = read_notations(bad.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(3));
        let bad_note = "name1,name2,Distance,note,comment\na,b,0.1,Sure,\n";
        assert_eq!(read_notations(bad_note.as_bytes()).unwrap_err().line(), Some(2));
        let short = "name1,name2,Distance,note,comment\na,b,0.1\n";
        assert_eq!(read_notations(short.as_bytes()).unwrap_err().line(), Some(2));
        assert_eq!(read_notations("x,y\n".as_bytes()).unwrap_err().line(), Some(1));
        assert_eq!(read_notations("".as_bytes()).unwrap_err().line(), Some(1));
    }

    fn arb_note() -> impl Strategy<Value = Note> {
        prop::sample::select(Note::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn export_import_export_is_byte_identical(
            rows in prop::collection::vec(
                ("[A-Z][A-Z0-9_.-]{0,7}", "[a-z][a-z0-9_.-]{0,7}", 0.0f64..=1.0, arb_note(), "\\PC{0,20}"),
                0..20)
        ) {
            // Distinct leading letters keep name1 != name2.
            let rows: Vec<NotationRow> = rows.into_iter()
                .map(|(a, b, d, n, c)| {
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    row(&a, &b, d, n, &c)
                })
                .collect();
            let first = to_bytes(&rows);
            let parsed = read_notations(first.as_slice()).unwrap();
            let second = to_bytes(&parsed);
            prop_assert_eq!(&first, &second);
            for (p, r) in parsed.iter().zip(&rows) {
                prop_assert_eq!(&p.comment, &r.comment);
                prop_assert_eq!(p.note, r.note);
                prop_assert_eq!(format_distance(p.distance), format_distance(r.distance));
            }
        }
    }
}
