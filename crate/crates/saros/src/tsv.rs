//! Delimited interaction logs: configurable column layout and separator,
//! transparent gzip, per-line error collection.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use saros_core::data::{Feedback, RawInteraction, RawRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    User,
    Item,
    /// Numeric rating, binarized later.
    Rating,
    /// 0/1 (or true/false) click flag.
    Click,
    Timestamp,
    Ignore,
}

impl Column {
    fn from_name(name: &str) -> Option<Column> {
        // header cells such as "user_id:token" name the column before ':'
        let name = name.split(':').next().unwrap_or("").trim().to_ascii_lowercase();
        Some(match name.as_str() {
            "user" | "user_id" | "userid" => Column::User,
            "item" | "item_id" | "itemid" | "movie" | "movie_id" | "movieid" => Column::Item,
            "rating" => Column::Rating,
            "click" | "clicked" => Column::Click,
            "ts" | "timestamp" | "time" => Column::Timestamp,
            "_" => Column::Ignore,
            _ => return None,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TsvError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{bad} of {total} lines malformed (limit {limit}); first: line {first_line}: {first_msg}")]
    TooManyBadLines {
        bad: usize,
        total: usize,
        limit: f64,
        first_line: usize,
        first_msg: String,
    },
}

/// Positional column layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
    user: usize,
    item: usize,
    feedback: usize,
    timestamp: usize,
}

impl Schema {
    /// `user, item, click, ts`: the layout [`write_interactions`] produces.
    pub fn standard() -> Schema {
        Schema::new(vec![Column::User, Column::Item, Column::Click, Column::Timestamp]).expect("valid layout")
    }

    pub fn new(columns: Vec<Column>) -> Result<Schema, TsvError> {
        let find = |want: &[Column]| -> Result<usize, TsvError> {
            let hits: Vec<usize> = (0..columns.len()).filter(|&i| want.contains(&columns[i])).collect();
            match hits.as_slice() {
                [one] => Ok(*one),
                [] => Err(TsvError::Schema(format!("missing column {want:?}"))),
                _ => Err(TsvError::Schema(format!("column {want:?} given more than once"))),
            }
        };
        Ok(Schema {
            user: find(&[Column::User])?,
            item: find(&[Column::Item])?,
            feedback: find(&[Column::Rating, Column::Click])?,
            timestamp: find(&[Column::Timestamp])?,
            columns,
        })
    }

    /// Comma-separated column names, e.g. `user,item,rating,ts`; `_` skips a
    /// column.
    pub fn parse(spec: &str) -> Result<Schema, TsvError> {
        let columns = spec
            .split(',')
            .map(|c| Column::from_name(c).ok_or_else(|| TsvError::Schema(format!("unknown column name {c:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Schema::new(columns)
    }

    /// Layout from a header line; unrecognized names are skipped.
    pub fn from_header(line: &str, sep: &str) -> Result<Schema, TsvError> {
        Schema::new(line.split(sep).map(|c| Column::from_name(c).unwrap_or(Column::Ignore)).collect())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }
}

/// How to read one log file.
#[derive(Debug, Clone)]
pub struct ReadOptions {
    /// `None` with `header` set reads the layout from the header line.
    pub schema: Option<Schema>,
    pub separator: String,
    pub header: bool,
    /// Abort when more than this fraction of non-blank lines is malformed.
    pub max_bad_fraction: f64,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            schema: None,
            separator: "\t".into(),
            header: false,
            max_bad_fraction: 0.5,
        }
    }
}

/// Accepts a literal separator or one of `tab`, `comma`, `space`, `\t`.
pub fn parse_separator(s: &str) -> Result<String, TsvError> {
    let sep = match s {
        "tab" | "\\t" => "\t",
        "comma" => ",",
        "space" => " ",
        other => other,
    };
    if sep.is_empty() {
        return Err(TsvError::Schema("separator must not be empty".into()));
    }
    Ok(sep.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number in the source.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<RawRecord>,
    pub errors: Vec<LineError>,
}

fn parse_line(fields: &[&str], schema: &Schema) -> Result<RawRecord, String> {
    if fields.len() < schema.columns.len() {
        return Err(format!("expected {} fields, found {}", schema.columns.len(), fields.len()));
    }
    let text = |i: usize| fields[i].trim();
    let user = text(schema.user);
    let item = text(schema.item);
    if user.is_empty() || item.is_empty() {
        return Err("empty user or item id".into());
    }
    let raw_fb = text(schema.feedback);
    let feedback = match schema.columns[schema.feedback] {
        Column::Click => Feedback::Click(match raw_fb {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(format!("click flag {raw_fb:?} is not 0/1")),
        }),
        _ => match raw_fb.parse::<f64>() {
            Ok(x) if x.is_finite() => Feedback::Rating(x),
            _ => return Err(format!("rating {raw_fb:?} is not a finite number")),
        },
    };
    let raw_ts = text(schema.timestamp);
    let timestamp = raw_ts
        .parse::<i64>()
        .or_else(|_| match raw_ts.parse::<f64>() {
            // integral floats such as "881250949.0"
            Ok(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Ok(x as i64),
            _ => Err(()),
        })
        .map_err(|_| format!("timestamp {raw_ts:?} is not an integer"))?;
    Ok(RawRecord {
        user: user.to_string(),
        item: item.to_string(),
        feedback,
        timestamp,
    })
}

/// Parses every line; malformed lines are collected with their line numbers.
/// Blank lines are skipped.
pub fn parse_records<R: BufRead>(reader: R, opts: &ReadOptions) -> Result<ParseOutcome, TsvError> {
    let mut out = ParseOutcome::default();
    let mut schema = opts.schema.clone();
    let mut total = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if n == 0 && opts.header {
            if schema.is_none() {
                schema = Some(Schema::from_header(line, &opts.separator)?);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let schema = schema.get_or_insert_with(Schema::standard);
        total += 1;
        let fields: Vec<&str> = line.split(opts.separator.as_str()).collect();
        match parse_line(&fields, schema) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(LineError { line: n + 1, message }),
        }
    }
    if total > 0 && out.errors.len() as f64 > opts.max_bad_fraction * total as f64 {
        let first = &out.errors[0];
        return Err(TsvError::TooManyBadLines {
            bad: out.errors.len(),
            total,
            limit: opts.max_bad_fraction,
            first_line: first.line,
            first_msg: first.message.clone(),
        });
    }
    Ok(out)
}

/// Opens `path`, decompressing when it starts with the gzip magic bytes.
pub fn open(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut reader = BufReader::new(File::open(path)?);
    let gz = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(reader)))
    } else {
        Box::new(reader)
    })
}

pub fn read_file(path: &Path, opts: &ReadOptions) -> Result<ParseOutcome, TsvError> {
    let reader = open(path).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_records(reader, opts)
}

/// Writes rows in the standard layout (`user\titem\tclick\tts`, no header).
pub fn write_interactions<W: Write>(mut w: W, rows: &[RawInteraction]) -> io::Result<()> {
    for r in rows {
        if [&r.user, &r.item].iter().any(|s| s.contains(['\t', '\n', '\r'])) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "id contains a tab or newline"));
        }
        writeln!(w, "{}\t{}\t{}\t{}", r.user, r.item, u8::from(r.clicked), r.timestamp)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(schema: &str) -> ReadOptions {
        ReadOptions {
            schema: Some(Schema::parse(schema).unwrap()),
            ..Default::default()
        }
    }

    #[test]
    fn single_rating_line() {
        let out = parse_records("u1\ti9\t5\t100\n".as_bytes(), &opts("user,item,rating,ts")).unwrap();
        assert_eq!(
            out.records,
            vec![RawRecord {
                user: "u1".into(),
                item: "i9".into(),
                feedback: Feedback::Rating(5.0),
                timestamp: 100
            }]
        );
        assert!(out.errors.is_empty());
    }

    #[test]
    fn empty_input() {
        let out = parse_records("".as_bytes(), &ReadOptions::default()).unwrap();
        assert_eq!(out, ParseOutcome::default());
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let src = "a\tx\t1\t1\nb\tx\toops\t2\nc\ty\t0\t3\n";
        let out = parse_records(src.as_bytes(), &ReadOptions::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].line, 2);
    }

    #[test]
    fn too_many_bad_lines_abort() {
        let src = "a\tx\t1\t1\nbad\nworse\n";
        assert!(matches!(
            parse_records(src.as_bytes(), &ReadOptions::default()),
            Err(TsvError::TooManyBadLines { bad: 2, total: 3, .. })
        ));
    }

    #[test]
    fn double_colon_separator_and_reordered_columns() {
        let o = ReadOptions {
            schema: Some(Schema::parse("user,item,rating,ts").unwrap()),
            separator: "::".into(),
            ..Default::default()
        };
        let out = parse_records("1::1193::5::978300760\n".as_bytes(), &o).unwrap();
        assert_eq!(out.records[0].item, "1193");
        let o = ReadOptions {
            schema: Some(Schema::parse("ts,_,item,user,click").unwrap()),
            ..Default::default()
        };
        let out = parse_records("7\tjunk\tb\ta\t1\n".as_bytes(), &o).unwrap();
        assert_eq!(
            out.records[0],
            RawRecord { user: "a".into(), item: "b".into(), feedback: Feedback::Click(true), timestamp: 7 }
        );
    }

    #[test]
    fn header_defines_layout() {
        let src = "user_id:token\titem_id:token\trating:float\ttimestamp:float\n196\t242\t3\t881250949\n";
        let o = ReadOptions { header: true, ..Default::default() };
        let out = parse_records(src.as_bytes(), &o).unwrap();
        assert_eq!(out.records[0].feedback, Feedback::Rating(3.0));
        assert_eq!(out.records[0].timestamp, 881250949);
    }

    #[test]
    fn schema_errors() {
        assert!(Schema::parse("user,item,ts").is_err());
        assert!(Schema::parse("user,item,rating,click,ts").is_err());
        assert!(Schema::parse("user,item,stars,ts").is_err());
        assert!(parse_separator("").is_err());
        assert_eq!(parse_separator("tab").unwrap(), "\t");
    }

    #[test]
    fn writer_round_trips_through_standard_schema() {
        let rows = vec![
            RawInteraction { user: "u".into(), item: "i".into(), clicked: true, timestamp: -4 },
            RawInteraction { user: "v".into(), item: "j".into(), clicked: false, timestamp: 9 },
        ];
        let mut buf = Vec::new();
        write_interactions(&mut buf, &rows).unwrap();
        let out = parse_records(buf.as_slice(), &ReadOptions::default()).unwrap();
        assert_eq!(saros_core::data::binarize(&out.records, 0.0), rows);
    }
}
