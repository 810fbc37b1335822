//! Experiment tables as CSV.
//!
//! One run per row, columns `a_x,a_y,a_z,b_x,b_y,b_z,c0,c1,beta`, with a
//! header line. Vectors must be unit to within 1e-9; they are renormalised on
//! ingest.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use telecert_core::stats::{ExperimentRecord, ExperimentTable};

pub const HEADER: [&str; 9] = ["a_x", "a_y", "a_z", "b_x", "b_y", "b_z", "c0", "c1", "beta"];

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {source}")]
    Record { line: u64, source: telecert_core::Error },
    #[error("missing or malformed header; expected {}", HEADER.join(","))]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    a_x: f64,
    a_y: f64,
    a_z: f64,
    b_x: f64,
    b_y: f64,
    b_z: f64,
    c0: u8,
    c1: u8,
    beta: i8,
}

impl From<&ExperimentRecord> for Row {
    fn from(r: &ExperimentRecord) -> Self {
        let (c0, c1) = r.bits.bits();
        Row {
            a_x: r.a.x(),
            a_y: r.a.y(),
            a_z: r.a.z(),
            b_x: r.b.x(),
            b_y: r.b.y(),
            b_z: r.b.z(),
            c0,
            c1,
            beta: r.beta.as_i8(),
        }
    }
}

pub fn read_table<R: Read>(reader: R) -> Result<ExperimentTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(ExperimentTable::new(Vec::new()));
    }
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(IoError::Header);
    }
    let mut records = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| IoError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        let line = records.len() as u64 + 2;
        let rec = ExperimentRecord::from_raw(
            [row.a_x, row.a_y, row.a_z],
            [row.b_x, row.b_y, row.b_z],
            row.c0,
            row.c1,
            row.beta,
        )
        .map_err(|source| IoError::Record { line, source })?;
        records.push(rec);
    }
    Ok(ExperimentTable::new(records))
}

pub fn write_table<W: Write>(table: &ExperimentTable, writer: W) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    if table.is_empty() {
        wtr.write_record(HEADER)?;
    }
    for r in table.records() {
        wtr.serialize(Row::from(r))?;
    }
    wtr.flush().map_err(|source| IoError::File {
        path: String::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn ingest_csv(path: &Path) -> Result<ExperimentTable, IoError> {
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    read_table(file)
}

pub fn export_csv(table: &ExperimentTable, path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    write_table(table, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "a_x,a_y,a_z,b_x,b_y,b_z,c0,c1,beta\n\
                          1,0,0,0,0,1,0,1,-1\n\
                          0.6,0.8,0,0,0,1,1,0,1\n";

    #[test]
    fn reads_rows() {
        let t = read_table(SAMPLE.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.records()[1].a.y(), 0.8);
    }

    #[test]
    fn empty_input_is_empty_table() {
        assert!(read_table("".as_bytes()).unwrap().is_empty());
        assert!(read_table("a_x,a_y,a_z,b_x,b_y,b_z,c0,c1,beta\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn reports_line_of_bad_record() {
        let bad = format!("{SAMPLE}0,0,2,0,0,1,0,0,1\n");
        match read_table(bad.as_bytes()) {
            Err(IoError::Record { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad = format!("{SAMPLE}0,0,1,0,0,1,0,0,x\n");
        match read_table(bad.as_bytes()) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let bad = format!("{SAMPLE}0,0,1,0,0,1,0,0,0\n");
        assert!(matches!(
            read_table(bad.as_bytes()),
            Err(IoError::Record { line: 4, .. })
        ));
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(matches!(read_table("x,y\n1,2\n".as_bytes()), Err(IoError::Header)));
    }
}
