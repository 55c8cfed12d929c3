//! Dataset ingestion and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Ndjson,
}

impl Format {
    /// Guess from the file extension; `.ndjson` and `.jsonl` are NDJSON,
    /// everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ndjson") | Some("jsonl") => Format::Ndjson,
            _ => Format::Csv,
        }
    }
}

/// Reads one point per line. Blank lines are skipped.
pub fn ingest(path: &Path, format: Format) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse(&text, format)
}

pub fn parse(text: &str, format: Format) -> Result<Dataset> {
    let rows = match format {
        Format::Csv => parse_csv(text)?,
        Format::Ndjson => parse_ndjson(text)?,
    };
    let Some((first_line, first)) = rows.first() else {
        return Err(Error::Parse { line: 0, msg: "no data rows".into() });
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Parse { line: *first_line, msg: "empty row".into() });
    }
    let mut flat = Vec::with_capacity(rows.len() * dim);
    for (line, row) in &rows {
        if row.len() != dim {
            return Err(Error::Parse { line: *line, msg: format!("expected {dim} values, found {}", row.len()) });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line: *line, msg: format!("non-finite value {v}") });
        }
        flat.extend_from_slice(row);
    }
    Dataset::from_flat(flat, dim)
}

fn parse_csv(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(raw.as_bytes());
        let mut record = csv::StringRecord::new();
        reader
            .read_record(&mut record)
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse { line, msg: format!("not a number: '{f}'") })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn parse_ndjson(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = serde_json::from_str(raw)
            .map_err(|e| Error::Parse { line: i + 1, msg: format!("expected a JSON array of numbers: {e}") })?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

/// CSV export; `f64` display is the shortest string that parses back to the
/// same bits, so export then ingest is exact.
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::with_capacity(ds.len() * ds.dim() * 20);
    for p in ds.points() {
        for (k, v) in p.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp: PathBuf = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_examples() {
        let ds = parse("0.0,1.0\n2.0,3.0", Format::Csv).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 2));
        assert_eq!(ds.point(1), &[2.0, 3.0]);
        assert!(matches!(parse("", Format::Csv), Err(Error::Parse { .. })));
        match parse("1,2\n3\n", Format::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse("1,2\n\n3,NaN\n", Format::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("1,abc", Format::Csv), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn ndjson_examples() {
        let ds = parse("[0.5, 1]\n\n[2, 3]\n", Format::Ndjson).unwrap();
        assert_eq!(ds.as_flat(), &[0.5, 1.0, 2.0, 3.0]);
        assert!(matches!(parse("[1]\n{\"x\":1}", Format::Ndjson), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("[1]\n[1,2]", Format::Ndjson), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let flat: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-300..300))).collect();
        let ds = Dataset::from_flat(flat, 3).unwrap();
        let back = parse(&to_csv(&ds), Format::Csv).unwrap();
        assert!(ds.as_flat().iter().zip(back.as_flat()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
