//! CSV writing with a leading `#` metadata line.

use std::io::Write;

use crate::sweep::CsvRow;
use crate::RunError;

/// Identifies the run that produced a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Metadata {
    pub fn line(&self) -> String {
        format!(
            "# tool=cov3d version={} command={} seed={} config_sha256={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed,
            self.config_hash
        )
    }
}

/// Write the metadata line, the header and one record per row.
pub fn write_csv<W: Write, R: CsvRow>(mut out: W, meta: &Metadata, rows: &[R]) -> Result<(), RunError> {
    writeln!(out, "{}", meta.line())?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let to_io = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record(R::HEADER).map_err(to_io)?;
    for row in rows {
        w.write_record(row.record()).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// [`write_csv`] into a byte buffer.
pub fn csv_bytes<R: CsvRow>(meta: &Metadata, rows: &[R]) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, meta, rows)?;
    Ok(buf)
}
