use std::path::Path;
use std::time::Duration;

use h2kit::{H2Error, Result};

/// A CSV table with a fixed header, written at the end of a command.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    timings: bool,
}

impl Table {
    pub fn new(header: &[&'static str], timings: bool) -> Self {
        Table { header: header.to_vec(), rows: Vec::new(), timings }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Seconds, or an empty cell with `--no-timings`.
    pub fn secs(&self, d: Duration) -> String {
        if self.timings {
            format!("{:.6}", d.as_secs_f64())
        } else {
            String::new()
        }
    }

    /// A rate derived from a timing; empty with `--no-timings`.
    pub fn rate(&self, v: f64) -> String {
        if self.timings {
            format!("{v:.4e}")
        } else {
            String::new()
        }
    }

    pub fn write(&self, path: Option<&Path>) -> Result<()> {
        let Some(path) = path else { return Ok(()) };
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> H2Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => H2Error::Io(e),
        other => H2Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

pub fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}
