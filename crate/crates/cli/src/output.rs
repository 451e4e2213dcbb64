//! CSV tables and their `.meta` sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Header plus numeric rows; a final text column is allowed for tags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// `f64` Display is the shortest string that round-trips, so no precision is lost.
    pub fn push_numbers(&mut self, values: impl IntoIterator<Item = f64>) {
        self.rows.push(values.into_iter().map(|v| v.to_string()).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Writes `<stem>.csv` and `<stem>.csv.meta`, returning the CSV path. A stem already ending in `.csv` is kept.
pub fn write_table(stem: &Path, table: &Table, meta: &str) -> Result<PathBuf, CliError> {
    let csv_path = if stem.extension().is_some_and(|e| e == "csv") {
        stem.to_path_buf()
    } else {
        PathBuf::from(format!("{}.csv", stem.display()))
    };
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    let io = |e: csv::Error| {
        let source = match e.into_kind() {
            csv::ErrorKind::Io(e) => e,
            other => std::io::Error::other(format!("{other:?}")),
        };
        CliError::io(format!("writing {}", csv_path.display()), source)
    };
    let mut w = csv::Writer::from_path(&csv_path).map_err(io)?;
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| CliError::io(format!("writing {}", csv_path.display()), e))?;

    let meta_path = PathBuf::from(format!("{}.meta", csv_path.display()));
    fs::write(&meta_path, meta).map_err(|e| CliError::io(format!("writing {}", meta_path.display()), e))?;
    Ok(csv_path)
}
