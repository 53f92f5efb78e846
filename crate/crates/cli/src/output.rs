//! CSV tables with schema sidecars, and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Floats carry 17 significant digits, enough to round-trip.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// `integer`, `float`, `bool` or `string`; empty cells mean "not available".
    pub kind: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// `columns` holds `(name, kind, description)` triples.
    pub fn new(name: &str, description: &str, columns: &[(&str, &str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            columns: columns
                .iter()
                .map(|&(n, k, d)| Column { name: n.into(), kind: k.into(), description: d.into() })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    pub fn schema_json(&self) -> CliResult<Vec<u8>> {
        #[derive(Serialize)]
        struct Schema<'a> {
            file: String,
            description: &'a str,
            header_rows: usize,
            float_format: &'static str,
            columns: &'a [Column],
        }
        let schema = Schema {
            file: self.file_name(),
            description: &self.description,
            header_rows: 1,
            float_format: "scientific, 17 significant digits",
            columns: &self.columns,
        };
        Ok(serde_json::to_vec_pretty(&schema)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// The configuration in its own `key = value` format.
    pub config: String,
    pub timestamp_unix: u64,
    pub wall_clock_seconds: f64,
    /// Heat-bath events simulated during the run.
    pub events: u64,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> CliResult<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?)
    }

    /// Recomputes every digest and size listed in the manifest.
    pub fn verify(&self, dir: &Path) -> CliResult<()> {
        for f in &self.files {
            let bytes = fs::read(dir.join(&f.name))?;
            if digest(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
                return Err(CliError::config(format!("{}: digest mismatch", f.name)));
            }
        }
        Ok(())
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that remembers what it wrote, so a failed run can be
/// rolled back.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileRecord>,
}

impl OutputDir {
    /// Creates the directory and drops a stale manifest, whose presence would
    /// otherwise claim a completed run.
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        match fs::remove_file(root.join(MANIFEST)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.written
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.root.join(name), bytes)?;
        self.written.push(FileRecord { name: name.to_string(), sha256: digest(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_table(&mut self, table: &Table) -> CliResult<()> {
        self.write(&table.file_name(), &table.to_csv()?)?;
        self.write(&format!("{}.schema.json", table.file_name()), &table.schema_json()?)
    }

    /// Writes the manifest; must be the last write of a run.
    pub fn finish(&self, manifest: &RunManifest) -> CliResult<()> {
        fs::write(self.root.join(MANIFEST), serde_json::to_vec_pretty(manifest)?)?;
        Ok(())
    }

    /// Removes every file written so far.
    pub fn discard(self) {
        for f in &self.written {
            let _ = fs::remove_file(self.root.join(&f.name));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 8.0] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(8.0), "8.0000000000000000e0");
    }

    #[test]
    fn csv_has_header_and_schema() {
        let mut t = Table::new("t", "demo", &[("x", "float", "a value"), ("k", "integer", "an index")]);
        t.push(vec![float(0.5), "3".into()]);
        let csv = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(csv, "x,k\n5.0000000000000000e-1,3\n");
        let schema: serde_json::Value = serde_json::from_slice(&t.schema_json().unwrap()).unwrap();
        assert_eq!(schema["columns"][1]["name"], "k");
    }

    #[test]
    fn discard_removes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_table(&Table::new("t", "demo", &[("x", "float", "v")])).unwrap();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
        out.discard();
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
