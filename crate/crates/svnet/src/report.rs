//! Output tables and run manifests.
//!
//! Every table is a header row plus string cells, written as CSV. Every
//! command writes a JSON manifest listing parameters, input digests and
//! produced files; identical inputs and parameters give byte-identical
//! manifests, so worker counts and timing never appear here.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::fnv1a64_hex;

/// A rectangular table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(headers: &[S]) -> Table {
        Table {
            headers: headers.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.headers.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Shortest-round-trip float formatting for table cells.
pub fn fmt_g(x: f64) -> String {
    format!("{x}")
}

/// Exponent formatting for p-values and other tiny magnitudes.
pub fn fmt_e(x: f64) -> String {
    format!("{x:e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_g).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
struct ManifestInput {
    path: String,
    digest: String,
}

/// Record of one CLI run: parameters, input digests, outputs, failures.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
    pub failures: Vec<String>,
}

impl Manifest {
    pub fn new(command: impl Into<String>) -> Manifest {
        Manifest {
            command: command.into(),
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<serde_json::Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    /// Register an input file and digest its bytes.
    pub fn input(&mut self, path: impl AsRef<Path>) -> Result<&mut Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.inputs.push(ManifestInput {
            path: path.display().to_string(),
            digest: format!("fnv1a64:{}", fnv1a64_hex(&bytes)),
        });
        Ok(self)
    }

    /// Register a produced file. Only the file name is recorded: outputs
    /// live next to the manifest, and absolute paths would break the
    /// byte-identical-outputs guarantee across output directories.
    pub fn output(&mut self, path: impl AsRef<Path>) -> &mut Self {
        let name = path
            .as_ref()
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.as_ref().display().to_string());
        self.outputs.push(name);
        self
    }

    pub fn failure(&mut self, message: impl Into<String>) -> &mut Self {
        self.failures.push(message.into());
        self
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut sorted = self.clone();
        sorted.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        sorted.outputs.sort();
        let json = serde_json::to_string_pretty(&sorted).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Resolve an output file path under a directory, creating the directory.
pub fn out_path(dir: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(dir.join(name))
}
