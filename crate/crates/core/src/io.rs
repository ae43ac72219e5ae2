//! Artifact writers. Every CSV starts with a `#` provenance line and every
//! JSON document carries a `meta` object, both naming the tool version and
//! the SHA-256 of the resolved run configuration.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_NAME: &str = "sha";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
}

impl Provenance {
    /// Hash of the compact JSON encoding of `config`.
    pub fn for_config<T: Serialize>(config: &T) -> serde_json::Result<Self> {
        let bytes = serde_json::to_vec(config)?;
        Ok(Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config_sha256: sha256_hex(&bytes),
        })
    }

    pub fn csv_comment(&self) -> String {
        format!(
            "# tool={} version={} config_sha256={}",
            self.tool, self.version, self.config_sha256
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shortest round-trip decimal form, so equal values give equal bytes.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `None` becomes an empty cell.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// A small in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn header(&self) -> String {
        self.columns.join(",")
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", prov.csv_comment());
        let _ = writeln!(out, "{}", self.header());
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Pretty JSON with a `meta` key added to the top-level object.
pub fn json_document<T: Serialize>(value: &T, prov: &Provenance) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    let meta = serde_json::to_value(prov)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("meta".to_string(), meta);
        }
        other => {
            let inner = std::mem::take(other);
            *other = serde_json::json!({ "data": inner, "meta": meta });
        }
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Write through a temporary file in the same directory and rename it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
