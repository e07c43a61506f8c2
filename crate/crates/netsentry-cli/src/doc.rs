//! Line-oriented structured documents.
//!
//! Every report and manifest is one self-describing text document: a header
//! line `netsentry <kind> v1` followed by `key = value` lines in a fixed
//! order, so runs diff cleanly. Keys may repeat (manifest input/output
//! listings). Floats are written in their shortest round-trippable decimal
//! form, so parsing a document recovers the exact values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use netsentry_core::error::{Error, Result};

pub const DOC_VERSION: u32 = 1;

/// An ordered key/value document with a kind tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub kind: String,
    pub entries: Vec<(String, String)>,
}

impl Document {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_list<T: ToString>(&mut self, key: &str, values: impl IntoIterator<Item = T>) {
        let joined = values
            .into_iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.entries.push((key.to_string(), joined));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::InvalidData(format!("document is missing key {key:?}")))
    }

    pub fn get_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.parse().map_err(|_| {
            Error::InvalidData(format!(
                "document key {key:?} has unparseable value {:?}",
                self.get(key).unwrap_or_default()
            ))
        })
    }

    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.get(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|cell| {
                cell.trim().parse().map_err(|_| {
                    Error::InvalidData(format!("document key {key:?} has unparseable cell {cell:?}"))
                })
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "netsentry {} v{DOC_VERSION}", self.kind);
        for (key, value) in &self.entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidData("empty document".into()))?;
        let mut parts = header.split_whitespace();
        let (magic, kind, version) = (parts.next(), parts.next(), parts.next());
        if magic != Some("netsentry") || kind.is_none() {
            return Err(Error::InvalidData(format!(
                "not a netsentry document: {header:?}"
            )));
        }
        if version != Some(&format!("v{DOC_VERSION}")) {
            return Err(Error::InvalidData(format!(
                "unsupported document version in {header:?}"
            )));
        }
        let mut entries = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (key, value) = line.split_once(" = ").ok_or_else(|| {
                Error::InvalidData(format!("malformed document line: {line:?}"))
            })?;
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Self {
            kind: kind.unwrap_or_default().to_string(),
            entries,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path, expected_kind: &str) -> Result<Self> {
        let doc = Self::parse(&fs::read_to_string(path)?)?;
        if doc.kind != expected_kind {
            return Err(Error::InvalidData(format!(
                "expected a {expected_kind} document, found {}",
                doc.kind
            )));
        }
        Ok(doc)
    }
}
