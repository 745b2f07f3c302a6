use std::fmt;
use std::path::Path;

use super::ColumnKind;
use crate::error::{Error, Result};

/// Ordered column → kind mapping.
///
/// Text form is one `name = kind` pair per line; blank lines and lines
/// starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    fields: Vec<(String, ColumnKind)>,
}

impl Schema {
    pub fn new(fields: Vec<(String, ColumnKind)>) -> Result<Self> {
        for (i, (name, _)) in fields.iter().enumerate() {
            if fields[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Schema(format!("duplicate column name {name}")));
            }
        }
        Ok(Schema { fields })
    }

    pub fn fields(&self) -> &[(String, ColumnKind)] {
        &self.fields
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, kind) = line.split_once('=').ok_or_else(|| {
                Error::Schema(format!("line {}: expected `name = kind`", i + 1))
            })?;
            let kind = ColumnKind::parse(kind).ok_or_else(|| {
                Error::Schema(format!("line {}: unknown column kind {:?}", i + 1, kind.trim()))
            })?;
            fields.push((name.trim().to_string(), kind));
        }
        Schema::new(fields)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Schema::parse(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, kind) in &self.fields {
            writeln!(f, "{name} = {kind}")?;
        }
        Ok(())
    }
}
