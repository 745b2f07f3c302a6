use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{Column, ColumnKind, DataTable, Schema, Values};
use crate::error::{Error, Result};

fn is_missing_token(field: &str) -> bool {
    field.is_empty() || field == "NA"
}

/// Reads a table from a CSV file with a header row matching `schema`.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<DataTable> {
    read_csv(File::open(path)?, schema)
}

/// Reads RFC-4180 CSV. Empty fields and `NA` are missing cells.
///
/// Numeric columns must parse as finite reals. Label and identifier columns
/// are stored as numbers when every observed cell parses, and as text
/// otherwise.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::Schema("missing header row".into())),
    };
    let names: Vec<&str> = header.iter().collect();
    let expected: Vec<&str> = schema.fields().iter().map(|(n, _)| n.as_str()).collect();
    if names != expected {
        return Err(Error::Schema(format!(
            "header {names:?} does not match schema {expected:?}"
        )));
    }

    let width = names.len();
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
    let mut lines = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            raw[col].push((!is_missing_token(field)).then(|| field.to_string()));
        }
        lines.push(line);
    }

    let columns = schema
        .fields()
        .iter()
        .zip(raw)
        .map(|((name, kind), cells)| build_column(name, *kind, cells, &lines))
        .collect::<Result<Vec<_>>>()?;
    DataTable::with_row_count(columns, lines.len())
}

fn parse_numbers(name: &str, cells: &[Option<String>], lines: &[usize]) -> Result<Vec<Option<f64>>> {
    cells
        .iter()
        .zip(lines)
        .map(|(cell, &line)| match cell {
            None => Ok(None),
            Some(s) => match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::ParseNumber {
                    line,
                    column: name.to_string(),
                    value: s.clone(),
                }),
            },
        })
        .collect()
}

fn build_column(
    name: &str,
    kind: ColumnKind,
    cells: Vec<Option<String>>,
    lines: &[usize],
) -> Result<Column> {
    let values = match kind {
        ColumnKind::Numeric => Values::Numeric(parse_numbers(name, &cells, lines)?),
        ColumnKind::Categorical => Values::Text(cells),
        ColumnKind::Identifier | ColumnKind::Label => match parse_numbers(name, &cells, lines) {
            Ok(v) => Values::Numeric(v),
            Err(_) => Values::Text(cells),
        },
    };
    Ok(Column {
        name: name.to_string(),
        kind,
        values,
    })
}

/// Writes the table as CSV. Missing cells become empty fields; numbers use
/// the shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(writer: W, table: &DataTable) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(writer);
    wtr.write_record(table.names())?;
    let mut row = Vec::with_capacity(table.columns().len());
    for r in 0..table.row_count() {
        row.clear();
        for c in table.columns() {
            row.push(match &c.values {
                Values::Numeric(v) => v[r].map(|x| x.to_string()).unwrap_or_default(),
                Values::Text(v) => v[r].clone().unwrap_or_default(),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, table: &DataTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_csv(&mut out, table)?;
    out.flush()?;
    Ok(())
}
