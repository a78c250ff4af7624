//! Plain-text file formats.
//!
//! Atom matrices and signals are CSV files with one row per grid point and
//! one column per vector. Leading lines of the form `# key=value` carry
//! metadata; the first non-comment line names the columns. A column named
//! `x` holds the grid points and is not treated as data.
//!
//! ```text
//! # kind=atoms
//! # label=bspline
//! x,a0,a1,a2
//! 0,0.1666,0,0
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::PlotTrace;
use crate::linalg::{Grid, Signal};

pub const GRID_COLUMN: &str = "x";

/// Named columns of equal length plus metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> Result<()> {
        if !self.columns.is_empty() && column.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                found: column.len(),
            });
        }
        self.names.push(name.into());
        self.columns.push(column);
        Ok(())
    }

    pub fn grid_points(&self) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == GRID_COLUMN)
            .map(|i| self.columns[i].as_slice())
    }

    /// Columns other than the grid, as signals.
    pub fn signals(&self) -> Result<Vec<Signal>> {
        self.names
            .iter()
            .zip(&self.columns)
            .filter(|(n, _)| n.as_str() != GRID_COLUMN)
            .map(|(_, c)| Signal::new(c.clone()))
            .collect()
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut table = Table::default();
    let mut body_start = 0;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        body_start += line.len() + 1;
        if let Some((k, v)) = rest.trim().split_once('=') {
            table.meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let body = text.get(body_start..).unwrap_or("");
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    table.names = rdr.headers()?.iter().map(str::to_string).collect();
    if table.names.is_empty() || table.names.iter().all(String::is_empty) {
        return Err(Error::Parse("missing header row".into()));
    }
    table.columns = vec![Vec::new(); table.names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {}, column {}: not a number: {field:?}",
                    row + 1,
                    table.names[col]
                ))
            })?;
            table.columns[col].push(v);
        }
    }
    if table.n_rows() == 0 {
        return Err(Error::Parse("table has no rows".into()));
    }
    Ok(table)
}

pub fn read_table(path: &Path) -> Result<Table> {
    parse_table(&std::fs::read_to_string(path)?)
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    write_table_to(BufWriter::new(File::create(path)?), table)
}

pub fn write_table_to<W: Write>(mut out: W, table: &Table) -> Result<()> {
    for (k, v) in &table.meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.names)?;
    for r in 0..table.n_rows() {
        w.write_record(table.columns.iter().map(|c| format!("{:e}", c[r])))?;
    }
    w.flush()?;
    Ok(())
}

/// Table with an optional grid column followed by `prefix0, prefix1, ...`.
pub fn vectors_table(vs: &[Signal], grid: Option<&Grid>, prefix: &str) -> Result<Table> {
    let mut t = Table::default();
    if let Some(g) = grid {
        t.push(GRID_COLUMN, g.points())?;
        t.meta.insert("grid".into(), format!("[{}, {}] n={}", g.a, g.b, g.n_points()));
    }
    for (i, v) in vs.iter().enumerate() {
        t.push(format!("{prefix}{i}"), v.coords().to_vec())?;
    }
    Ok(t)
}

/// Atom matrix table: grid column, then `a0, a1, ...`.
pub fn atoms_table(
    atoms: &[Signal],
    grid: Option<&Grid>,
    meta: BTreeMap<String, String>,
) -> Result<Table> {
    let mut t = vectors_table(atoms, grid, "a")?;
    t.meta.extend(meta);
    t.meta.insert("columns".into(), atoms.len().to_string());
    Ok(t)
}

pub fn write_atoms(
    path: &Path,
    atoms: &[Signal],
    grid: Option<&Grid>,
    meta: BTreeMap<String, String>,
) -> Result<()> {
    write_table(path, &atoms_table(atoms, grid, meta)?)
}

pub fn read_atoms(path: &Path) -> Result<Vec<Signal>> {
    let atoms = read_table(path)?.signals()?;
    if atoms.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(atoms)
}

pub fn write_signal(path: &Path, f: &Signal) -> Result<()> {
    write_table(path, &vectors_table(std::slice::from_ref(f), f.grid(), "f")?)
}

/// Reads a file holding exactly one data column.
pub fn read_signal(path: &Path) -> Result<Signal> {
    let mut v = read_table(path)?.signals()?;
    if v.len() != 1 {
        return Err(Error::Parse(format!(
            "expected one signal column, found {}",
            v.len()
        )));
    }
    Ok(v.remove(0))
}

/// Columns `x, mixture, truth, oblmp` and, when available, `baseline`.
pub fn write_plot_csv(path: &Path, trace: &PlotTrace) -> Result<()> {
    let mut t = Table::default();
    t.meta.insert("signal".into(), trace.index.to_string());
    t.push(GRID_COLUMN, trace.x.clone())?;
    t.push("mixture", trace.mixture.coords().to_vec())?;
    t.push("truth", trace.truth.coords().to_vec())?;
    t.push("oblmp", trace.oblmp.coords().to_vec())?;
    if let Some(b) = &trace.baseline {
        t.push("baseline", b.coords().to_vec())?;
    }
    write_table(path, &t)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
