use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::RunError;
use crate::harness::{RowStatus, SweepTable};

/// Header of every ε-indexed table.
pub const SWEEP_HEADER: [&str; 14] = [
    "eps", "grad_sup", "c_diff", "a11", "a12", "a22", "b1", "b2", "q_eps", "energy", "argmax_x", "argmax_y", "nodes",
    "seconds",
];

pub const INCOMPLETE_MARKER: &str = "# INCOMPLETE";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Row(Vec<Cell>),
    Comment(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    /// Appended to the output name as `<name>_<suffix>.csv`.
    pub suffix: Option<String>,
    pub header: Vec<String>,
    pub lines: Vec<Line>,
    pub incomplete: bool,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { suffix: None, header: header.iter().map(|s| s.to_string()).collect(), lines: Vec::new(), incomplete: false }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.lines.push(Line::Row(row));
    }

    pub fn push_comment(&mut self, text: impl Into<String>) {
        self.lines.push(Line::Comment(text.into()));
    }

    pub fn rows(&self) -> impl Iterator<Item = &Vec<Cell>> {
        self.lines.iter().filter_map(|l| if let Line::Row(r) = l { Some(r) } else { None })
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for line in &self.lines {
            match line {
                Line::Row(cells) => {
                    let parts: Vec<String> = cells
                        .iter()
                        .map(|c| match c {
                            Cell::Float(v) => float(*v),
                            Cell::Int(v) => v.to_string(),
                        })
                        .collect();
                    s.push_str(&parts.join(","));
                }
                Line::Comment(c) => {
                    s.push_str("# ");
                    s.push_str(c);
                }
            }
            s.push('\n');
        }
        if self.incomplete {
            s.push_str(INCOMPLETE_MARKER);
            s.push('\n');
        }
        s
    }
}

/// Sweep rows in the standard schema; flagged and aborted rows are
/// annotated with comment lines.
pub fn sweep_csv(table: &SweepTable, timings: bool) -> CsvTable {
    let mut csv = CsvTable::new(&SWEEP_HEADER);
    for row in &table.rows {
        let seconds = if timings { row.seconds } else { 0.0 };
        match (&row.obs, &row.status) {
            (Some(o), status) => {
                let f = &o.flux;
                let p = o.argmax();
                csv.push_row(vec![
                    Cell::Float(row.eps),
                    Cell::Float(o.grad.value),
                    Cell::Float(f.c_diff),
                    Cell::Float(f.a[0][0]),
                    Cell::Float(f.a[0][1]),
                    Cell::Float(f.a[1][1]),
                    Cell::Float(f.b[0]),
                    Cell::Float(f.b[1]),
                    Cell::Float(f.q_eps),
                    Cell::Float(o.energy),
                    Cell::Float(p[0]),
                    Cell::Float(p[1]),
                    Cell::Int(o.nodes),
                    Cell::Float(seconds),
                ]);
                if let RowStatus::Flagged(why) = status {
                    csv.push_comment(format!("flagged eps={}: {why}", float(row.eps)));
                }
            }
            (None, RowStatus::Aborted(why)) => csv.push_comment(format!("aborted eps={}: {why}", float(row.eps))),
            (None, _) => csv.push_comment(format!("no data eps={}", float(row.eps))),
        }
    }
    csv.incomplete = table.failure.is_some();
    csv
}

/// Ordered `key=value` metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn push_float(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, float(value));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Writes `<name>[_<suffix>].csv` for every table and `<name>.meta`;
/// returns the paths written.
pub fn write_outputs(dir: &Path, name: &str, tables: &[CsvTable], meta: &Metadata) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Io { path: dir.to_path_buf(), message: e.to_string() })?;
    let mut written = Vec::new();
    let mut write = |file: String, body: String| -> Result<(), RunError> {
        let path = dir.join(file);
        fs::write(&path, body).map_err(|e| RunError::Io { path: path.clone(), message: e.to_string() })?;
        written.push(path);
        Ok(())
    };
    for t in tables {
        let file = match &t.suffix {
            Some(s) => format!("{name}_{s}.csv"),
            None => format!("{name}.csv"),
        };
        write(file, t.render())?;
    }
    write(format!("{name}.meta"), meta.render())?;
    Ok(written)
}
