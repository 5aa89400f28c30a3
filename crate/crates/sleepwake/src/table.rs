//! Delimited output: one `#` line per column, a header row, then data.
//! Reals are written with 17 significant digits so they round-trip.

use std::io::Write;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(x) if x.is_nan() => "nan".into(),
            Cell::Real(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(b.to_string())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Real)
    }
}

/// Reals joined with `;` (for per-source vectors inside one cell).
pub fn join(values: &[f64]) -> Cell {
    Cell::Text(values.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    /// `(name, description)`.
    pub columns: Vec<(&'static str, &'static str)>,
    pub rows: Vec<Vec<Cell>>,
    pub delimiter: Delimiter,
    /// Extra `#` lines written after the title.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: Vec<(&'static str, &'static str)>, delimiter: Delimiter) -> Self {
        Self {
            title: title.into(),
            columns,
            rows: Vec::new(),
            delimiter,
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.title);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.0 == name)
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let io = |e| crate::error::CliError::io("output", e);
        writeln!(out, "# {}", self.title).map_err(io)?;
        for note in &self.notes {
            writeln!(out, "# {note}").map_err(io)?;
        }
        for (name, doc) in &self.columns {
            writeln!(out, "# {name}: {doc}").map_err(io)?;
        }
        let mut w = csv::WriterBuilder::new()
            .delimiter(match self.delimiter {
                Delimiter::Comma => b',',
                Delimiter::Tab => b'\t',
            })
            .from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.0))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}
