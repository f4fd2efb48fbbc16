//! Rectangular result tables with a lossless CSV form.
//!
//! Cells are either text or extended reals. Finite numbers are printed with
//! 17 significant digits so that parsing the file reproduces every bit;
//! the infinities print as `inf`/`-inf`. Metadata travels in `#`-prefixed
//! lines ahead of the header row.

use std::fmt::Write as _;

use mco_core::ExtendedReal;

/// One table cell: a label or an extended-real number.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(ExtendedReal),
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    /// Wrap a float; IEEE infinities become the symbolic cells.
    ///
    /// # Panics
    /// Panics on NaN — upstream computations never produce one, so a NaN
    /// here is a logic error worth stopping on.
    pub fn number(x: f64) -> Self {
        Cell::Number(ExtendedReal::from_f64(x))
    }

    pub fn as_number(&self) -> Option<ExtendedReal> {
        match self {
            Cell::Number(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Text(s) => {
                if s.contains(',') || s.contains('"') || s.contains('\n') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Number(ExtendedReal::PosInf) => "inf".into(),
            Cell::Number(ExtendedReal::NegInf) => "-inf".into(),
            Cell::Number(ExtendedReal::Finite(x)) => format!("{x:.16e}"),
        }
    }

    fn parse(raw: &str) -> Cell {
        match raw {
            "inf" => return Cell::Number(ExtendedReal::PosInf),
            "-inf" => return Cell::Number(ExtendedReal::NegInf),
            _ => {}
        }
        match raw.parse::<f64>() {
            Ok(x) if x.is_finite() => Cell::Number(ExtendedReal::Finite(x)),
            _ => Cell::Text(raw.to_string()),
        }
    }
}

/// A rectangular table plus ordered metadata key/value pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<&str>) -> Self {
        assert!(!columns.is_empty(), "a table needs at least one column");
        ResultTable {
            columns: columns.into_iter().map(String::from).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn add_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let (key, value) = (key.into(), value.into());
        assert!(
            !key.contains('\n') && !value.contains('\n'),
            "metadata must be single-line"
        );
        self.metadata.push((key, value));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.metadata {
            writeln!(out, "# {key}: {value}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let rendered: Vec<String> = row.iter().map(Cell::render).collect();
            writeln!(out, "{}", rendered.join(",")).unwrap();
        }
        out
    }

    /// Parse a file produced by [`ResultTable::to_csv`]. Quoted text cells
    /// are unescaped; numeric-looking cells come back as numbers, which is
    /// exact because emitted text cells are never numeric-looking.
    pub fn from_csv(text: &str) -> Result<ResultTable, String> {
        let mut metadata = Vec::new();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, value) = rest
                    .split_once(": ")
                    .ok_or_else(|| format!("malformed metadata line: {line}"))?;
                metadata.push((key.to_string(), value.to_string()));
                lines.next();
            } else {
                break;
            }
        }
        let header = lines.next().ok_or("missing header row")?;
        let columns: Vec<String> = header.split(',').map(String::from).collect();
        let mut table = ResultTable {
            columns,
            rows: Vec::new(),
            metadata,
        };
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let raw = split_csv_line(line)?;
            if raw.len() != table.columns.len() {
                return Err(format!(
                    "row has {} cells, expected {}: {line}",
                    raw.len(),
                    table.columns.len()
                ));
            }
            table.rows.push(raw.iter().map(|c| Cell::parse(c)).collect());
        }
        Ok(table)
    }
}

/// Split one CSV line, honoring double-quoted cells with `""` escapes.
fn split_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut cells = Vec::new();
    let mut current = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        if quoted {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    current.push('"');
                } else {
                    quoted = false;
                }
            } else {
                current.push(c);
            }
        } else {
            match c {
                '"' if current.is_empty() => quoted = true,
                ',' => cells.push(std::mem::take(&mut current)),
                _ => current.push(c),
            }
        }
    }
    if quoted {
        return Err(format!("unterminated quote in: {line}"));
    }
    cells.push(current);
    Ok(cells)
}
