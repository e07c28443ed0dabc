//! Whitespace-separated columnar plot data.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("empty table")]
    EmptyTable,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row} has {got} cells, header has {want}")]
    RaggedRow { row: usize, got: usize, want: usize },
}

/// A numeric table with named columns. Missing values are `None` and print as `nan`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row);
    }

    fn index(&self, name: &str) -> Result<usize, PlotError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| PlotError::MissingColumn(name.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlotSpec {
    pub x_col: String,
    pub y_cols: Vec<String>,
    pub band_cols: Vec<String>,
}

/// Renders `x y... band...` lines under a `#` header; floats use 9 significant digits.
pub fn emit_plot_data(table: &Table, spec: &PlotSpec) -> Result<String, PlotError> {
    if table.rows.is_empty() {
        return Err(PlotError::EmptyTable);
    }
    let names: Vec<&String> = std::iter::once(&spec.x_col)
        .chain(&spec.y_cols)
        .chain(&spec.band_cols)
        .collect();
    let idx = names.iter().map(|n| table.index(n)).collect::<Result<Vec<_>, _>>()?;
    let want = table.columns.len();
    let mut out = String::from("#");
    for n in &names {
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != want {
            return Err(PlotError::RaggedRow { row: r, got: row.len(), want });
        }
        let cells: Vec<String> = idx
            .iter()
            .map(|&i| match row[i] {
                Some(x) => format!("{x:.8e}"),
                None => "nan".to_string(),
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    Ok(out)
}
