//! CSV formats: views with a header of variable names, an outcome file
//! with a header, and group files mapping `variable_name,group_id`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::outcome::{ClassLabels, Outcome};
use crate::prox::GroupStructure;

use super::OutcomeKind;

/// A parsed CSV: header plus string cells, row-major.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_error(path: &Path, row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        col,
        msg: msg.into(),
    }
}

fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 0, 0, e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(parse_error(path, 0, 0, "missing header row"));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_error(path, i + 1, 0, e.to_string()))?;
        rows.push(record.iter().map(|s| s.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, 0, "no data rows"));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn numeric(table: &Table) -> Result<DMatrix<f64>> {
    let (n, p) = (table.rows.len(), table.header.len());
    let mut x = DMatrix::zeros(n, p);
    for (i, row) in table.rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(&table.path, i + 1, j + 1, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(parse_error(&table.path, i + 1, j + 1, "value is not finite"));
            }
            x[(i, j)] = v;
        }
    }
    Ok(x)
}

/// A view matrix and its variable names.
#[derive(Debug)]
pub struct View {
    pub path: PathBuf,
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

pub fn read_view(path: &Path) -> Result<View> {
    let table = read_table(path)?;
    let x = numeric(&table)?;
    Ok(View {
        path: table.path,
        names: table.header,
        x,
    })
}

/// Class names in label order: numeric order when every name parses as an
/// integer, lexicographic otherwise.
pub fn class_names(cells: &[String]) -> Vec<String> {
    let mut names: Vec<String> = cells.to_vec();
    names.sort();
    names.dedup();
    if names.iter().all(|s| s.parse::<i64>().is_ok()) {
        names.sort_by_key(|s| s.parse::<i64>().unwrap_or_default());
    }
    names
}

/// Reads an outcome file. Categorical labels are coded by `known` when
/// given (a fitted model's classes), otherwise by [`class_names`].
pub fn read_outcome(path: &Path, kind: OutcomeKind, known: Option<&[String]>) -> Result<(Outcome, Vec<String>)> {
    let table = read_table(path)?;
    match kind {
        OutcomeKind::Continuous => {
            if table.header.len() != 1 {
                return Err(parse_error(path, 0, 2, "continuous outcome must have one column"));
            }
            let y = numeric(&table)?;
            Ok((Outcome::Continuous(DVector::from_column_slice(y.as_slice())), Vec::new()))
        }
        OutcomeKind::Multi => Ok((Outcome::MultiContinuous(numeric(&table)?), Vec::new())),
        OutcomeKind::Categorical => {
            if table.header.len() != 1 {
                return Err(parse_error(path, 0, 2, "categorical outcome must have one column"));
            }
            let cells: Vec<String> = table.rows.iter().map(|r| r[0].clone()).collect();
            let names = match known {
                Some(k) => k.to_vec(),
                None => class_names(&cells),
            };
            let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            let labels = cells
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    index
                        .get(c.as_str())
                        .copied()
                        .ok_or_else(|| parse_error(path, i + 1, 1, format!("unknown class '{c}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let labels = if known.is_some() {
                // evaluation data need not contain every class
                ClassLabels::for_scoring(labels, names.len())?
            } else {
                ClassLabels::new(labels, names.len())?
            };
            Ok((Outcome::Categorical(labels), names))
        }
    }
}

/// Reads a `variable_name,group_id` file against a view's variable names.
/// Every variable must appear exactly once.
pub fn read_groups(path: &Path, names: &[String]) -> Result<GroupStructure> {
    let table = read_table(path)?;
    if table.header.len() != 2 {
        return Err(parse_error(path, 0, 3, "group file needs two columns"));
    }
    let position: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut group_ids: Vec<&str> = Vec::new();
    let mut assigned: Vec<Option<usize>> = vec![None; names.len()];
    for (i, row) in table.rows.iter().enumerate() {
        let j = *position
            .get(row[0].as_str())
            .ok_or_else(|| parse_error(path, i + 1, 1, format!("unknown variable '{}'", row[0])))?;
        if assigned[j].is_some() {
            return Err(Error::OverlappingGroups {
                path: path.to_path_buf(),
                variable: row[0].clone(),
            });
        }
        let g = match group_ids.iter().position(|g| *g == row[1]) {
            Some(g) => g,
            None => {
                group_ids.push(&row[1]);
                group_ids.len() - 1
            }
        };
        assigned[j] = Some(g);
    }
    let missing: Vec<usize> = (0..names.len()).filter(|&j| assigned[j].is_none()).collect();
    if let Some(&first) = missing.first() {
        return Err(Error::IncompleteGroups {
            path: path.to_path_buf(),
            missing: missing.len(),
            first: names[first].clone(),
        });
    }
    GroupStructure::from_labels(&assigned.into_iter().flatten().collect::<Vec<_>>())
}

/// Fails with `RowCountMismatch` unless every file has `rows[0]` rows.
pub fn check_rows(files: &[(&Path, usize)]) -> Result<()> {
    let (first, n) = files[0];
    for &(path, rows) in &files[1..] {
        if rows != n {
            return Err(Error::RowCountMismatch {
                first: first.to_path_buf(),
                first_rows: n,
                second: path.to_path_buf(),
                second_rows: rows,
            });
        }
    }
    Ok(())
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

/// CSV text of string rows under a header.
pub fn csv_text(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidConfig(e.to_string());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn matrix_csv(header: &[String], x: &DMatrix<f64>) -> Result<Vec<u8>> {
    csv_text(
        header,
        x.row_iter().map(|r| r.iter().map(|v| format!("{v}")).collect()),
    )
}
