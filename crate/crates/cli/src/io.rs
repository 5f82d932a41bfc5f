//! CSV input and atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// A numeric CSV table with one named column per predictor.
pub struct Table {
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Text of the group column, when one was requested.
    pub groups: Option<Vec<String>>,
}

pub fn read_table(path: &Path, group_column: Option<&str>) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let group_idx = match group_column {
        Some(g) => Some(
            headers
                .iter()
                .position(|h| h == g)
                .with_context(|| format!("group column {g:?} not found in {}", path.display()))?,
        ),
        None => None,
    };
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != group_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if columns.is_empty() {
        bail!("{} has no loss columns", path.display());
    }
    let mut values = vec![Vec::new(); columns.len()];
    let mut groups = group_idx.map(|_| Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: bad CSV row {}", path.display(), row + 2))?;
        let mut col = 0;
        for (i, field) in record.iter().enumerate() {
            if Some(i) == group_idx {
                groups.as_mut().expect("group column").push(field.to_string());
                continue;
            }
            let v: f64 = field.parse().with_context(|| {
                format!("{}: row {}, column {:?}: {field:?} is not a number", path.display(), row + 2, headers[i])
            })?;
            values[col].push(v);
            col += 1;
        }
    }
    if values[0].is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(Table { columns, values, groups })
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in rows {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)
}

/// One row of the plot-ready CDF-bound export.
#[derive(Debug, Serialize)]
pub struct BoundRow<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<&'a str>,
    pub x: f64,
    pub level: f64,
}

/// Breakpoints with their levels, followed by `(x_plus, 1)` when finite.
pub fn bound_rows<'a>(g: &quantbound::bounds::StepCdfLowerBound, group: Option<&'a str>) -> Vec<BoundRow<'a>> {
    let mut rows: Vec<BoundRow> = g
        .breakpoints()
        .iter()
        .zip(g.levels())
        .map(|(&x, &level)| BoundRow { group, x, level })
        .collect();
    if g.is_bounded() {
        rows.push(BoundRow { group, x: g.x_plus(), level: 1.0 });
    }
    rows
}
