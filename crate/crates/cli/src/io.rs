use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Rows of a CSV file with its header, comment lines (`#`) skipped.
pub struct CsvData {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<csv::StringRecord>,
}

impl CsvData {
    /// Index of a required column.
    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::input(format!(
                "{}: missing column `{name}` (found {})",
                self.path.display(),
                self.header.join(",")
            ))
        })
    }

    /// Parse field `col` of every row with `parse`, reporting the line on
    /// failure.
    pub fn parse_column<T>(
        &self,
        col: usize,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> CliResult<Vec<T>> {
        self.rows
            .iter()
            .map(|r| {
                let field = r.get(col).unwrap_or("");
                parse(field).map_err(|e| {
                    let line = r.position().map_or(0, |p| p.line());
                    CliError::input(format!(
                        "{} line {line}: `{field}`: {e}",
                        self.path.display()
                    ))
                })
            })
            .collect()
    }
}

pub fn read_csv(path: &Path) -> CliResult<CsvData> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let bad = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let header: Vec<String> = reader
        .headers()
        .map_err(bad)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(bad)?;
    if header.iter().all(|h| h.is_empty()) || rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(CsvData {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("not an ISO date ({e})"))
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err("not a finite number".into()),
    }
}

pub fn parse_count(s: &str) -> Result<u64, String> {
    s.parse::<u64>()
        .map_err(|_| "not a nonnegative integer".into())
}

/// Output files collected in memory and written together, so a failed run
/// leaves the output directory untouched.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn table(&mut self, name: &str, table: &Table) {
        self.files.push((format!("{name}.csv"), table.to_csv()));
    }

    /// A table and its plot under the same stem.
    pub fn figure(&mut self, name: &str, table: &Table, svg: String) {
        self.table(name, table);
        self.files.push((format!("{name}.svg"), svg.into_bytes()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Write every file to a temporary name, then rename them all into
    /// place. On failure the temporaries are removed.
    pub fn commit(self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let staged: Vec<(PathBuf, PathBuf)> = self
            .files
            .iter()
            .map(|(name, _)| (dir.join(format!(".{name}.partial")), dir.join(name)))
            .collect();
        let cleanup = |upto: usize| {
            for (tmp, _) in &staged[..upto] {
                let _ = fs::remove_file(tmp);
            }
        };
        for (k, ((_, bytes), (tmp, _))) in self.files.iter().zip(&staged).enumerate() {
            if let Err(e) = fs::write(tmp, bytes) {
                cleanup(k + 1);
                return Err(CliError::io(tmp, e));
            }
        }
        for (k, (tmp, dest)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dest) {
                for (tmp, _) in &staged[k..] {
                    let _ = fs::remove_file(tmp);
                }
                return Err(CliError::io(dest, e));
            }
        }
        Ok(())
    }
}
