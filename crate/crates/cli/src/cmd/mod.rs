pub mod deconv;
pub mod excess;
pub mod seir;

use std::path::Path;

use chrono::NaiveDate;

use crate::error::CliResult;
use crate::io::{parse_date, read_csv};
use crate::table::Cell;

/// Finite values as numbers, anything else as a missing field.
pub fn num(v: f64) -> Cell {
    if v.is_finite() {
        Cell::Num(v)
    } else {
        Cell::Missing
    }
}

/// Marker dates from a CSV with a `date` column.
pub fn read_marker_dates(path: Option<&Path>) -> CliResult<Vec<NaiveDate>> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let data = read_csv(path)?;
    let col = data.column("date")?;
    let mut dates = data.parse_column(col, parse_date)?;
    dates.sort();
    Ok(dates)
}
