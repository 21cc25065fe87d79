use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Daily death counts on consecutive calendar days.
#[derive(Clone, Debug, PartialEq)]
pub struct DeathSeries {
    pub start: NaiveDate,
    pub deaths: Vec<u64>,
    pub label: String,
    /// Population size, used only for per-million presentation.
    pub population: Option<f64>,
}

impl DeathSeries {
    pub fn new(start: NaiveDate, deaths: Vec<u64>) -> Self {
        DeathSeries {
            start,
            deaths,
            label: String::new(),
            population: None,
        }
    }

    /// Build from `(date, count)` rows, which must be strictly consecutive days.
    pub fn from_dated(rows: &[(NaiveDate, u64)]) -> Result<Self> {
        let Some(&(start, _)) = rows.first() else {
            return Err(Error::Input("death series is empty".into()));
        };
        for (i, w) in rows.windows(2).enumerate() {
            if w[1].0 != w[0].0 + chrono::Days::new(1) {
                return Err(Error::Input(format!(
                    "dates not consecutive at row {}: {} follows {}",
                    i + 2,
                    w[1].0,
                    w[0].0
                )));
            }
        }
        Ok(Self::new(start, rows.iter().map(|r| r.1).collect()))
    }

    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        offset_date(self.start, i as i64)
    }

    pub fn total(&self) -> u64 {
        self.deaths.iter().sum()
    }

    /// The same counts starting `days` later.
    pub fn shifted(&self, days: i64) -> Self {
        DeathSeries {
            start: offset_date(self.start, days),
            ..self.clone()
        }
    }
}

pub(crate) fn offset_date(date: NaiveDate, days: i64) -> NaiveDate {
    date + chrono::Duration::days(days)
}
