use chrono::{Days, NaiveDate};

use super::{week_of_year, WEEKS_PER_YEAR};
use crate::error::{Error, Result};

/// Consecutive weekly values; week `i` starts `7i` days after `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeeklySeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
}

impl WeeklySeries {
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Self {
        WeeklySeries { start, values }
    }

    /// Build from dated rows, which must be exactly seven days apart.
    pub fn from_dated(rows: &[(NaiveDate, f64)]) -> Result<Self> {
        let Some(&(start, _)) = rows.first() else {
            return Err(Error::Input("weekly series is empty".into()));
        };
        for (k, w) in rows.windows(2).enumerate() {
            if (w[1].0 - w[0].0).num_days() != 7 {
                return Err(Error::Input(format!(
                    "weeks {} ({}) and {} ({}) are not 7 days apart",
                    k,
                    w[0].0,
                    k + 1,
                    w[1].0
                )));
            }
        }
        Ok(WeeklySeries::new(start, rows.iter().map(|r| r.1).collect()))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date(&self, week: usize) -> NaiveDate {
        self.start + Days::new(7 * week as u64)
    }

    pub fn week_of_year(&self, week: usize) -> usize {
        week_of_year(self.date(week))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// The weeks starting in `from..to`.
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> WeeklySeries {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&k| self.date(k) >= from && self.date(k) < to)
            .collect();
        match idx.first() {
            Some(&first) => WeeklySeries::new(
                self.date(first),
                idx.iter().map(|&k| self.values[k]).collect(),
            ),
            None => WeeklySeries::new(from, Vec::new()),
        }
    }
}

/// How expected deaths were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExcessMethod {
    /// Iterated life table with ageing.
    Lifetable,
    /// Mean deaths for the same week of the year over reference years.
    WeeklyAverage,
    /// Life table on a fixed population: no ageing or depletion.
    LifetableNoAgeing,
}

impl ExcessMethod {
    pub fn name(self) -> &'static str {
        match self {
            ExcessMethod::Lifetable => "lifetable",
            ExcessMethod::WeeklyAverage => "weekly-average",
            ExcessMethod::LifetableNoAgeing => "lifetable-no-ageing",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedDeaths {
    pub series: WeeklySeries,
    pub method: ExcessMethod,
}

#[derive(Clone, Debug)]
pub struct ExcessDeathReport {
    pub start: NaiveDate,
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub excess: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub method: ExcessMethod,
}

impl ExcessDeathReport {
    pub fn len(&self) -> usize {
        self.excess.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excess.is_empty()
    }

    pub fn date(&self, week: usize) -> NaiveDate {
        self.start + Days::new(7 * week as u64)
    }

    pub fn total_excess(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Weekly and cumulative observed minus expected deaths. The two series must
/// start on the same date and have the same length.
pub fn excess_deaths(
    observed: &WeeklySeries,
    expected: &ExpectedDeaths,
) -> Result<ExcessDeathReport> {
    let exp = &expected.series;
    if observed.start != exp.start || observed.len() != exp.len() {
        return Err(Error::Input(format!(
            "observed ({} weeks from {}) and expected ({} weeks from {}) are not aligned",
            observed.len(),
            observed.start,
            exp.len(),
            exp.start
        )));
    }
    let excess: Vec<f64> = observed
        .values
        .iter()
        .zip(&exp.values)
        .map(|(o, e)| o - e)
        .collect();
    let mut acc = 0.0;
    let cumulative = excess
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    Ok(ExcessDeathReport {
        start: observed.start,
        expected: exp.values.clone(),
        observed: observed.values.clone(),
        excess,
        cumulative,
        method: expected.method,
    })
}

/// Expected deaths for `n_weeks` weeks from `target_start` as the plain mean
/// of reference deaths in the same ISO week of the year (week 53 counted as
/// 52). Every week of the year must occur in the reference data.
pub fn baseline_weekly_average(
    reference: &WeeklySeries,
    target_start: NaiveDate,
    n_weeks: usize,
) -> Result<ExpectedDeaths> {
    let mut sums = [0.0; WEEKS_PER_YEAR];
    let mut counts = [0usize; WEEKS_PER_YEAR];
    for k in 0..reference.len() {
        let w = reference.week_of_year(k) - 1;
        sums[w] += reference.values[k];
        counts[w] += 1;
    }
    if let Some(w) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Input(format!(
            "reference period has no data for week {} of the year",
            w + 1
        )));
    }
    let target = WeeklySeries::new(target_start, vec![0.0; n_weeks]);
    let values = (0..n_weeks)
        .map(|k| {
            let w = target.week_of_year(k) - 1;
            sums[w] / counts[w] as f64
        })
        .collect();
    Ok(ExpectedDeaths {
        series: WeeklySeries::new(target_start, values),
        method: ExcessMethod::WeeklyAverage,
    })
}
