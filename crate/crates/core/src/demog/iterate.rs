use chrono::Days;

use super::{
    week_of_year, ExcessMethod, ExpectedDeaths, LifeTable, SeasonalCycle, WeeklyAgePopulation,
    WeeklySeries, WEEKS_PER_YEAR,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct DemographyRun {
    /// Deaths in each simulated week, dated by week start.
    pub deaths: WeeklySeries,
    pub final_population: WeeklyAgePopulation,
    /// Deaths by year class over the run.
    pub deaths_by_class: Vec<f64>,
    /// Person-weeks by year class, each week weighted by its seasonal share
    /// `52 d_w`, counted before that week's deaths.
    pub seasonal_exposure: Vec<f64>,
    /// Set when deaths would have exceeded a cell's population and were
    /// capped at it.
    pub clamped: bool,
}

impl DemographyRun {
    pub fn expected(&self) -> ExpectedDeaths {
        ExpectedDeaths {
            series: self.deaths.clone(),
            method: ExcessMethod::Lifetable,
        }
    }
}

fn check_ages(pop: &WeeklyAgePopulation, table: &LifeTable) -> Result<()> {
    if pop.cells.len() < WEEKS_PER_YEAR + 1 || !(pop.cells.len() - 1).is_multiple_of(WEEKS_PER_YEAR)
    {
        return Err(Error::Input(format!(
            "weekly population has {} cells; expected 52 per closed year plus one",
            pop.cells.len()
        )));
    }
    if pop.n_year_classes() != table.len() {
        return Err(Error::Input(format!(
            "population has {} age classes, life table {}",
            pop.n_year_classes(),
            table.len()
        )));
    }
    Ok(())
}

/// Weekly loop shared by the life-table iteration and simulations:
/// `deaths(cell, population, seasonal_share)` gives the deaths in a cell for
/// the week; they are removed, every cell moves one week older (the terminal
/// cell absorbs), and births enter the youngest cell.
pub(crate) fn iterate_with(
    pop0: &WeeklyAgePopulation,
    cycle: &SeasonalCycle,
    weeks: usize,
    mut deaths: impl FnMut(usize, f64, f64) -> f64,
) -> DemographyRun {
    let mut pop = pop0.clone();
    let n = pop.cells.len();
    let classes = pop.n_year_classes();
    let mut weekly = Vec::with_capacity(weeks);
    let mut by_class = vec![0.0; classes];
    let mut exposure = vec![0.0; classes];
    let mut clamped = false;
    for t in 0..weeks {
        let date = pop0.as_of + Days::new(7 * t as u64);
        let share = WEEKS_PER_YEAR as f64 * cycle.multiplier(week_of_year(date));
        let mut total = 0.0;
        for c in 0..n {
            let p = pop.cells[c];
            let a = pop.year_class(c);
            exposure[a] += p * share;
            let mut d = deaths(c, p, share);
            if d > p {
                d = p;
                clamped = true;
            }
            pop.cells[c] = p - d;
            by_class[a] += d;
            total += d;
        }
        weekly.push(total);
        let oldest = pop.cells[n - 2];
        pop.cells[n - 1] += oldest;
        pop.cells.copy_within(0..n - 2, 1);
        pop.cells[0] = pop.birth_rate;
    }
    pop.as_of = pop0.as_of + Days::new(7 * weeks as u64);
    DemographyRun {
        deaths: WeeklySeries::new(pop0.as_of, weekly),
        final_population: pop,
        deaths_by_class: by_class,
        seasonal_exposure: exposure,
        clamped,
    }
}

/// Iterate the population forward `weeks` weeks from its `as_of` date. A
/// cell in year class `a` loses the fraction `q_a · 52 d_w` in week-of-year
/// `w`, with `q_a = 1 − exp(−m_a/52)`; as `d_w` sums to one over the year the
/// annual share is `q_a` on average.
pub fn iterate_demography(
    pop0: &WeeklyAgePopulation,
    table: &LifeTable,
    cycle: &SeasonalCycle,
    weeks: usize,
) -> Result<DemographyRun> {
    check_ages(pop0, table)?;
    let q: Vec<f64> = (0..table.len()).map(|a| table.weekly_risk(a)).collect();
    Ok(iterate_with(pop0, cycle, weeks, |c, p, share| {
        p * q[pop0.year_class(c)] * share
    }))
}

/// Expected deaths for `weeks` weeks from `start` on a population held fixed
/// at `pop`: no ageing, no depletion, no births.
pub fn no_ageing_variant(
    pop: &WeeklyAgePopulation,
    table: &LifeTable,
    cycle: &SeasonalCycle,
    start: chrono::NaiveDate,
    weeks: usize,
) -> Result<ExpectedDeaths> {
    check_ages(pop, table)?;
    let annual_risk: f64 = pop
        .cells
        .iter()
        .enumerate()
        .map(|(c, p)| p * table.weekly_risk(pop.year_class(c)))
        .sum();
    let values = (0..weeks)
        .map(|t| {
            let date = start + Days::new(7 * t as u64);
            annual_risk * WEEKS_PER_YEAR as f64 * cycle.multiplier(week_of_year(date))
        })
        .collect();
    Ok(ExpectedDeaths {
        series: WeeklySeries::new(start, values),
        method: ExcessMethod::LifetableNoAgeing,
    })
}
