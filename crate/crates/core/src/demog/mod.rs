//! Iterated weekly life-table demography: expected deaths from a population
//! that ages, dies and is replenished by births week by week, the seasonal
//! cycle in mortality, conventional week-of-year baselines, excess deaths and
//! the ageing decomposition of a change in expected deaths.
//!
//! Ages are in completed years `0..n−1` with the last class open-ended (for
//! example `100+`). A weekly population has 52 one-week cells for every
//! closed year class plus one absorbing cell for the open class.

mod excess;
mod iterate;
pub(crate) use iterate::iterate_with;
mod lifetable;
mod population;
mod seasonal;

pub use excess::{
    baseline_weekly_average, excess_deaths, ExcessDeathReport, ExcessMethod, ExpectedDeaths,
    WeeklySeries,
};
pub use iterate::{iterate_demography, no_ageing_variant, DemographyRun};
pub use lifetable::{ageing_decomposition, AgeingDecomposition, LifeTable};
pub use population::{split_to_weekly, AgeGroups, WeeklyAgePopulation};
pub use seasonal::{
    fit_seasonal_cycle, ErrorModel, SeasonalCycle, SeasonalFitInfo, SeasonalFitOptions,
};

use chrono::{Datelike, NaiveDate};

pub const WEEKS_PER_YEAR: usize = 52;

/// ISO week of the year, 1..=52, with week 53 folded into 52.
pub fn week_of_year(date: NaiveDate) -> usize {
    (date.iso_week().week() as usize).min(WEEKS_PER_YEAR)
}
