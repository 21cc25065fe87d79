//! Synthetic datasets with known truth, used by tests, benchmarks and the
//! bundled example data.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::deconv::{DeathSeries, DurationDist};
use crate::par::stream_rng;

/// `baseline + height · exp(−(t − peak)² / (2 width²))` for `t = 0..n`.
pub fn gaussian_wave(n: usize, peak: f64, height: f64, width: f64, baseline: f64) -> Vec<f64> {
    (0..n)
        .map(|t| baseline + height * (-(t as f64 - peak).powi(2) / (2.0 * width * width)).exp())
        .collect()
}

/// Two epidemic waves on a grid of `n` days: peaks of 250 at day 50 and 150
/// at day 130, on a baseline of 0.5 infections per day.
pub fn two_wave_incidence(n: usize) -> Vec<f64> {
    let a = gaussian_wave(n, 50.0, 250.0, 10.0, 0.5);
    let b = gaussian_wave(n, 130.0, 150.0, 16.0, 0.0);
    a.iter().zip(&b).map(|(x, y)| x + y).collect()
}

/// Expected deaths from grid incidence under the deconvolution model: death
/// day `i` collects lags `1..=min(d_start + i, d_limit)` and grid day `j`
/// corresponds to death day `j − grid_offset`.
pub fn expected_deaths(
    incidence: &[f64],
    grid_offset: usize,
    n_days: usize,
    duration: &DurationDist,
    d_start: usize,
    d_limit: usize,
) -> Vec<f64> {
    (0..n_days)
        .map(|i| {
            let j = i + grid_offset;
            (1..=(d_start + i).min(d_limit))
                .filter(|&d| d <= j && j - d < incidence.len())
                .map(|d| incidence[j - d] * duration.prob(d))
                .sum()
        })
        .collect()
}

pub fn poisson_counts<R: Rng + ?Sized>(means: &[f64], rng: &mut R) -> Vec<u64> {
    means
        .iter()
        .map(|&m| {
            if m > 0.0 {
                Poisson::new(m).unwrap().sample(rng) as u64
            } else {
                0
            }
        })
        .collect()
}

/// Negative binomial counts with variance `μ + μ²/θ`.
pub fn negbin_counts<R: Rng + ?Sized>(means: &[f64], theta: f64, rng: &mut R) -> Vec<u64> {
    let gamma = Gamma::new(theta, 1.0 / theta).unwrap();
    means
        .iter()
        .map(|&m| {
            let rate = m * gamma.sample(rng);
            if rate > 0.0 {
                Poisson::new(rate).unwrap().sample(rng) as u64
            } else {
                0
            }
        })
        .collect()
}

/// A synthetic death series with its true grid incidence.
#[derive(Clone, Debug)]
pub struct SyntheticDeaths {
    pub series: DeathSeries,
    /// True incidence on the grid starting `grid_offset` days before the
    /// first death day.
    pub incidence: Vec<f64>,
    pub grid_offset: usize,
    pub expected: Vec<f64>,
}

/// Deaths from the two-wave incidence over `n_days`, Poisson noise or
/// negative binomial noise when `theta` is given.
pub fn two_wave_deaths(
    n_days: usize,
    duration: &DurationDist,
    grid_offset: usize,
    d_limit: usize,
    theta: Option<f64>,
    seed: u64,
) -> SyntheticDeaths {
    let incidence = two_wave_incidence(n_days + grid_offset);
    let expected = expected_deaths(
        &incidence,
        grid_offset,
        n_days,
        duration,
        grid_offset,
        d_limit,
    );
    let mut rng = stream_rng(seed, 0);
    let deaths = match theta {
        Some(t) => negbin_counts(&expected, t, &mut rng),
        None => poisson_counts(&expected, &mut rng),
    };
    let start = NaiveDate::from_ymd_opt(2020, 2, 1).expect("valid date");
    SyntheticDeaths {
        series: DeathSeries::new(start, deaths),
        incidence,
        grid_offset,
        expected,
    }
}

/// Synthetic demography on a UK-like scale: Gompertz mortality, a winter
/// seasonal peak, and populations with and without an ageing baby boom.
pub mod demography {
    use chrono::NaiveDate;
    use rand_distr::{Distribution, Poisson};

    use crate::demog::{
        iterate_demography, AgeGroups, DemographyRun, LifeTable, SeasonalCycle,
        WeeklyAgePopulation, WeeklySeries, WEEKS_PER_YEAR,
    };
    use crate::error::Result;
    use crate::par::stream_rng;

    /// Oldest closed year of age; the open class is `100+`.
    pub const TERMINAL_AGE: usize = 100;
    pub const TERMINAL_RATE: f64 = 0.7;
    /// Weekly births.
    pub const BIRTHS: f64 = 14_000.0;

    /// Annual death rate at exact age `x` years: infant excess in the first
    /// year, then Gompertz growth of about 10% per year of age.
    pub fn hazard(x: f64) -> f64 {
        if x >= TERMINAL_AGE as f64 {
            TERMINAL_RATE
        } else if x < 1.0 {
            0.004
        } else {
            0.0005 + 3e-5 * (0.1 * x).exp()
        }
    }

    /// Life table with the hazard at each year's mid-point.
    pub fn gompertz_table() -> LifeTable {
        let rates = (0..=TERMINAL_AGE).map(|a| hazard(a as f64 + 0.5)).collect();
        LifeTable::new(rates).expect("valid rates")
    }

    /// `d_w ∝ 1 + amplitude · cos(2π (w − peak_week) / 52)`.
    pub fn sinusoidal_cycle(amplitude: f64, peak_week: f64) -> SeasonalCycle {
        let w: Vec<f64> = (1..=WEEKS_PER_YEAR)
            .map(|w| {
                1.0 + amplitude
                    * (2.0 * std::f64::consts::PI * (w as f64 - peak_week) / WEEKS_PER_YEAR as f64)
                        .cos()
            })
            .collect();
        SeasonalCycle::from_weights(&w).expect("positive weights")
    }

    /// Winter-peaked cycle used by the demography examples.
    pub fn winter_cycle() -> SeasonalCycle {
        sinusoidal_cycle(0.15, 2.0)
    }

    /// Monday starting ISO week 1 of `year`.
    pub fn iso_year_start(year: i32) -> NaiveDate {
        NaiveDate::from_isoywd_opt(year, 1, chrono::Weekday::Mon).expect("valid ISO year")
    }

    /// Population in equilibrium with `table` under constant weekly births
    /// and no seasonality: each cell is the previous one's survivors and the
    /// terminal cell balances its inflow.
    pub fn stationary_population(table: &LifeTable, as_of: NaiveDate) -> WeeklyAgePopulation {
        let n_closed = (table.len() - 1) * WEEKS_PER_YEAR;
        let mut cells = Vec::with_capacity(n_closed + 1);
        let mut p = BIRTHS;
        for c in 0..n_closed {
            cells.push(p);
            p *= 1.0 - table.weekly_risk(c / WEEKS_PER_YEAR);
        }
        cells.push(p / table.weekly_risk(table.len() - 1));
        WeeklyAgePopulation {
            cells,
            birth_rate: BIRTHS,
            as_of,
        }
    }

    /// Annual counts by single year of age (`100+` last) of the stationary
    /// population with cohorts aged `boom_ages` enlarged by `boom` (0.31 is
    /// a 31% larger cohort).
    pub fn boom_population(
        table: &LifeTable,
        boom_ages: std::ops::Range<usize>,
        boom: f64,
    ) -> AgeGroups {
        let base = stationary_population(table, iso_year_start(2015)).year_class_totals();
        let counts = base
            .iter()
            .enumerate()
            .map(|(a, &p)| {
                if boom_ages.contains(&a) {
                    p * (1.0 + boom)
                } else {
                    p
                }
            })
            .collect();
        AgeGroups::yearly(counts).expect("valid counts")
    }

    /// Poisson draws around expected weekly deaths.
    pub fn observed_deaths(expected: &WeeklySeries, seed: u64) -> WeeklySeries {
        let mut rng = stream_rng(seed, 0);
        let values = expected
            .values
            .iter()
            .map(|&m| {
                if m > 0.0 {
                    Poisson::new(m).expect("positive mean").sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        WeeklySeries::new(expected.start, values)
    }

    /// Mortality acting on exact weekly age rather than whole years: cell `c`
    /// loses `1 − exp(−h(x_c) · 52 d_w / 52)` per week, `x_c` its mid-age.
    /// This is the "real" population against which a life table built from
    /// the run's own deaths and exposure is checked.
    pub fn simulate_exact_age(
        pop0: &WeeklyAgePopulation,
        cycle: &SeasonalCycle,
        weeks: usize,
    ) -> DemographyRun {
        let n_closed = pop0.cells.len() - 1;
        crate::demog::iterate_with(pop0, cycle, weeks, |c, p, share| {
            let x = if c < n_closed {
                (c as f64 + 0.5) / WEEKS_PER_YEAR as f64
            } else {
                TERMINAL_AGE as f64
            };
            -p * (-hazard(x) * share / WEEKS_PER_YEAR as f64).exp_m1()
        })
    }

    /// Ageing scenario from ISO 2015 week 1: expected deaths under the
    /// Gompertz table and winter cycle with a 31% baby boom aged 50–68 at the
    /// start, for `weeks` weeks.
    pub fn ageing_scenario(weeks: usize) -> Result<(WeeklyAgePopulation, DemographyRun)> {
        let table = gompertz_table();
        let groups = boom_population(&table, 50..69, 0.31);
        let pop0 = crate::demog::split_to_weekly(&groups, iso_year_start(2015))?;
        let run = iterate_demography(&pop0, &table, &winter_cycle(), weeks)?;
        Ok((pop0, run))
    }
}
