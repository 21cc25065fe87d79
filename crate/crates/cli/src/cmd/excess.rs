use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use clap::{Args, ValueEnum};

use epirecon_core::demog::{
    ageing_decomposition, baseline_weekly_average, excess_deaths, fit_seasonal_cycle,
    iterate_demography, no_ageing_variant, split_to_weekly, AgeGroups, ErrorModel,
    ExcessDeathReport, LifeTable, SeasonalCycle, SeasonalFitOptions, WeeklyAgePopulation,
    WeeklySeries,
};

use super::num;
use crate::error::{CliError, CliResult};
use crate::io::{parse_date, parse_f64, read_csv, CsvData, Outputs};
use crate::svg::{render, Plot, Series};
use crate::table::Table;
use crate::Common;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ErrorModelArg {
    T,
    Gaussian,
}

#[derive(Args, Clone, Debug)]
pub struct ExcessArgs {
    #[command(flatten)]
    pub common: Common,
    /// Annual death rates by single year of age: columns `age,m`, last age
    /// open (`100+`).
    #[arg(long)]
    pub lifetable: Option<PathBuf>,
    /// Population by age group: columns `age,count`, ages are group lower
    /// bounds, last open (`100+`).
    #[arg(long)]
    pub population: Option<PathBuf>,
    /// Date the population refers to (default: the first week of deaths).
    #[arg(long)]
    pub population_date: Option<NaiveDate>,
    /// First week of the reference period (default: the first week of deaths).
    #[arg(long)]
    pub reference_start: Option<NaiveDate>,
    /// First week for which excess deaths are reported; the reference period
    /// ends the week before.
    #[arg(long)]
    pub target_start: Option<NaiveDate>,
    /// Error distribution of the seasonal fit.
    #[arg(long, value_enum, default_value = "t")]
    pub error_model: ErrorModelArg,
    /// Use no seasonal cycle instead of fitting one.
    #[arg(long)]
    pub flat_season: bool,
    /// Youngest age in the ageing decomposition.
    #[arg(long, default_value_t = 0)]
    pub age_floor: usize,
}

/// Age label: `n` or, for the open class, `n+`.
fn parse_age(s: &str) -> Result<(usize, bool), String> {
    let (digits, open) = match s.strip_suffix('+') {
        Some(d) => (d, true),
        None => (s, false),
    };
    digits
        .parse::<usize>()
        .map(|a| (a, open))
        .map_err(|_| "not an age (`n` or `n+`)".into())
}

/// Ages must increase from 0 with only the last open-ended.
fn check_ages(data: &CsvData, ages: &[(usize, bool)], yearly: bool) -> CliResult<Vec<usize>> {
    let bad = |msg: String| CliError::input(format!("{}: {msg}", data.path.display()));
    if ages[0].0 != 0 {
        return Err(bad("ages must start at 0".into()));
    }
    for (k, &(a, open)) in ages.iter().enumerate() {
        let last = k + 1 == ages.len();
        if open != last {
            return Err(bad(format!(
                "only the last age may be open-ended (`{a}+`), and it must be"
            )));
        }
        if k > 0 && a <= ages[k - 1].0 {
            return Err(bad(format!("ages not increasing at {a}")));
        }
        if yearly && a != k {
            return Err(bad(format!(
                "expected single years of age, found {a} after {}",
                k - 1
            )));
        }
    }
    Ok(ages.iter().map(|a| a.0).collect())
}

fn read_lifetable(path: &Path) -> CliResult<LifeTable> {
    let data = read_csv(path)?;
    let ages = data.parse_column(data.column("age")?, parse_age)?;
    check_ages(&data, &ages, true)?;
    let rates = data.parse_column(data.column("m")?, parse_f64)?;
    let table = LifeTable::new(rates).map_err(|e| CliError::from(e).context(path.display()))?;
    if table.terminal_warning {
        eprintln!(
            "warning: {}: terminal death rate is below the one before it",
            path.display()
        );
    }
    Ok(table)
}

fn read_population(path: &Path) -> CliResult<AgeGroups> {
    let data = read_csv(path)?;
    let ages = data.parse_column(data.column("age")?, parse_age)?;
    let lower = check_ages(&data, &ages, false)?;
    let counts = data.parse_column(data.column("count")?, parse_f64)?;
    AgeGroups::new(lower, counts).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_weekly(path: &Path) -> CliResult<WeeklySeries> {
    let data = read_csv(path)?;
    let dates = data.parse_column(data.column("week_start_date")?, parse_date)?;
    let deaths = data.parse_column(data.column("deaths")?, |s| {
        parse_f64(s).and_then(|v| {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err("negative deaths".into())
            }
        })
    })?;
    let rows: Vec<(NaiveDate, f64)> = dates.into_iter().zip(deaths).collect();
    WeeklySeries::from_dated(&rows).map_err(|e| CliError::from(e).context(path.display()))
}

/// Whole weeks from `from` to `to`, which must be a nonnegative multiple of
/// seven days apart.
fn weeks_between(from: NaiveDate, to: NaiveDate, what: &str) -> CliResult<usize> {
    let days = (to - from).num_days();
    if days < 0 || days % 7 != 0 {
        return Err(CliError::input(format!(
            "{what}: {to} is not a whole number of weeks after {from}"
        )));
    }
    Ok((days / 7) as usize)
}

/// Advance a population by `weeks` weeks under the life table.
fn advance(
    pop: &WeeklyAgePopulation,
    table: &LifeTable,
    cycle: &SeasonalCycle,
    weeks: usize,
) -> CliResult<WeeklyAgePopulation> {
    if weeks == 0 {
        return Ok(pop.clone());
    }
    Ok(iterate_demography(pop, table, cycle, weeks)?.final_population)
}

pub fn run(args: &ExcessArgs) -> CliResult<Outputs> {
    let deaths_path = args.common.require_input()?;
    let lifetable_path = args
        .lifetable
        .as_ref()
        .ok_or_else(|| CliError::input("--lifetable is required"))?;
    let population_path = args
        .population
        .as_ref()
        .ok_or_else(|| CliError::input("--population is required"))?;
    let target_start = args
        .target_start
        .ok_or_else(|| CliError::input("--target-start is required"))?;

    let table = read_lifetable(lifetable_path)?;
    let groups = read_population(population_path)?;
    let deaths = read_weekly(deaths_path)?;

    let reference_start = args.reference_start.unwrap_or(deaths.start);
    let population_date = args.population_date.unwrap_or(deaths.start);
    weeks_between(deaths.start, reference_start, "--reference-start")?;
    let ref_weeks = weeks_between(reference_start, target_start, "--target-start")?;
    let pop_to_target = weeks_between(population_date, target_start, "--population-date")?;
    let end = deaths.date(deaths.len());
    let reference = deaths.between(reference_start, target_start);
    let target = deaths.between(target_start, end);
    if reference.len() != ref_weeks || ref_weeks == 0 {
        return Err(CliError::input(format!(
            "deaths do not cover the reference period {reference_start} to {target_start}"
        )));
    }
    if target.is_empty() {
        return Err(CliError::input(format!(
            "no deaths on or after the target start {target_start}"
        )));
    }
    if groups.terminal_age() + 1 != table.len() {
        return Err(CliError::input(format!(
            "population open age {}+ does not match the life table's {}+",
            groups.terminal_age(),
            table.len() - 1
        )));
    }

    let cycle = if args.flat_season {
        SeasonalCycle::flat()
    } else {
        let opts = SeasonalFitOptions {
            error_model: match args.error_model {
                ErrorModelArg::T => ErrorModel::StudentT,
                ErrorModelArg::Gaussian => ErrorModel::Gaussian,
            },
            ..Default::default()
        };
        fit_seasonal_cycle(&reference, &opts)?
    };
    let weekly_average = baseline_weekly_average(&reference, target_start, target.len())?;

    let pop0 = split_to_weekly(&groups, population_date)?;
    let at_target = advance(&pop0, &table, &cycle, pop_to_target)?;
    let lifetable = iterate_demography(&at_target, &table, &cycle, target.len())?;
    if lifetable.clamped {
        eprintln!("warning: deaths capped at the population in some age cells");
    }
    // The fixed population is the one at the middle of the reference period.
    let mid_date = reference_start + Days::new(7 * (ref_weeks / 2) as u64);
    let mid = if mid_date > population_date {
        let w = weeks_between(population_date, mid_date, "reference mid-point")?;
        advance(&pop0, &table, &cycle, w)?
    } else {
        pop0.clone()
    };
    let fixed = no_ageing_variant(&mid, &table, &cycle, target_start, target.len())?;

    let reports: Vec<ExcessDeathReport> = [&lifetable.expected(), &weekly_average, &fixed]
        .into_iter()
        .map(|e| excess_deaths(&target, e))
        .collect::<Result<_, _>>()?;

    let mut out = Outputs::default();
    let mut t = Table::new(&[
        "week_start",
        "expected",
        "observed",
        "excess",
        "cum_excess",
        "method",
    ]);
    t.meta("reference", format!("{reference_start} to {target_start}"));
    t.meta("population_date", population_date);
    for r in &reports {
        for k in 0..r.len() {
            t.push(vec![
                r.date(k).into(),
                num(r.expected[k]),
                num(r.observed[k]),
                num(r.excess[k]),
                num(r.cumulative[k]),
                r.method.name().into(),
            ]);
        }
    }
    let mut plot = Plot::new(
        "Cumulative excess deaths",
        "week_start",
        "week starting",
        "deaths",
    );
    for r in &reports {
        let name = r.method.name();
        plot = plot.series(Series::line("cum_excess", name).filtered("method", name));
    }
    out.figure("excess", &t, render(&t, &plot));

    let mut s = Table::new(&["week", "share"]);
    s.meta(
        "source",
        if args.flat_season {
            "flat"
        } else {
            "fitted to the reference period"
        },
    );
    if let Some(info) = &cycle.fit {
        s.meta("sigma", crate::table::format_float(info.sigma));
        if let Some(nu) = info.nu {
            s.meta("nu", crate::table::format_float(nu));
        }
    }
    for (w, d) in cycle.values().iter().enumerate() {
        s.push(vec![(w as i64 + 1).into(), num(*d)]);
    }
    let plot = Plot::new(
        "Seasonal share of annual deaths",
        "week",
        "week of year",
        "share",
    )
    .series(Series::line("share", "d_w"));
    out.figure("seasonal", &s, render(&s, &plot));

    let decomposition = ageing_decomposition(
        &mid.year_class_totals(),
        &at_target.year_class_totals(),
        &table,
        args.age_floor,
    )?;
    let mut a = Table::new(&["age", "extra_deaths", "cumulative"]);
    a.meta("from", mid.as_of);
    a.meta("to", at_target.as_of);
    for k in 0..decomposition.ages.len() {
        a.push(vec![
            (decomposition.ages[k] as i64).into(),
            num(decomposition.extra_deaths[k]),
            num(decomposition.cumulative[k]),
        ]);
    }
    let plot = Plot::new(
        "Extra expected deaths per year from the changed age structure",
        "age",
        "age",
        "deaths per year",
    )
    .series(Series::line("extra_deaths", "by age"))
    .series(Series::line("cumulative", "cumulative"));
    out.figure("ageing", &a, render(&a, &plot));

    let total = target.total();
    for r in &reports {
        println!(
            "{:>20}: cumulative excess {:.0} ({:+.2}% of observed)",
            r.method.name(),
            r.total_excess(),
            100.0 * r.total_excess() / total
        );
    }
    Ok(out)
}
