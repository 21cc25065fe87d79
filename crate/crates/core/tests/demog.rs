use chrono::{Days, NaiveDate};
use epirecon_core::demog::*;
use epirecon_core::synthetic::demography::*;
use epirecon_core::Error;
use proptest::prelude::*;

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn max_rel_diff(a: &SeasonalCycle, b: &SeasonalCycle) -> f64 {
    (1..=WEEKS_PER_YEAR)
        .map(|w| (a.multiplier(w) / b.multiplier(w) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Poisson weekly deaths for three ISO years from 2016, averaging `level`
/// a week and following `cycle`.
fn seasonal_deaths(cycle: &SeasonalCycle, level: f64, seed: u64) -> WeeklySeries {
    let start = iso_year_start(2016);
    let mean = (0..156)
        .map(|k| {
            let w = week_of_year(start + Days::new(7 * k as u64));
            level * WEEKS_PER_YEAR as f64 * cycle.multiplier(w)
        })
        .collect();
    observed_deaths(&WeeklySeries::new(start, mean), seed)
}

// ---- weekly population ----

#[test]
fn uniform_population_gives_equal_cells() {
    let groups = AgeGroups::yearly(vec![52_000.0; 41]).unwrap();
    let pop = split_to_weekly(&groups, date(2020, 1, 6)).unwrap();
    for v in &pop.cells[..40 * 52] {
        assert!((v - 1000.0).abs() < 1e-9, "{v}");
    }
    assert_eq!(pop.birth_rate, pop.cells[0]);
}

#[test]
fn baby_boom_cohort_splits_smoothly() {
    let mut counts = vec![700_000.0; 80];
    for c in &mut counts[40..60] {
        *c *= 1.31;
    }
    let pop = split_to_weekly(
        &AgeGroups::yearly(counts.clone()).unwrap(),
        date(2020, 1, 6),
    )
    .unwrap();
    let worst = pop.cells[..79 * 52]
        .windows(2)
        .map(|w| (w[1] / w[0] - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.03, "largest step between adjacent weeks {worst}");
    for (a, total) in pop.year_class_totals().iter().enumerate() {
        assert!((total - counts[a]).abs() <= 1e-6 * counts[a]);
    }
}

#[test]
fn five_year_groups_are_reproduced_exactly() {
    let lower = vec![0, 5, 10, 15, 20, 25, 30];
    let counts = vec![3.1e6, 3.3e6, 3.2e6, 3.0e6, 3.6e6, 3.9e6, 9.0e6];
    let groups = AgeGroups::new(lower.clone(), counts.clone()).unwrap();
    let pop = split_to_weekly(&groups, date(2019, 7, 1)).unwrap();
    let years = pop.year_class_totals();
    assert_eq!(years.len(), 31);
    for g in 0..6 {
        let sum: f64 = years[lower[g]..lower[g + 1]].iter().sum();
        assert!(
            (sum - counts[g]).abs() <= 1e-9 * counts[g],
            "group {g}: {sum}"
        );
    }
    assert_eq!(years[30], counts[6]);
}

#[test]
fn negative_counts_are_input_errors() {
    let err = AgeGroups::yearly(vec![10.0, 5.0, -1.0, 4.0]).unwrap_err();
    assert!(matches!(err, Error::Input(_)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn split_preserves_year_totals_and_stays_nonnegative(
        counts in prop::collection::vec(0.0f64..1e6, 3..30)
    ) {
        let groups = AgeGroups::yearly(counts.clone()).unwrap();
        let pop = split_to_weekly(&groups, date(2018, 1, 1)).unwrap();
        prop_assert!(pop.cells.iter().all(|v| *v >= 0.0));
        for (a, total) in pop.year_class_totals().iter().enumerate() {
            prop_assert!((total - counts[a]).abs() <= 1e-9 * counts[a].max(1.0));
        }
    }

    #[test]
    fn weekly_bookkeeping_balances(
        scale in 0.1f64..3.0, weeks in 1usize..80, amplitude in 0.0f64..0.4
    ) {
        let table = LifeTable::new(
            gompertz_table().rates().iter().map(|m| (m * scale).min(5.0)).collect(),
        ).unwrap();
        let pop0 = stationary_population(&gompertz_table(), iso_year_start(2018));
        let cycle = sinusoidal_cycle(amplitude, 3.0);
        let run = iterate_demography(&pop0, &table, &cycle, weeks).unwrap();
        let expected = pop0.total() + weeks as f64 * pop0.birth_rate - run.deaths.total();
        prop_assert!((run.final_population.total() - expected).abs() <= 1e-6 * pop0.total());
        prop_assert!(!run.clamped);
    }
}

// ---- iteration ----

#[test]
fn zero_mortality_grows_by_births_only() {
    let pop0 = stationary_population(&gompertz_table(), iso_year_start(2018));
    let table = LifeTable::new(vec![0.0; 101]).unwrap();
    let run = iterate_demography(&pop0, &table, &winter_cycle(), 156).unwrap();
    assert!(run.deaths.values.iter().all(|d| *d == 0.0));
    let grown = pop0.total() + 156.0 * pop0.birth_rate;
    assert!((run.final_population.total() - grown).abs() <= 1e-9 * grown);
    let fixed = no_ageing_variant(&pop0, &table, &winter_cycle(), pop0.as_of, 156).unwrap();
    assert_eq!(fixed.series.values, run.deaths.values);
}

#[test]
fn weekly_risk_matches_formula() {
    let table = LifeTable::new(vec![0.0, 0.52, 1.0]).unwrap();
    let q = table.weekly_risk(1);
    assert!((q - (1.0 - (-0.01f64).exp())).abs() < 1e-15);
    assert!((q - 0.009_950_166_250_831_893).abs() < 1e-15);
}

#[test]
fn weekly_deaths_follow_the_seasonal_share() {
    // one closed class plus the terminal; a flat population of one class
    let table = LifeTable::new(vec![0.52, 0.52]).unwrap();
    let pop = WeeklyAgePopulation {
        cells: vec![1000.0; 53],
        birth_rate: 0.0,
        as_of: iso_year_start(2019),
    };
    let cycle = winter_cycle();
    let run = iterate_demography(&pop, &table, &cycle, 1).unwrap();
    let q = table.weekly_risk(0);
    let expected = 53_000.0 * q * 52.0 * cycle.multiplier(1);
    assert!((run.deaths.values[0] - expected).abs() < 1e-9 * expected);
}

#[test]
fn extreme_mortality_is_clamped_and_flagged() {
    let table = LifeTable::new(vec![400.0, 400.0]).unwrap();
    let pop = WeeklyAgePopulation {
        cells: vec![10.0; 53],
        birth_rate: 1.0,
        as_of: iso_year_start(2019),
    };
    let cycle = sinusoidal_cycle(0.9, 1.0);
    let run = iterate_demography(&pop, &table, &cycle, 4).unwrap();
    assert!(run.clamped);
    assert!(run.final_population.cells.iter().all(|v| *v >= 0.0));
}

#[test]
fn mismatched_ages_are_rejected() {
    let pop0 = stationary_population(&gompertz_table(), iso_year_start(2018));
    let table = LifeTable::new(vec![0.01; 50]).unwrap();
    assert!(matches!(
        iterate_demography(&pop0, &table, &SeasonalCycle::flat(), 10),
        Err(Error::Input(_))
    ));
}

#[test]
fn life_table_from_own_mortality_reproduces_deaths() {
    let table = gompertz_table();
    let pop0 =
        split_to_weekly(&boom_population(&table, 50..69, 0.31), iso_year_start(2017)).unwrap();
    let cycle = winter_cycle();
    let truth = simulate_exact_age(&pop0, &cycle, 157);
    let own = LifeTable::from_exposure(&truth.deaths_by_class, &truth.seasonal_exposure).unwrap();
    let predicted = iterate_demography(&pop0, &own, &cycle, 157).unwrap();
    let rel = (predicted.deaths.total() / truth.deaths.total() - 1.0).abs();
    assert!(rel < 1e-4, "relative error {rel}");
}

#[test]
fn terminal_rate_below_previous_warns() {
    assert!(
        LifeTable::new(vec![0.1, 0.5, 0.4])
            .unwrap()
            .terminal_warning
    );
    assert!(!gompertz_table().terminal_warning);
}

// ---- seasonal cycle ----

#[test]
fn flat_deaths_give_flat_cycle() {
    let flat = SeasonalCycle::flat();
    for seed in 0..10 {
        let cycle =
            fit_seasonal_cycle(&seasonal_deaths(&flat, 10_000.0, seed), &Default::default())
                .unwrap();
        let sum: f64 = cycle.values().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        let worst = max_rel_diff(&cycle, &flat);
        assert!(worst < 0.02, "seed {seed}: {worst}");
    }
}

#[test]
fn sinusoidal_cycle_is_recovered() {
    let truth = sinusoidal_cycle(0.15, 2.0);
    for seed in 0..100 {
        let cycle = fit_seasonal_cycle(
            &seasonal_deaths(&truth, 10_000.0, seed),
            &Default::default(),
        )
        .unwrap();
        let worst = max_rel_diff(&cycle, &truth);
        assert!(worst < 0.03, "seed {seed}: {worst}");
        assert!((cycle.values().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(cycle.values().iter().all(|d| *d > 0.0));
    }
}

#[test]
fn t_errors_resist_outlying_weeks() {
    let truth = sinusoidal_cycle(0.15, 2.0);
    let t_opts = SeasonalFitOptions::default();
    let g_opts = SeasonalFitOptions {
        error_model: ErrorModel::Gaussian,
        ..Default::default()
    };
    for seed in 0..5 {
        let clean = seasonal_deaths(&truth, 10_000.0, seed);
        let mut spiked = clean.clone();
        for k in 60..64 {
            spiked.values[k] *= 5.0;
        }
        let t_change = max_rel_diff(
            &fit_seasonal_cycle(&clean, &t_opts).unwrap(),
            &fit_seasonal_cycle(&spiked, &t_opts).unwrap(),
        );
        let g_change = max_rel_diff(
            &fit_seasonal_cycle(&clean, &g_opts).unwrap(),
            &fit_seasonal_cycle(&spiked, &g_opts).unwrap(),
        );
        assert!(
            t_change < 0.01,
            "seed {seed}: t likelihood moved {t_change}"
        );
        assert!(
            g_change > 0.03,
            "seed {seed}: Gaussian moved only {g_change}"
        );
    }
}

#[test]
fn fitted_cycle_reports_scale_and_shape() {
    let cycle = fit_seasonal_cycle(
        &seasonal_deaths(&winter_cycle(), 10_000.0, 1),
        &Default::default(),
    )
    .unwrap();
    let info = cycle.fit.as_ref().unwrap();
    // Poisson noise at 10^4 a week: σ ≈ 100
    assert!(
        (info.sigma / 100.0 - 1.0).abs() < 0.2,
        "sigma {}",
        info.sigma
    );
    assert!(info.nu.unwrap() > 2.01);
    assert_eq!(info.weekly_level.len(), 52);
}

#[test]
fn short_reference_is_an_input_error() {
    let short = WeeklySeries::new(iso_year_start(2016), vec![100.0; 103]);
    assert!(matches!(
        fit_seasonal_cycle(&short, &Default::default()),
        Err(Error::Input(_))
    ));
}

#[test]
fn nonpositive_weekly_level_is_rejected() {
    // mean zero with a large swing: f̂₁ must go negative somewhere
    let start = iso_year_start(2016);
    let values = (0..156)
        .map(|k| {
            let w = week_of_year(start + Days::new(7 * k as u64)) as f64;
            1000.0 * (2.0 * std::f64::consts::PI * w / 52.0).cos()
        })
        .collect();
    let err =
        fit_seasonal_cycle(&WeeklySeries::new(start, values), &Default::default()).unwrap_err();
    assert!(matches!(err, Error::Numerical { .. }), "{err:?}");
}

#[test]
fn week_53_counts_as_52() {
    assert_eq!(week_of_year(date(2020, 12, 28)), 52);
    assert_eq!(week_of_year(date(2020, 12, 21)), 52);
    assert_eq!(week_of_year(date(2021, 1, 4)), 1);
}

#[test]
fn cycle_weights_are_validated() {
    assert!(SeasonalCycle::from_weights(&[1.0; 51]).is_err());
    let mut w = vec![1.0; 52];
    w[10] = 0.0;
    assert!(SeasonalCycle::from_weights(&w).is_err());
    let c = SeasonalCycle::from_weights(&[2.0; 52]).unwrap();
    assert!((c.multiplier(7) - 1.0 / 52.0).abs() < 1e-15);
}

// ---- excess and baselines ----

fn expected(values: Vec<f64>, start: NaiveDate) -> ExpectedDeaths {
    ExpectedDeaths {
        series: WeeklySeries::new(start, values),
        method: ExcessMethod::Lifetable,
    }
}

#[test]
fn equal_series_have_no_excess() {
    let start = date(2020, 1, 6);
    let obs = WeeklySeries::new(start, vec![123.0; 30]);
    let report = excess_deaths(&obs, &expected(vec![123.0; 30], start)).unwrap();
    assert!(report.excess.iter().all(|x| *x == 0.0));
    assert_eq!(report.total_excess(), 0.0);
    assert_eq!(report.method, ExcessMethod::Lifetable);
}

#[test]
fn constant_excess_accumulates() {
    let start = date(2020, 1, 6);
    let obs = WeeklySeries::new(start, vec![1100.0; 10]);
    let report = excess_deaths(&obs, &expected(vec![1000.0; 10], start)).unwrap();
    assert_eq!(report.total_excess(), 1000.0);
    assert_eq!(report.date(9), date(2020, 3, 9));
}

#[test]
fn misaligned_series_are_rejected() {
    let obs = WeeklySeries::new(date(2020, 1, 6), vec![1.0; 10]);
    assert!(matches!(
        excess_deaths(&obs, &expected(vec![1.0; 10], date(2020, 1, 13))),
        Err(Error::Input(_))
    ));
    assert!(matches!(
        excess_deaths(&obs, &expected(vec![1.0; 9], date(2020, 1, 6))),
        Err(Error::Input(_))
    ));
}

#[test]
fn dated_rows_must_be_a_week_apart() {
    let rows = [(date(2020, 1, 6), 1.0), (date(2020, 1, 14), 2.0)];
    assert!(WeeklySeries::from_dated(&rows).is_err());
    assert!(WeeklySeries::from_dated(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn cumulative_excess_is_the_running_sum(
        pairs in prop::collection::vec((0.0f64..1e4, 0.0f64..1e4), 1..120)
    ) {
        let start = date(2020, 1, 6);
        let obs = WeeklySeries::new(start, pairs.iter().map(|p| p.0).collect());
        let exp = expected(pairs.iter().map(|p| p.1).collect(), start);
        let report = excess_deaths(&obs, &exp).unwrap();
        let mut acc = 0.0;
        for (k, x) in report.excess.iter().enumerate() {
            prop_assert_eq!(*x, pairs[k].0 - pairs[k].1);
            acc += x;
            prop_assert_eq!(report.cumulative[k], acc);
        }
    }

    #[test]
    fn decomposition_is_linear_in_the_change(
        changes in prop::collection::vec(-5e4f64..5e4, 101)
    ) {
        let table = gompertz_table();
        let base = vec![6e5; 101];
        let once: Vec<f64> = base.iter().zip(&changes).map(|(b, c)| b + c).collect();
        let twice: Vec<f64> = base.iter().zip(&changes).map(|(b, c)| b + 2.0 * c).collect();
        let d1 = ageing_decomposition(&base, &once, &table, 50).unwrap();
        let d2 = ageing_decomposition(&base, &twice, &table, 50).unwrap();
        for (a, b) in d1.cumulative.iter().zip(&d2.cumulative) {
            prop_assert!((2.0 * a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn single_reference_year_is_its_own_baseline() {
    let start = iso_year_start(2019);
    let reference = WeeklySeries::new(start, (0..52).map(|k| 900.0 + k as f64).collect());
    let base = baseline_weekly_average(&reference, iso_year_start(2020), 52).unwrap();
    assert_eq!(base.series.values, reference.values);
    assert_eq!(base.method, ExcessMethod::WeeklyAverage);
}

#[test]
fn baseline_is_the_plain_mean() {
    let reference = WeeklySeries::new(
        iso_year_start(2018),
        [vec![100.0; 52], vec![200.0; 52]].concat(),
    );
    let base = baseline_weekly_average(&reference, iso_year_start(2021), 10).unwrap();
    assert!(base.series.values.iter().all(|v| *v == 150.0));
    // a reference without every week of the year is refused
    let partial = WeeklySeries::new(iso_year_start(2018), vec![1.0; 30]);
    assert!(baseline_weekly_average(&partial, iso_year_start(2021), 10).is_err());
}

#[test]
fn no_ageing_variant_is_flat_apart_from_the_cycle() {
    let table = gompertz_table();
    let pop = stationary_population(&table, iso_year_start(2018));
    let cycle = winter_cycle();
    let start = iso_year_start(2020);
    let fixed = no_ageing_variant(&pop, &table, &cycle, start, 104).unwrap();
    let annual = fixed.series.values[0] / (52.0 * cycle.multiplier(1));
    for (k, v) in fixed.series.values.iter().enumerate() {
        let w = fixed.series.week_of_year(k);
        assert!((v / (52.0 * cycle.multiplier(w)) - annual).abs() < 1e-9 * annual);
    }
    assert_eq!(fixed.method, ExcessMethod::LifetableNoAgeing);
}

#[test]
fn identical_populations_decompose_to_zero() {
    let pop = vec![5e5; 101];
    let d = ageing_decomposition(&pop, &pop, &gompertz_table(), 50).unwrap();
    assert!(d.cumulative.iter().all(|v| *v == 0.0));
    assert_eq!(d.ages.first(), Some(&50));
    assert!(ageing_decomposition(&pop, &pop[..100], &gompertz_table(), 50).is_err());
}

// ---- method comparison on synthetic populations ----

struct Comparison {
    weekly_average: f64,
    lifetable: f64,
    no_ageing_vs_average: f64,
}

/// Cumulative excess over ISO 2020–2022 as fractions of observed deaths,
/// with 2015–2019 as the reference period and constant mortality throughout.
fn compare_methods(pop0: &WeeklyAgePopulation, seed: u64) -> Comparison {
    let table = gompertz_table();
    let cycle = winter_cycle();
    let (reference_start, target_start, end) = (
        iso_year_start(2015),
        iso_year_start(2020),
        iso_year_start(2023),
    );
    let ref_weeks = ((target_start - reference_start).num_days() / 7) as usize;
    let target_weeks = ((end - target_start).num_days() / 7) as usize;
    let truth = iterate_demography(pop0, &table, &cycle, ref_weeks + target_weeks).unwrap();
    let observed = observed_deaths(&truth.deaths, seed);
    let reference = observed.between(reference_start, target_start);
    let target = observed.between(target_start, end);

    let weekly_average = baseline_weekly_average(&reference, target_start, target_weeks).unwrap();
    let fitted = fit_seasonal_cycle(&reference, &Default::default()).unwrap();
    let at_target = iterate_demography(pop0, &table, &cycle, ref_weeks)
        .unwrap()
        .final_population;
    let lifetable = iterate_demography(&at_target, &table, &fitted, target_weeks).unwrap();
    let mid = iterate_demography(pop0, &table, &cycle, ref_weeks / 2)
        .unwrap()
        .final_population;
    let fixed = no_ageing_variant(&mid, &table, &fitted, target_start, target_weeks).unwrap();

    let total = target.total();
    Comparison {
        weekly_average: excess_deaths(&target, &weekly_average)
            .unwrap()
            .total_excess()
            / total,
        lifetable: excess_deaths(&target, &lifetable.expected())
            .unwrap()
            .total_excess()
            / total,
        no_ageing_vs_average: fixed.series.total() / weekly_average.series.total() - 1.0,
    }
}

#[test]
fn ageing_population_biases_the_weekly_average() {
    let (pop0, _) = ageing_scenario(1).unwrap();
    let c = compare_methods(&pop0, 11);
    assert!(
        c.weekly_average > 0.01,
        "weekly average excess {}",
        c.weekly_average
    );
    assert!(
        c.lifetable.abs() <= 0.002,
        "lifetable excess {}",
        c.lifetable
    );
    assert!(
        c.no_ageing_vs_average.abs() <= 0.005,
        "{}",
        c.no_ageing_vs_average
    );
}

#[test]
fn stationary_population_shows_no_bias() {
    let pop0 = stationary_population(&gompertz_table(), iso_year_start(2015));
    let c = compare_methods(&pop0, 12);
    assert!(
        c.weekly_average.abs() <= 0.002,
        "weekly average excess {}",
        c.weekly_average
    );
    assert!(
        c.lifetable.abs() <= 0.002,
        "lifetable excess {}",
        c.lifetable
    );
}

#[test]
fn divergence_grows_with_ageing() {
    let table = gompertz_table();
    let gaps: Vec<f64> = [0.0, 0.15, 0.31, 0.6]
        .iter()
        .map(|&boom| {
            let groups = boom_population(&table, 50..69, boom);
            let pop0 = split_to_weekly(&groups, iso_year_start(2015)).unwrap();
            let c = compare_methods(&pop0, 13);
            c.weekly_average - c.lifetable
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}
