use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use epirecon_core::deconv::{
    forward_simulate_check, reconstruct_incidence, DeathSeries, DeconvOptions, DurationDist,
    Envelope, Family, IncidenceReconstruction,
};
use epirecon_core::seir::r_from_incidence;

use super::{num, read_marker_dates};
use crate::error::{CliError, CliResult};
use crate::io::{parse_count, parse_date, read_csv, Outputs};
use crate::svg::{render, Plot, Series};
use crate::table::{Cell, Table};
use crate::Common;

const BUNDLED_PRESETS: &str = include_str!("../../data/duration_presets.toml");

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FamilyArg {
    Poisson,
    Negbin,
}

/// Options for fitting the deconvolution model.
#[derive(Args, Clone, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "poisson")]
    pub family: FamilyArg,
    /// Multiply expected deaths by a day-of-week cycle.
    #[arg(long)]
    pub weekly_cycle: bool,
    /// Incidence spline basis dimension (default: one per eight days).
    #[arg(long)]
    pub basis_dim: Option<usize>,
    /// Maximum delay for the first death day.
    #[arg(long, default_value_t = 20)]
    pub d_start: usize,
    /// Limit of the maximum delay, which grows a day per day.
    #[arg(long, default_value_t = 80)]
    pub d_limit: usize,
    /// Named infection-to-death distribution.
    #[arg(long, default_value = "isaric")]
    pub duration: String,
    /// Overrides the preset's log-scale mean.
    #[arg(long)]
    pub meanlog: Option<f64>,
    /// Overrides the preset's log-scale standard deviation.
    #[arg(long)]
    pub sdlog: Option<f64>,
    /// TOML file of named delay distributions (default: bundled presets).
    #[arg(long)]
    pub presets: Option<PathBuf>,
    /// Posterior draws for the credible bands.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// CSV with a `date` column of days to mark on plots.
    #[arg(long)]
    pub dates: Option<PathBuf>,
}

#[derive(Args, Clone, Debug)]
pub struct DeconvArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Rate of leaving the exposed class, per day, for log R.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub delta: f64,
    /// Recovery rate, per day, for log R.
    #[arg(long, default_value_t = 1.0 / 5.0)]
    pub gamma: f64,
    /// Forward-simulation replicates (at least 100).
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
}

impl std::ops::Deref for DeconvArgs {
    type Target = FitArgs;
    fn deref(&self) -> &FitArgs {
        &self.fit
    }
}

#[derive(Args, Clone, Debug)]
pub struct SimcheckArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Named distribution for simulation (default: the fitted one).
    #[arg(long)]
    pub sim_duration: Option<String>,
    #[arg(long)]
    pub sim_meanlog: Option<f64>,
    #[arg(long)]
    pub sim_sdlog: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
}

#[derive(Debug, Deserialize)]
struct Preset {
    meanlog: f64,
    sdlog: f64,
    source: Option<String>,
}

fn presets(path: Option<&PathBuf>) -> CliResult<BTreeMap<String, Preset>> {
    let (text, origin) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            p.display().to_string(),
        ),
        None => (BUNDLED_PRESETS.to_string(), "bundled presets".to_string()),
    };
    toml::from_str(&text).map_err(|e| CliError::input(format!("{origin}: {}", e.message())))
}

/// Delay distribution from a named preset with optional overrides.
fn delay(
    fit: &FitArgs,
    name: &str,
    meanlog: Option<f64>,
    sdlog: Option<f64>,
) -> CliResult<(DurationDist, String)> {
    let table = presets(fit.presets.as_ref())?;
    let preset = table.get(name).ok_or_else(|| {
        CliError::input(format!(
            "unknown delay distribution `{name}` (known: {})",
            table.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let (m, s) = (
        meanlog.unwrap_or(preset.meanlog),
        sdlog.unwrap_or(preset.sdlog),
    );
    let dist = DurationDist::discretize(m, s, fit.d_limit.max(30))?;
    if dist.truncation_warning {
        eprintln!(
            "warning: {:.1}% of the delay distribution lies beyond {} days",
            100.0 * dist.tail_mass,
            fit.d_limit
        );
    }
    let label = match &preset.source {
        Some(src) if meanlog.is_none() && sdlog.is_none() => format!("{name} ({src})"),
        _ => format!("{name} meanlog {m} sdlog {s}"),
    };
    Ok((dist, label))
}

fn read_deaths(fit: &FitArgs) -> CliResult<DeathSeries> {
    let path = fit.common.require_input()?;
    let data = read_csv(path)?;
    let dates = data.parse_column(data.column("date")?, parse_date)?;
    let deaths = data.parse_column(data.column("deaths")?, parse_count)?;
    let rows: Vec<(NaiveDate, u64)> = dates.into_iter().zip(deaths).collect();
    DeathSeries::from_dated(&rows).map_err(|e| CliError::from(e).context(path.display()))
}

struct Fitted {
    series: DeathSeries,
    rec: IncidenceReconstruction,
    duration: DurationDist,
    duration_label: String,
    markers: Vec<NaiveDate>,
}

fn fit(fit: &FitArgs) -> CliResult<Fitted> {
    let series = read_deaths(fit)?;
    let markers = read_marker_dates(fit.dates.as_deref())?;
    let (duration, duration_label) = delay(fit, &fit.duration, fit.meanlog, fit.sdlog)?;
    let opts = DeconvOptions {
        family: match fit.family {
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Negbin => Family::NegBin,
        },
        weekly_cycle: fit.weekly_cycle,
        basis_dim: fit.basis_dim,
        d_start: fit.d_start,
        d_limit: fit.d_limit,
        n_draws: fit.draws,
        seed: fit.common.seed,
        execution: fit.common.execution(),
        ..Default::default()
    };
    let rec = reconstruct_incidence(&series, &duration, &opts)?;
    Ok(Fitted {
        series,
        rec,
        duration,
        duration_label,
        markers,
    })
}

fn incidence_table(f: &Fitted) -> Table {
    let rec = &f.rec;
    let mut t = Table::new(&["date", "inc_mean", "inc_lo", "inc_hi", "fitted_deaths"]);
    t.meta("family", rec.family.name());
    t.meta("basis_dim", rec.basis_dim);
    t.meta(
        "lambdas",
        rec.fit
            .lambdas
            .iter()
            .map(|l| crate::table::format_float(*l))
            .collect::<Vec<_>>()
            .join(" "),
    );
    t.meta(
        "dispersion",
        rec.dispersion
            .map_or_else(|| "none".to_string(), crate::table::format_float),
    );
    t.meta("duration", &f.duration_label);
    t.meta("d_start", rec.d_start);
    t.meta("d_limit", rec.d_limit);
    t.markers = f.markers.clone();
    for j in 0..rec.grid_len() {
        let fitted = j
            .checked_sub(rec.grid_offset)
            .and_then(|i| rec.fitted_deaths.get(i))
            .map_or(Cell::Missing, |v| num(*v));
        t.push(vec![
            rec.grid_date(j).into(),
            num(rec.incidence_mean[j]),
            num(rec.incidence_lo[j]),
            num(rec.incidence_hi[j]),
            fitted,
        ]);
    }
    t
}

fn envelope_table(f: &Fitted, env: &Envelope, label: &str, replicates: usize) -> Table {
    let mut t = Table::new(&["date", "observed", "lo", "hi", "min", "max", "outside"]);
    t.meta("simulation_duration", label);
    t.meta("replicates", replicates);
    t.meta(
        "fraction_outside",
        crate::table::format_float(env.fraction_outside()),
    );
    t.markers = f.markers.clone();
    for i in 0..env.observed.len() {
        t.push(vec![
            f.series.date(i).into(),
            num(env.observed[i]),
            num(env.lo[i]),
            num(env.hi[i]),
            num(env.min[i]),
            num(env.max[i]),
            if env.outside[i] { "true" } else { "false" }.into(),
        ]);
    }
    t
}

fn envelope_plot(title: &str) -> Plot {
    Plot::new(title, "date", "date", "deaths per day")
        .band("lo", "hi", "95% simulated")
        .series(Series::points("observed", "observed"))
}

pub fn run(args: &DeconvArgs) -> CliResult<Outputs> {
    let f = fit(&args.fit)?;
    let rec = &f.rec;
    let mut out = Outputs::default();

    let inc = incidence_table(&f);
    let plot = Plot::new("Fatal incidence", "date", "date", "infections per day")
        .band("inc_lo", "inc_hi", "95% band")
        .series(Series::line("inc_mean", "incidence"))
        .series(Series::line("fitted_deaths", "fitted deaths"));
    out.figure("incidence", &inc, render(&inc, &plot));

    let rt = r_from_incidence(&rec.incidence_mean, args.delta, args.gamma, 20)?;
    let mut logr = Table::new(&["date", "r", "log_r", "reliable"]);
    logr.meta("delta", crate::table::format_float(args.delta));
    logr.meta("gamma", crate::table::format_float(args.gamma));
    logr.meta("burn_in_days", crate::table::format_float(rt.burn_in));
    logr.markers = f.markers.clone();
    for k in 0..rt.t.len() {
        logr.push(vec![
            rec.grid_date(k).into(),
            Cell::opt(rt.r[k]),
            Cell::opt(rt.log_r[k]),
            if rt.reliable(k) { "true" } else { "false" }.into(),
        ]);
    }
    let plot = Plot::new("Reproduction number", "date", "date", "log R")
        .series(Series::line("log_r", "log R after burn-in").filtered("reliable", "true"));
    out.figure("logr", &logr, render(&logr, &plot));

    let env = forward_simulate_check(
        rec,
        &f.duration,
        args.replicates,
        args.common.seed.wrapping_add(1),
        args.common.execution(),
    )?;
    let label = f.duration_label.clone();
    let env_t = envelope_table(&f, &env, &label, args.replicates);
    out.figure(
        "envelope",
        &env_t,
        render(&env_t, &envelope_plot("Forward-simulation check")),
    );

    println!(
        "deaths {} to {} ({} days, {} total)",
        f.series.start,
        f.series.date(f.series.len() - 1),
        f.series.len(),
        f.series.total()
    );
    println!("peak fatal incidence: {}", rec.peak_date());
    println!(
        "days outside the 95% simulation envelope: {:.1}%",
        100.0 * env.fraction_outside()
    );
    Ok(out)
}

pub fn run_simcheck(args: &SimcheckArgs) -> CliResult<Outputs> {
    let sim_name = args
        .sim_duration
        .clone()
        .unwrap_or_else(|| args.fit.duration.clone());
    // resolve the simulation distribution before the expensive fit
    let (sim_meanlog, sim_sdlog) = if args.sim_duration.is_none() {
        (
            args.sim_meanlog.or(args.fit.meanlog),
            args.sim_sdlog.or(args.fit.sdlog),
        )
    } else {
        (args.sim_meanlog, args.sim_sdlog)
    };
    let (sim, sim_label) = delay(&args.fit, &sim_name, sim_meanlog, sim_sdlog)?;
    let f = fit(&args.fit)?;
    let env = forward_simulate_check(
        &f.rec,
        &sim,
        args.replicates,
        args.fit.common.seed.wrapping_add(1),
        args.fit.common.execution(),
    )?;
    let mut out = Outputs::default();
    let mut t = envelope_table(&f, &env, &sim_label, args.replicates);
    t.meta
        .insert(0, ("fit_duration".into(), f.duration_label.clone()));
    out.figure(
        "simcheck",
        &t,
        render(
            &t,
            &envelope_plot("Deaths simulated from the reconstruction"),
        ),
    );
    println!(
        "fitted with {}, simulated with {sim_label}",
        f.duration_label
    );
    println!(
        "days outside the 95% simulation envelope: {:.1}%",
        100.0 * env.fraction_outside()
    );
    Ok(out)
}
